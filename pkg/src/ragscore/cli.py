"""Command-line interface.

A YAML config file provides run defaults; flags override individual keys;
the API key comes from an environment variable, never from the config file.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import fields
from pathlib import Path

import click
import yaml

from .datasets import load_correctness, load_faithfulness
from .errors import DatasetError, RagscoreError
from .pipeline import RunConfig, recompute_report, run, run_baselines

DEFAULT_API_KEY_ENV = "RAGSCORE_API_KEY"

# api_key is deliberately absent: credentials never come from config files
_CONFIG_FIELDS = {f.name for f in fields(RunConfig)} - {"api_key"}


def _build_config(config_path: str | None, **overrides) -> RunConfig:
    values: dict = {}
    if config_path:
        loaded = yaml.safe_load(Path(config_path).read_text(encoding="utf-8")) or {}
        unknown = set(loaded) - _CONFIG_FIELDS
        if unknown:
            raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    values.update({k: v for k, v in overrides.items() if v is not None})
    api_key_env = values.pop("api_key_env", None) or DEFAULT_API_KEY_ENV
    values["api_key"] = os.environ.get(api_key_env) or os.environ.get("OPENAI_API_KEY")
    return RunConfig(**values)


def _common_options(command):
    decorators = [
        click.option("--config", "config_path", type=click.Path(exists=True),
                     help="YAML config file with RunConfig keys."),
        click.option("--dataset", "dataset_path", type=click.Path(exists=True)),
        click.option("--output-dir", type=click.Path()),
        click.option("--strategy",
                     type=click.Choice(["regex1", "regex2", "constrained"])),
        click.option("--endpoint", help="OpenAI-compatible chat-completions base URL."),
        click.option("--model-id"),
        click.option("--replay-file", type=click.Path(exists=True),
                     help="Scripted replay backend spec (offline runs)."),
        click.option("--cache-dir", type=click.Path()),
        click.option("--temperature", type=float),
        click.option("--max-tokens", type=int),
        click.option("--concurrency", type=int),
        click.option("--seed", type=int),
        click.option("--api-key-env",
                     help=f"Env var holding the API key (default {DEFAULT_API_KEY_ENV})."),
        click.option("--auc-normalization", type=click.Choice(["mean", "paper"])),
    ]
    for decorator in reversed(decorators):
        command = decorator(command)
    return command


def _print_aggregates(report) -> None:
    click.echo(json.dumps(report.aggregates, indent=2))
    click.echo(f"parse_failure_rate: {report.parse_failure_rate}")


def _run_with_repeats(config: RunConfig, repeats: int) -> None:
    if repeats <= 1:
        report = run(config)
        _print_aggregates(report)
        return
    base_dir = Path(config.output_dir)
    for repeat in range(1, repeats + 1):
        config.output_dir = str(base_dir / f"run_{repeat}")
        if config.seed is not None:
            config.seed = config.seed + repeat
        click.echo(f"--- repeat {repeat}/{repeats} ---")
        report = run(config)
        _print_aggregates(report)


@click.group()
def main() -> None:
    """Statement-level correctness and faithfulness scoring for RAG answers."""


@main.command("eval-correctness")
@_common_options
@click.option("--score", "correctness_score", type=click.Choice(["recall", "f1"]))
@click.option("--repeats", type=int, default=1, show_default=True)
def eval_correctness(config_path, repeats, **overrides) -> None:
    """Run the simplify/judge/parse pipeline on a correctness dataset."""
    try:
        config = _build_config(config_path, task="correctness", **overrides)
        _run_with_repeats(config, repeats)
    except (RagscoreError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc


@main.command("eval-faithfulness")
@_common_options
@click.option("--repeats", type=int, default=1, show_default=True)
def eval_faithfulness(config_path, repeats, **overrides) -> None:
    """Evaluate faithful/unfaithful answer pairs against their context."""
    try:
        config = _build_config(config_path, task="faithfulness", **overrides)
        _run_with_repeats(config, repeats)
    except (RagscoreError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc


@main.command("baselines")
@_common_options
@click.option("--task", type=click.Choice(["correctness", "faithfulness"]),
              default="correctness", show_default=True)
def baselines(config_path, task, **overrides) -> None:
    """Score with the deterministic token-overlap baselines (no backend)."""
    try:
        config = _build_config(config_path, task=task, **overrides)
        report = run_baselines(config)
        _print_aggregates(report)
    except RagscoreError as exc:
        raise click.ClickException(str(exc)) from exc


@main.command("report")
@click.argument("per_sample_path", type=click.Path(exists=True))
@click.option("--auc-normalization", type=click.Choice(["mean", "paper"]),
              default="mean", show_default=True)
def report(per_sample_path, auc_normalization) -> None:
    """Recompute aggregates from an emitted per-sample file."""
    try:
        result = recompute_report(per_sample_path, auc_normalization)
    except RagscoreError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(json.dumps(result, indent=2))


@main.command("validate-dataset")
@click.argument("dataset_path", type=click.Path(exists=True))
@click.option("--task", type=click.Choice(["correctness", "faithfulness"]),
              default="correctness", show_default=True)
def validate_dataset(dataset_path, task) -> None:
    """Validate every record of a dataset file; exit non-zero on errors."""
    try:
        if task == "correctness":
            dataset = load_correctness(dataset_path)
        else:
            dataset = load_faithfulness(dataset_path)
    except DatasetError as exc:
        click.echo(f"INVALID: {exc}", err=True)
        sys.exit(1)
    click.echo(f"OK: {len(dataset.samples)} samples")


if __name__ == "__main__":
    main()
