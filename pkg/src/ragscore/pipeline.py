"""End-to-end orchestration: simplify, judge, parse, score, aggregate.

A run fans samples out to a bounded worker pool, isolates per-sample
failures (an unparseable judge output becomes a null score, never an
abort), and writes per-sample records plus aggregate reports to the output
directory.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from . import metrics
from .backend import (
    BackendClient,
    GenerationRequest,
    HttpTransport,
    ReplayTransport,
)
from .datasets import load_correctness, load_faithfulness
from .errors import (
    DatasetError,
    DegenerateInput,
    IndexCoverageError,
    NoStatementsFound,
    SchemaViolation,
    UndefinedScore,
    ZeroVerdicts,
)
from .prompting import (
    PromptLibrary,
    format_statement_list,
    parse_statement_list,
    split_sentences,
)
from .types import (
    CorrectnessSample,
    FaithfulnessSample,
    SampleScore,
    Statement,
)
from .verdicts import (
    ParsingStrategy,
    constrained_parse,
    parse_regex_correctness,
    parse_regex_faithfulness,
)

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 20

_VERDICT_LINE_RE = re.compile(r"\bVERDICT\b")


@dataclass
class RunConfig:
    """Everything one evaluation run needs; flag overrides land here."""

    task: str = "correctness"  # correctness | faithfulness
    strategy: ParsingStrategy = ParsingStrategy.REGEX1
    correctness_score: str = "recall"  # recall | f1
    auc_normalization: str = "mean"  # mean | paper
    endpoint: str = ""
    model_id: str = ""
    api_key: str | None = None
    temperature: float = 1.0
    max_tokens: int = 2048
    concurrency: int = 4
    retries: int = 3
    repair_limit: int = 2
    dataset_path: str = ""
    output_dir: str = "runs/latest"
    seed: int | None = None
    cache_dir: str | None = None
    replay_file: str | None = None
    template_dir: str | None = None

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ValueError("concurrency bound must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.task not in ("correctness", "faithfulness"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.correctness_score not in ("recall", "f1"):
            raise ValueError(f"unknown correctness_score {self.correctness_score!r}")
        if isinstance(self.strategy, str):
            self.strategy = ParsingStrategy(self.strategy)

    def digest(self) -> str:
        payload = asdict(self)
        payload["strategy"] = self.strategy.value
        payload.pop("api_key", None)  # never persist credentials
        payload.pop("output_dir", None)  # where results land, not what ran
        encoded = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(encoded.encode("utf-8")).hexdigest()


@dataclass
class RunReport:
    per_sample: list[dict[str, Any]]
    aggregates: dict[str, Any]
    parse_failure_rate: float
    histogram: dict[str, Any]
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "metadata": self.metadata,
            "aggregates": self.aggregates,
            "parse_failure_rate": self.parse_failure_rate,
            "histogram": self.histogram,
        }


def build_backend(config: RunConfig) -> BackendClient:
    if config.replay_file:
        transport: Any = ReplayTransport.from_file(config.replay_file)
    elif config.endpoint:
        transport = HttpTransport(config.endpoint, api_key=config.api_key)
    else:
        raise ValueError("config needs either an endpoint or a replay file")
    return BackendClient(
        transport,
        cache_dir=config.cache_dir,
        max_retries=config.retries,
        repair_attempts=config.repair_limit,
        max_concurrency=config.concurrency,
    )


class Evaluator:
    """Stateful helper binding a backend, prompt library, and config."""

    def __init__(
        self,
        config: RunConfig,
        backend: BackendClient | None = None,
        prompts: PromptLibrary | None = None,
    ):
        self.config = config
        self.backend = backend if backend is not None else build_backend(config)
        self.prompts = prompts if prompts is not None else PromptLibrary(
            config.template_dir
        )
        # the same ground truth recurs across answering models; simplify each
        # distinct text once per run
        self._statement_memo: dict[str, list[Statement]] = {}

    def _generate(self, prompt: str) -> str:
        request = GenerationRequest(
            model_id=self.config.model_id,
            user_text=prompt,
            temperature=self.config.temperature,
            max_tokens=self.config.max_tokens,
            seed=self.config.seed,
        )
        return self.backend.generate(request).text

    def extract_statements(self, question: str, text: str) -> list[Statement]:
        memo_key = f"{question}\x1f{text}"
        if memo_key in self._statement_memo:
            return self._statement_memo[memo_key]
        prompt = self.prompts.render(
            "statement_extraction",
            question=question,
            answer=text,
            sentences="\n".join(split_sentences(text)),
        )
        raw = self._generate(prompt)
        try:
            statements = parse_statement_list(raw)
        except NoStatementsFound:
            # the extraction prompt's own fallback: the whole answer is one
            # statement
            statements = [Statement(index=0, text=text)]
        self._statement_memo[memo_key] = statements
        return statements

    def _parse_correctness(self, raw: str):
        if self.config.strategy == ParsingStrategy.CONSTRAINED:
            statement_count = _count_verdict_lines(raw)
            if statement_count == 0:
                raise ZeroVerdicts("no verdict lines to restructure")
            return constrained_parse(
                raw,
                "correctness",
                statement_count,
                self.backend,
                self.prompts,
                model_id=self.config.model_id,
                temperature=self.config.temperature,
                max_tokens=self.config.max_tokens,
                seed=self.config.seed,
            )
        return parse_regex_correctness(raw, self.config.strategy)

    def _parse_faithfulness(self, raw: str, statement_count: int):
        if self.config.strategy == ParsingStrategy.CONSTRAINED:
            return constrained_parse(
                raw,
                "faithfulness",
                statement_count,
                self.backend,
                self.prompts,
                model_id=self.config.model_id,
                temperature=self.config.temperature,
                max_tokens=self.config.max_tokens,
                seed=self.config.seed,
            )
        return parse_regex_faithfulness(raw, self.config.strategy)

    def evaluate_correctness_sample(self, sample: CorrectnessSample) -> SampleScore:
        answer_statements = self.extract_statements(sample.question, sample.answer)
        truth_statements = self.extract_statements(sample.question, sample.ground_truth)
        prompt = self.prompts.render(
            "correctness_verdict",
            question=sample.question,
            statements_answer=format_statement_list(answer_statements),
            statements_groundtruth=format_statement_list(truth_statements),
        )
        raw = self._generate(prompt)
        try:
            counts = self._parse_correctness(raw)
        except (ZeroVerdicts, SchemaViolation, IndexCoverageError) as exc:
            logger.warning("sample %s unparseable: %s", sample.id, exc)
            return SampleScore(sample_id=sample.id, score=None, counts=None,
                               raw_judge_output=raw)
        try:
            if self.config.correctness_score == "f1":
                score = metrics.f1(counts)
            else:
                score = metrics.recall(counts)
        except UndefinedScore:
            return SampleScore(sample_id=sample.id, score=None, counts=counts,
                               raw_judge_output=raw)
        return SampleScore(sample_id=sample.id, score=score, counts=counts,
                           raw_judge_output=raw)

    def _faithfulness_side(
        self, sample: FaithfulnessSample, answer: str, side_id: str
    ) -> tuple[SampleScore, Fraction | None]:
        statements = self.extract_statements(sample.question, answer)
        prompt = self.prompts.render(
            "faithfulness_verdict",
            context=sample.context,
            statements=format_statement_list(statements),
        )
        raw = self._generate(prompt)
        try:
            counts = self._parse_faithfulness(raw, len(statements))
            exact = metrics.precision_faithfulness_exact(counts)
        except (ZeroVerdicts, SchemaViolation, IndexCoverageError, UndefinedScore) as exc:
            logger.warning("sample %s unparseable: %s", side_id, exc)
            return SampleScore(sample_id=side_id, score=None, counts=None,
                               raw_judge_output=raw), None
        return SampleScore(sample_id=side_id, score=float(exact), counts=counts,
                           raw_judge_output=raw), exact

    def evaluate_faithfulness_pair(
        self, sample: FaithfulnessSample
    ) -> tuple[SampleScore, SampleScore, float | None]:
        good, good_exact = self._faithfulness_side(
            sample, sample.good_answer, f"{sample.id}::good"
        )
        poor, poor_exact = self._faithfulness_side(
            sample, sample.poor_answer, f"{sample.id}::poor"
        )
        if good_exact is None or poor_exact is None:
            return good, poor, None
        return good, poor, metrics.pair_score(good_exact, poor_exact)


def _count_verdict_lines(raw: str) -> int:
    return sum(1 for line in raw.splitlines() if _VERDICT_LINE_RE.search(line))


# --- aggregation -----------------------------------------------------------

def _histogram(
    label0_scores: list[float], label1_scores: list[float]
) -> dict[str, Any]:
    edges = [i / HISTOGRAM_BINS for i in range(HISTOGRAM_BINS + 1)]

    def bin_counts(scores: list[float]) -> list[int]:
        counts = [0] * HISTOGRAM_BINS
        for score in scores:
            index = min(int(score * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)
            counts[index] += 1
        return counts

    return {
        "bin_edges": edges,
        "label_0": bin_counts(label0_scores),
        "label_1": bin_counts(label1_scores),
    }


def correctness_aggregates(
    scores: list[float], labels: list[int], auc_normalization: str
) -> dict[str, Any]:
    """Rank correlations plus the F1 curve under both normalizations."""
    aggregates: dict[str, Any] = {}
    try:
        aggregates["spearman"] = metrics.spearman(scores, labels)
        aggregates["kendall"] = metrics.kendall(scores, labels)
    except DegenerateInput as exc:
        aggregates["spearman"] = None
        aggregates["kendall"] = None
        aggregates["correlation_note"] = str(exc)
    for normalization in ("mean", "paper"):
        curve = metrics.f1_auc(scores, labels, normalization)
        aggregates[f"f1_auc_{normalization}"] = curve.auc
        if normalization == auc_normalization:
            aggregates["f1_auc"] = curve.auc
            aggregates["f1_curve"] = list(curve.f1_values)
    return aggregates


def faithfulness_aggregates(pairs: list[tuple[float, float]]) -> dict[str, Any]:
    aggregate = metrics.aggregate_pair_scores(pairs)
    return {
        "worst": float(aggregate.worst),
        "middle": float(aggregate.middle),
        "best": float(aggregate.best),
        "n_pairs": aggregate.n,
    }


def _metadata(config: RunConfig, started: float) -> dict[str, Any]:
    return {
        "config_digest": config.digest(),
        "model_id": config.model_id,
        "task": config.task,
        "strategy": config.strategy.value,
        "timestamps": {"started": started, "finished": time.time()},
    }


def _run_correctness(
    config: RunConfig, evaluate, samples
) -> RunReport:
    started = time.time()
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        results = list(pool.map(evaluate, samples))

    rows = []
    for sample, result in zip(samples, results):
        row = result.to_record()
        row["human_label"] = sample.human_label
        rows.append(row)

    scored = [(r.score, s.human_label) for s, r in zip(samples, results)
              if r.score is not None]
    failures = len(results) - len(scored)
    aggregates: dict[str, Any] = {}
    if scored:
        scores = [s for s, _ in scored]
        labels = [h for _, h in scored]
        aggregates = correctness_aggregates(scores, labels, config.auc_normalization)
        histogram = _histogram(
            [s for s, h in scored if h == 0], [s for s, h in scored if h == 1]
        )
    else:
        histogram = _histogram([], [])
    return RunReport(
        per_sample=rows,
        aggregates=aggregates,
        parse_failure_rate=failures / len(results),
        histogram=histogram,
        metadata=_metadata(config, started),
    )


def _run_faithfulness(config: RunConfig, evaluate_pair, samples) -> RunReport:
    started = time.time()
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        results = list(pool.map(evaluate_pair, samples))

    rows = []
    pairs: list[tuple[float, float]] = []
    failures = 0
    for sample, (good, poor, pair) in zip(samples, results):
        for role, side in (("good", good), ("poor", poor)):
            row = side.to_record()
            row["pair_id"] = sample.id
            row["role"] = role
            rows.append(row)
        if pair is None:
            failures += 1
        else:
            pairs.append((good.score, poor.score))

    aggregates = faithfulness_aggregates(pairs) if pairs else {}
    histogram = _histogram(
        [poor.score for _, poor, p in results if p is not None],
        [good.score for good, _, p in results if p is not None],
    )
    return RunReport(
        per_sample=rows,
        aggregates=aggregates,
        parse_failure_rate=failures / len(results),
        histogram=histogram,
        metadata=_metadata(config, started),
    )


def run(config: RunConfig) -> RunReport:
    """Evaluate every sample of the configured dataset through the
    simplify/judge/parse pipeline and write the report."""
    evaluator = Evaluator(config)
    if config.task == "correctness":
        dataset = load_correctness(config.dataset_path)
        if not dataset.samples:
            raise DatasetError(f"empty dataset: {config.dataset_path}")
        report = _run_correctness(
            config, evaluator.evaluate_correctness_sample, dataset.samples
        )
    else:
        dataset = load_faithfulness(config.dataset_path)
        if not dataset.samples:
            raise DatasetError(f"empty dataset: {config.dataset_path}")
        report = _run_faithfulness(
            config, evaluator.evaluate_faithfulness_pair, dataset.samples
        )
    write_report(report, config.output_dir)
    return report


def run_baselines(config: RunConfig) -> RunReport:
    """Score the dataset with the deterministic token-overlap baselines;
    no backend involved."""
    started = time.time()
    if config.task == "correctness":
        dataset = load_correctness(config.dataset_path)
        if not dataset.samples:
            raise DatasetError(f"empty dataset: {config.dataset_path}")
        rows = []
        scored: list[tuple[float, int]] = []
        failures = 0
        for sample in dataset.samples:
            try:
                score = metrics.bot_recall(sample.answer, sample.ground_truth)
            except UndefinedScore:
                score = None
            row = SampleScore(sample_id=sample.id, score=score, counts=None).to_record()
            row["human_label"] = sample.human_label
            rows.append(row)
            if score is None:
                failures += 1
            else:
                scored.append((score, sample.human_label))
        aggregates = correctness_aggregates(
            [s for s, _ in scored], [h for _, h in scored], config.auc_normalization
        ) if scored else {}
        histogram = _histogram(
            [s for s, h in scored if h == 0], [s for s, h in scored if h == 1]
        )
        report = RunReport(
            per_sample=rows,
            aggregates=aggregates,
            parse_failure_rate=failures / len(dataset.samples),
            histogram=histogram,
            metadata=_metadata(config, started) | {"baseline": "bot_recall"},
        )
    else:
        dataset = load_faithfulness(config.dataset_path)
        if not dataset.samples:
            raise DatasetError(f"empty dataset: {config.dataset_path}")
        rows = []
        pairs: list[tuple[float, float]] = []
        failures = 0
        for sample in dataset.samples:
            try:
                good = metrics.k_precision(sample.good_answer, sample.context)
                poor = metrics.k_precision(sample.poor_answer, sample.context)
            except UndefinedScore:
                failures += 1
                good = poor = None
            for role, score, answer in (
                ("good", good, sample.good_answer),
                ("poor", poor, sample.poor_answer),
            ):
                row = SampleScore(
                    sample_id=f"{sample.id}::{role}", score=score, counts=None
                ).to_record()
                row["pair_id"] = sample.id
                row["role"] = role
                rows.append(row)
            if good is not None and poor is not None:
                pairs.append((good, poor))
        aggregates = faithfulness_aggregates(pairs) if pairs else {}
        histogram = _histogram(
            [p for _, p in pairs], [g for g, _ in pairs]
        )
        report = RunReport(
            per_sample=rows,
            aggregates=aggregates,
            parse_failure_rate=failures / len(dataset.samples),
            histogram=histogram,
            metadata=_metadata(config, started) | {"baseline": "k_precision"},
        )
    write_report(report, config.output_dir)
    return report


# --- report I/O ------------------------------------------------------------

def write_report(report: RunReport, output_dir: str | Path) -> None:
    directory = Path(output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "per_sample.jsonl").open("w", encoding="utf-8") as handle:
        for row in report.per_sample:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    (directory / "report.json").write_text(
        json.dumps(report.to_json(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    edges = report.histogram["bin_edges"]
    lines = ["bin_lo,bin_hi,label_0,label_1"]
    for i in range(HISTOGRAM_BINS):
        lines.append(
            f"{edges[i]},{edges[i + 1]},"
            f"{report.histogram['label_0'][i]},{report.histogram['label_1'][i]}"
        )
    (directory / "histogram.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def recompute_report(per_sample_path: str | Path,
                     auc_normalization: str = "mean") -> dict[str, Any]:
    """Rebuild aggregates from an emitted per-sample file alone."""
    rows = []
    with Path(per_sample_path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(json.loads(line))
    if not rows:
        raise DatasetError(f"no rows in {per_sample_path}")

    if "human_label" in rows[0]:
        scored = [(r["score"], r["human_label"]) for r in rows if r["score"] is not None]
        aggregates = correctness_aggregates(
            [s for s, _ in scored], [h for _, h in scored], auc_normalization
        ) if scored else {}
        failures = sum(1 for r in rows if r["score"] is None)
        return {"aggregates": aggregates, "parse_failure_rate": failures / len(rows)}

    by_pair: dict[str, dict[str, Any]] = {}
    for row in rows:
        by_pair.setdefault(row["pair_id"], {})[row["role"]] = row["score"]
    pairs = [
        (sides["good"], sides["poor"])
        for sides in by_pair.values()
        if sides.get("good") is not None and sides.get("poor") is not None
    ]
    failures = len(by_pair) - len(pairs)
    aggregates = faithfulness_aggregates(pairs) if pairs else {}
    return {"aggregates": aggregates, "parse_failure_rate": failures / len(by_pair)}
