from __future__ import annotations

import json
from pathlib import Path

import pytest

from conftest import JOHN_ANSWER, einstein_replay_rules
from ragscore.backend import BackendClient, ReplayRule, ReplayTransport
from ragscore.datasets import load_correctness
from ragscore.errors import DatasetError, FileNotFound
from ragscore.pipeline import (
    Evaluator,
    RunConfig,
    recompute_report,
    run,
    run_baselines,
)
from ragscore.types import CorrectnessCounts, FaithfulnessCounts

JOHN_CONTEXT = (
    "John is a student at XYZ University. He is pursuing a degree in Computer "
    "Science. He is enrolled in several courses this semester, including Data "
    "Structures, Algorithms, and Database Management. John is a diligent "
    "student and spends a significant amount of time studying and completing "
    "assignments. He often stays late in the library to work on his projects."
)

GOOD_ANSWER = "John attends XYZ University and is dedicated."
POOR_ANSWER = "John majors in Biology and has a part-time job."

GOOD_STATEMENTS = """\
- John is a student at XYZ University.
- John is pursuing a degree in Computer Science.
- John spends a significant amount of time studying.
- John is a dedicated student."""

GOOD_JUDGE_OUTPUT = """\
- John is a student at XYZ University. The context states this directly. VERDICT: PASSED
- John is pursuing a degree in Computer Science. The context states this directly. VERDICT: PASSED
- John spends a significant amount of time studying. The context states this directly. VERDICT: PASSED
- John is a dedicated student. The context implies dedication. VERDICT: PASSED"""

POOR_STATEMENTS = """\
- John is majoring in Biology.
- John is taking a course on Artificial Intelligence.
- John is a dedicated student.
- John has a part-time job."""


def faithfulness_replay_rules() -> list[dict]:
    return [
        {"contains": f"Answer: {GOOD_ANSWER}", "replies": [GOOD_STATEMENTS]},
        {"contains": f"Answer: {POOR_ANSWER}", "replies": [POOR_STATEMENTS]},
        {"contains": "Statements: - John is a student at XYZ University.",
         "replies": [GOOD_JUDGE_OUTPUT]},
        {"contains": "Statements: - John is majoring in Biology.",
         "replies": [JOHN_ANSWER]},
        # tie pair: both sides fully supported
        {"contains": "Answer: Cats sleep and purr.",
         "replies": ["- Cats sleep a lot.\n- Cats purr."]},
        {"contains": "Answer: Dogs bark and run.",
         "replies": ["- Dogs bark.\n- Dogs run."]},
        {"contains": "Statements: - Cats sleep a lot.",
         "replies": ["- Cats sleep a lot. VERDICT: PASSED\n- Cats purr. VERDICT: PASSED"]},
        {"contains": "Statements: - Dogs bark.",
         "replies": ["- Dogs bark. VERDICT: PASSED\n- Dogs run. VERDICT: PASSED"]},
    ]


def faithfulness_dataset_records() -> list[dict]:
    return [
        {"id": "john", "question": "Tell me about John.", "context": JOHN_CONTEXT,
         "good_answer": GOOD_ANSWER, "poor_answer": POOR_ANSWER},
        {"id": "pets", "question": "What do pets do?",
         "context": "Cats sleep a lot and purr. Dogs bark and run.",
         "good_answer": "Cats sleep and purr.", "poor_answer": "Dogs bark and run."},
    ]


def replay_evaluator(rules: list[dict], task: str, **config_overrides) -> Evaluator:
    config = RunConfig(task=task, model_id="replay-model", **config_overrides)
    transport = ReplayTransport(
        rules=[ReplayRule(r["contains"], list(r["replies"])) for r in rules]
    )
    return Evaluator(config, backend=BackendClient(transport))


class TestEvaluateCorrectnessSample:
    def test_einstein_scenario(self, einstein_dataset_file):
        evaluator = replay_evaluator(einstein_replay_rules(), "correctness")
        sample = load_correctness(einstein_dataset_file).samples[0]
        result = evaluator.evaluate_correctness_sample(sample)
        assert result.counts == CorrectnessCounts(tp=1, fp=2, fn=2)
        assert result.score == pytest.approx(1 / 3)

    def test_identity_answer_all_tp(self):
        rules = [
            {"contains": "Answer: Water boils at 100C.",
             "replies": ["- Water boils at 100C."]},
            {"contains": "Statements ground_truth: - Water boils at 100C.",
             "replies": ["- Water boils at 100C. VERDICT: TP"]},
        ]
        evaluator = replay_evaluator(rules, "correctness")
        from ragscore.types import CorrectnessSample
        sample = CorrectnessSample(
            id="s", question="Boiling?", answer="Water boils at 100C.",
            ground_truth="Water boils at 100C.", human_label=1,
        )
        result = evaluator.evaluate_correctness_sample(sample)
        assert result.score == 1.0

    def test_verdictless_judge_yields_null_score(self):
        rules = [
            {"contains": "Answer:", "replies": ["- Some statement here."]},
            {"contains": "Statements ground_truth:",
             "replies": ["I cannot classify these, sorry."]},
        ]
        # judge rule must come first: the extraction rule substring also
        # appears in extraction prompts only
        evaluator = replay_evaluator(list(reversed(rules)), "correctness")
        from ragscore.types import CorrectnessSample
        sample = CorrectnessSample(id="s", question="q", answer="A text.",
                                   ground_truth="B text.", human_label=1)
        result = evaluator.evaluate_correctness_sample(sample)
        assert result.score is None
        assert result.counts is None
        assert "cannot classify" in result.raw_judge_output

    def test_extraction_fallback_wraps_whole_answer(self):
        rules = [
            {"contains": "Statements ground_truth:",
             "replies": ["- x VERDICT: TP"]},
            {"contains": "Answer:", "replies": ["no list at all"]},
        ]
        evaluator = replay_evaluator(rules, "correctness")
        from ragscore.types import CorrectnessSample
        sample = CorrectnessSample(id="s", question="q", answer="Plain answer",
                                   ground_truth="Plain truth", human_label=1)
        result = evaluator.evaluate_correctness_sample(sample)
        assert result.score == 1.0  # single wrapped statement judged TP


class TestEvaluateFaithfulnessPair:
    def test_john_pair(self):
        evaluator = replay_evaluator(faithfulness_replay_rules(), "faithfulness")
        from ragscore.types import FaithfulnessSample
        sample = FaithfulnessSample.from_record(faithfulness_dataset_records()[0])
        good, poor, pair = evaluator.evaluate_faithfulness_pair(sample)
        assert good.counts == FaithfulnessCounts(passed=4, failed=0)
        assert poor.counts == FaithfulnessCounts(passed=1, failed=3)
        assert (good.score, poor.score) == (1.0, 0.25)
        assert pair == 1

    def test_tie_pair(self):
        evaluator = replay_evaluator(faithfulness_replay_rules(), "faithfulness")
        from ragscore.types import FaithfulnessSample
        sample = FaithfulnessSample.from_record(faithfulness_dataset_records()[1])
        good, poor, pair = evaluator.evaluate_faithfulness_pair(sample)
        assert good.score == poor.score == 1.0
        assert pair == 0.5


@pytest.fixture
def correctness_run_setup(tmp_path: Path):
    """4 samples with scripted scores [1, 1, 0, 0] and labels [1, 1, 0, 0]."""
    rules = []
    records = []
    for i, (token, label) in enumerate(
        [("alpha", 1), ("bravo", 1), ("charlie", 0), ("delta", 0)]
    ):
        answer = f"Answer text {token}."
        truth = f"Truth text {token}."
        records.append({"id": f"s{i}", "question": f"Q {token}?", "answer": answer,
                        "ground_truth": truth, "human_label": label})
        rules.append({"contains": f"Answer: {answer}",
                      "replies": [f"- Fact {token} from answer."]})
        rules.append({"contains": f"Answer: {truth}",
                      "replies": [f"- Fact {token} from truth."]})
        verdict = "TP" if label == 1 else "FN"
        rules.append({"contains": f"Statements ground_truth: - Fact {token} from truth.",
                      "replies": [f"- Fact {token} from answer. VERDICT: {verdict}"]})
    dataset = tmp_path / "dataset.jsonl"
    dataset.write_text("\n".join(json.dumps(r) for r in records) + "\n",
                       encoding="utf-8")
    replay = tmp_path / "replay.json"
    replay.write_text(json.dumps({"rules": rules}), encoding="utf-8")
    return dataset, replay


def run_config(tmp_path, dataset, replay, task="correctness", suffix="out", **kw):
    return RunConfig(
        task=task,
        dataset_path=str(dataset),
        replay_file=str(replay),
        output_dir=str(tmp_path / suffix),
        model_id="replay-model",
        **kw,
    )


class TestRun:
    def test_four_sample_aggregates(self, tmp_path, correctness_run_setup):
        dataset, replay = correctness_run_setup
        report = run(run_config(tmp_path, dataset, replay))
        assert report.aggregates["spearman"] == pytest.approx(1.0)
        assert report.aggregates["kendall"] == pytest.approx(1.0)
        assert report.aggregates["f1_auc_mean"] == pytest.approx((2 / 3 + 10) / 11)
        assert report.parse_failure_rate == 0.0

    def test_outputs_written_and_consistent(self, tmp_path, correctness_run_setup):
        dataset, replay = correctness_run_setup
        config = run_config(tmp_path, dataset, replay)
        report = run(config)
        out = Path(config.output_dir)
        assert (out / "per_sample.jsonl").is_file()
        assert (out / "report.json").is_file()
        assert (out / "histogram.csv").is_file()
        recomputed = recompute_report(out / "per_sample.jsonl", "mean")
        for key in ("spearman", "kendall", "f1_auc_mean", "f1_auc_paper"):
            assert recomputed["aggregates"][key] == report.aggregates[key]
        assert recomputed["parse_failure_rate"] == report.parse_failure_rate

    def test_histogram_partitions_by_label(self, tmp_path, correctness_run_setup):
        dataset, replay = correctness_run_setup
        report = run(run_config(tmp_path, dataset, replay))
        assert sum(report.histogram["label_0"]) == 2
        assert sum(report.histogram["label_1"]) == 2

    def test_deterministic_outputs(self, tmp_path, correctness_run_setup):
        dataset, replay = correctness_run_setup
        first = run_config(tmp_path, dataset, replay, suffix="run1")
        second = run_config(tmp_path, dataset, replay, suffix="run2")
        run(first)
        run(second)
        for name in ("per_sample.jsonl", "histogram.csv"):
            a = (Path(first.output_dir) / name).read_bytes()
            b = (Path(second.output_dir) / name).read_bytes()
            assert a == b

    def test_faithfulness_run(self, tmp_path):
        dataset = tmp_path / "faith.jsonl"
        dataset.write_text(
            "\n".join(json.dumps(r) for r in faithfulness_dataset_records()) + "\n",
            encoding="utf-8")
        replay = tmp_path / "replay.json"
        replay.write_text(json.dumps({"rules": faithfulness_replay_rules()}),
                          encoding="utf-8")
        config = run_config(tmp_path, dataset, replay, task="faithfulness")
        report = run(config)
        # one strict win, one tie
        assert report.aggregates["worst"] == 0.5
        assert report.aggregates["middle"] == 0.75
        assert report.aggregates["best"] == 1.0
        assert report.parse_failure_rate == 0.0
        recomputed = recompute_report(Path(config.output_dir) / "per_sample.jsonl")
        assert recomputed["aggregates"]["middle"] == 0.75

    def test_empty_dataset_raises(self, tmp_path):
        dataset = tmp_path / "empty.jsonl"
        dataset.write_text("", encoding="utf-8")
        replay = tmp_path / "replay.json"
        replay.write_text(json.dumps({"rules": []}), encoding="utf-8")
        with pytest.raises(DatasetError):
            run(run_config(tmp_path, dataset, replay))

    def test_missing_dataset_raises(self, tmp_path):
        replay = tmp_path / "replay.json"
        replay.write_text(json.dumps({"rules": []}), encoding="utf-8")
        with pytest.raises(FileNotFound):
            run(run_config(tmp_path, tmp_path / "nope.jsonl", replay))

    def test_parse_failures_do_not_abort(self, tmp_path, correctness_run_setup):
        dataset, replay = correctness_run_setup
        # drop the judge rule for one sample so its parse fails
        spec = json.loads(replay.read_text(encoding="utf-8"))
        for rule in spec["rules"]:
            if "Fact delta from truth." in rule["contains"] and "Statements" in rule["contains"]:
                rule["replies"] = ["no verdicts here"]
        replay.write_text(json.dumps(spec), encoding="utf-8")
        report = run(run_config(tmp_path, dataset, replay))
        assert report.parse_failure_rate == 0.25
        nulls = [r for r in report.per_sample if r["score"] is None]
        assert len(nulls) == 1


class TestRunBaselines:
    def test_correctness_containment(self, tmp_path):
        dataset = tmp_path / "d.jsonl"
        records = [
            {"id": "a", "question": "q", "answer": "Harrison Ford the actor",
             "ground_truth": "Harrison Ford", "human_label": 1},
            {"id": "b", "question": "q", "answer": "Spain",
             "ground_truth": "Germany", "human_label": 0},
        ]
        dataset.write_text("\n".join(json.dumps(r) for r in records) + "\n",
                           encoding="utf-8")
        config = RunConfig(task="correctness", dataset_path=str(dataset),
                           output_dir=str(tmp_path / "out"), replay_file=None)
        report = run_baselines(config)
        scores = [r["score"] for r in report.per_sample]
        assert scores == [1.0, 0.0]
        assert report.aggregates["spearman"] == pytest.approx(1.0)

    def test_faithfulness_tie(self, tmp_path):
        dataset = tmp_path / "d.jsonl"
        records = [{
            "id": "a", "question": "q",
            "context": "the cat sat on the mat near the dog",
            "good_answer": "the cat sat", "poor_answer": "the dog sat",
        }]
        dataset.write_text(json.dumps(records[0]) + "\n", encoding="utf-8")
        config = RunConfig(task="faithfulness", dataset_path=str(dataset),
                           output_dir=str(tmp_path / "out"))
        report = run_baselines(config)
        # both answers fully covered by the context: k-precision tie
        assert report.aggregates["worst"] == 0.0
        assert report.aggregates["middle"] == 0.5
        assert report.aggregates["best"] == 1.0
