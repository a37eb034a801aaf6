"""Domain types shared by every stage of the pipeline.

All types are immutable values with canonical JSON record forms, so they
can be shared freely between concurrent workers and round-tripped through
the dataset and report files.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Union


class CorrectnessLabel(str, Enum):
    TP = "TP"
    FP = "FP"
    FN = "FN"


class FaithfulnessLabel(str, Enum):
    PASSED = "PASSED"
    FAILED = "FAILED"


@dataclass(frozen=True)
class Statement:
    """One atomic declarative fact extracted from an answer or ground truth."""

    index: int
    text: str

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"statement index must be >= 0, got {self.index}")
        if not self.text.strip():
            raise ValueError("statement text is empty after trimming")

    def to_record(self) -> dict[str, Any]:
        return {"index": self.index, "text": self.text}

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "Statement":
        return cls(index=record["index"], text=record["text"])


@dataclass(frozen=True)
class CorrectnessCounts:
    """Tally of TP/FP/FN labels over the judged statements of one sample."""

    tp: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn"):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")

    def to_record(self) -> dict[str, Any]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn}

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "CorrectnessCounts":
        return cls(tp=record["tp"], fp=record["fp"], fn=record["fn"])


@dataclass(frozen=True)
class FaithfulnessCounts:
    """Tally of PASSED/FAILED labels over the judged statements of one answer."""

    passed: int
    failed: int

    def __post_init__(self) -> None:
        for name in ("passed", "failed"):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")

    def to_record(self) -> dict[str, Any]:
        return {"passed": self.passed, "failed": self.failed}

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "FaithfulnessCounts":
        return cls(passed=record["passed"], failed=record["failed"])


VerdictCounts = Union[CorrectnessCounts, FaithfulnessCounts]


@dataclass(frozen=True)
class CorrectnessSample:
    """One correctness dataset row: question, generated answer, ground truth,
    and the binary human judgment (1 correct, 0 incorrect)."""

    id: str
    question: str
    answer: str
    ground_truth: str
    human_label: int

    def __post_init__(self) -> None:
        if self.human_label not in (0, 1):
            raise ValueError(f"human_label must be 0 or 1, got {self.human_label}")
        for name in ("question", "answer", "ground_truth"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")

    def to_record(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "question": self.question,
            "answer": self.answer,
            "ground_truth": self.ground_truth,
            "human_label": self.human_label,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "CorrectnessSample":
        return cls(
            id=record["id"],
            question=record["question"],
            answer=record["answer"],
            ground_truth=record["ground_truth"],
            human_label=record["human_label"],
        )


@dataclass(frozen=True)
class FaithfulnessSample:
    """One faithfulness dataset row: question, retrieved context, and a
    faithful/unfaithful answer pair."""

    id: str
    question: str
    context: str
    good_answer: str
    poor_answer: str

    def __post_init__(self) -> None:
        for name in ("question", "context", "good_answer", "poor_answer"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")

    def to_record(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "question": self.question,
            "context": self.context,
            "good_answer": self.good_answer,
            "poor_answer": self.poor_answer,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "FaithfulnessSample":
        return cls(
            id=record["id"],
            question=record["question"],
            context=record["context"],
            good_answer=record["good_answer"],
            poor_answer=record["poor_answer"],
        )


@dataclass(frozen=True)
class SampleScore:
    """Pipeline score for one sample.

    ``score`` is None when the judge output was unparseable; such samples
    are excluded from aggregates but counted in the parse-failure rate.
    ``raw_judge_output`` is retained for audit.
    """

    sample_id: str
    score: float | None
    counts: VerdictCounts | None
    raw_judge_output: str = ""

    def __post_init__(self) -> None:
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "score": self.score,
            "counts": self.counts.to_record() if self.counts is not None else None,
            "raw_judge_output": self.raw_judge_output,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "SampleScore":
        counts_rec = record.get("counts")
        counts: VerdictCounts | None = None
        if counts_rec is not None:
            if "tp" in counts_rec:
                counts = CorrectnessCounts.from_record(counts_rec)
            else:
                counts = FaithfulnessCounts.from_record(counts_rec)
        return cls(
            sample_id=record["sample_id"],
            score=record["score"],
            counts=counts,
            raw_judge_output=record.get("raw_judge_output", ""),
        )
