"""Loading and validating the line-delimited JSON evaluation datasets."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateId, FileNotFound, RecordValidationError
from .types import CorrectnessSample, FaithfulnessSample

logger = logging.getLogger(__name__)

# Published reference cardinalities; mismatches warn, never fail, since
# users may legitimately run subsets.
EXPECTED_CORRECTNESS_SAMPLES = 396
EXPECTED_FAITHFULNESS_SAMPLES = 50

_CORRECTNESS_FIELDS = ("id", "question", "answer", "ground_truth", "human_label")
_FAITHFULNESS_FIELDS = ("id", "question", "context", "good_answer", "poor_answer")


@dataclass(frozen=True)
class CorrectnessDataset:
    samples: tuple[CorrectnessSample, ...]
    source_tag: str


@dataclass(frozen=True)
class FaithfulnessDataset:
    samples: tuple[FaithfulnessSample, ...]
    source_tag: str


def _iter_records(path: Path, required_fields: tuple[str, ...]):
    if not path.is_file():
        raise FileNotFound(f"dataset file not found: {path}")
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordValidationError(
                    f"{path}:{line_number}: invalid JSON ({exc})"
                ) from exc
            missing = [f for f in required_fields if f not in record]
            if missing:
                raise RecordValidationError(
                    f"{path}:{line_number}: missing fields {missing}"
                )
            yield line_number, record


def _check_unique_ids(seen: set[str], sample_id: str, path: Path, line_number: int):
    if sample_id in seen:
        raise DuplicateId(f"{path}:{line_number}: duplicate id {sample_id!r}")
    seen.add(sample_id)


def load_correctness(path: str | Path, source_tag: str = "") -> CorrectnessDataset:
    path = Path(path)
    samples: list[CorrectnessSample] = []
    seen: set[str] = set()
    for line_number, record in _iter_records(path, _CORRECTNESS_FIELDS):
        try:
            sample = CorrectnessSample.from_record(record)
        except (ValueError, TypeError) as exc:
            raise RecordValidationError(f"{path}:{line_number}: {exc}") from exc
        _check_unique_ids(seen, sample.id, path, line_number)
        samples.append(sample)
    if len(samples) != EXPECTED_CORRECTNESS_SAMPLES:
        logger.warning(
            "correctness dataset %s has %d samples (reference set has %d)",
            path, len(samples), EXPECTED_CORRECTNESS_SAMPLES,
        )
    return CorrectnessDataset(samples=tuple(samples), source_tag=source_tag or str(path))


def load_faithfulness(path: str | Path, source_tag: str = "") -> FaithfulnessDataset:
    path = Path(path)
    samples: list[FaithfulnessSample] = []
    seen: set[str] = set()
    for line_number, record in _iter_records(path, _FAITHFULNESS_FIELDS):
        try:
            sample = FaithfulnessSample.from_record(record)
        except (ValueError, TypeError) as exc:
            raise RecordValidationError(f"{path}:{line_number}: {exc}") from exc
        _check_unique_ids(seen, sample.id, path, line_number)
        samples.append(sample)
    if len(samples) != EXPECTED_FAITHFULNESS_SAMPLES:
        logger.warning(
            "faithfulness dataset %s has %d samples (reference set has %d)",
            path, len(samples), EXPECTED_FAITHFULNESS_SAMPLES,
        )
    return FaithfulnessDataset(samples=tuple(samples), source_tag=source_tag or str(path))
