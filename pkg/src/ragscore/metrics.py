"""Score math: count-based scores, the threshold-sweep F1 area, rank
correlations, the tie-aware pairwise score system, and the deterministic
token-overlap baselines."""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DegenerateInput, EmptyInput, LengthMismatch, UndefinedScore
from .types import CorrectnessCounts, FaithfulnessCounts

THRESHOLDS = tuple(i / 10 for i in range(11))

Number = float | int | Fraction


def recall(counts: CorrectnessCounts) -> float:
    """tp / (tp + fn). Ignores false positives (verbose information)."""
    denominator = counts.tp + counts.fn
    if denominator == 0:
        raise UndefinedScore("recall undefined: tp + fn = 0")
    return counts.tp / denominator


def f1(counts: CorrectnessCounts) -> float:
    """tp / (tp + 0.5 * (fp + fn)). Penalises verbose information."""
    denominator = counts.tp + 0.5 * (counts.fp + counts.fn)
    if denominator == 0:
        raise UndefinedScore("f1 undefined: all counts are 0")
    return counts.tp / denominator


def precision_faithfulness(counts: FaithfulnessCounts) -> float:
    """passed / (passed + failed)."""
    denominator = counts.passed + counts.failed
    if denominator == 0:
        raise UndefinedScore("precision undefined: no judged statements")
    return counts.passed / denominator


def precision_faithfulness_exact(counts: FaithfulnessCounts) -> Fraction:
    """Exact-fraction precision, used for tie detection in pair scoring."""
    denominator = counts.passed + counts.failed
    if denominator == 0:
        raise UndefinedScore("precision undefined: no judged statements")
    return Fraction(counts.passed, denominator)


def threshold_decision(r: float, th: float) -> int:
    """1 iff the score clears the threshold (boundary inclusive)."""
    if not 0 <= r <= 1 or not 0 <= th <= 1:
        raise ValueError("score and threshold must be in [0, 1]")
    return 1 if r >= th else 0


def binary_f1(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """F1 of binary predictions against binary labels, positive class 1.

    All-negative agreement (no positives predicted, none observed) counts
    as perfect: F1 = 1. Any unmatched positive on either side with tp = 0
    gives F1 = 0.
    """
    tp = sum(1 for p, h in zip(predictions, labels) if p == 1 and h == 1)
    fp = sum(1 for p, h in zip(predictions, labels) if p == 1 and h == 0)
    fn = sum(1 for p, h in zip(predictions, labels) if p == 0 and h == 1)
    if tp == 0:
        return 1.0 if fp == 0 and fn == 0 else 0.0
    return tp / (tp + 0.5 * (fp + fn))


@dataclass(frozen=True)
class ThresholdedF1Curve:
    """F1 at each threshold 0.0, 0.1, ..., 1.0 plus its normalized area."""

    thresholds: tuple[float, ...]
    f1_values: tuple[float, ...]
    auc: float
    normalization: str


def f1_auc(
    scores: Sequence[float],
    labels: Sequence[int],
    normalization: str = "mean",
) -> ThresholdedF1Curve:
    """Sweep the 11 thresholds, binarize scores, and average the F1s.

    ``normalization`` "mean" divides the 11 summands by 11 (bounded by 1);
    "paper" divides by 10, the convention some published figures use
    (bounded by 1.1, since 11 summands are divided by 10).
    Null scores must be excluded by the caller.
    """
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} scores vs {len(labels)} labels")
    if not scores:
        raise EmptyInput("f1_auc over zero samples")
    if any(s is None or not 0 <= s <= 1 for s in scores):
        raise ValueError("scores must be defined and in [0, 1]")
    if any(h not in (0, 1) for h in labels):
        raise ValueError("labels must be binary")
    if normalization not in ("mean", "paper"):
        raise ValueError(f"unknown normalization {normalization!r}")

    f1_values = []
    for th in THRESHOLDS:
        predictions = [threshold_decision(s, th) for s in scores]
        f1_values.append(binary_f1(predictions, labels))
    total = sum(f1_values)
    auc = total / 11 if normalization == "mean" else total / 10
    return ThresholdedF1Curve(
        thresholds=THRESHOLDS,
        f1_values=tuple(f1_values),
        auc=auc,
        normalization=normalization,
    )


def _check_correlation_input(x: Sequence[float], y: Sequence[float]) -> None:
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)} values")
    if len(x) < 2:
        raise DegenerateInput("correlation needs at least 2 points")
    if len(set(x)) == 1 or len(set(y)) == 1:
        raise DegenerateInput("correlation undefined on a constant vector")


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of the average-rank vectors (ties share ranks)."""
    _check_correlation_input(x, y)
    rx = stats.rankdata(x, method="average")
    ry = stats.rankdata(y, method="average")
    return float(np.corrcoef(rx, ry)[0, 1])


def kendall(x: Sequence[float], y: Sequence[float]) -> float:
    """Kendall's tau-b (tie-corrected)."""
    _check_correlation_input(x, y)
    tau = stats.kendalltau(x, y, variant="b").statistic
    return float(tau)


def pair_score(faith_good: Number | None, faith_poor: Number | None) -> float:
    """1 / 0.5 / 0 as the good answer's faithfulness beats / ties / loses.

    Callers should pass exact fractions when tie detection matters; the
    comparison is exact either way.
    """
    if faith_good is None or faith_poor is None:
        raise UndefinedScore("pair score undefined: a side has no score")
    if faith_good > faith_poor:
        return 1.0
    if faith_good == faith_poor:
        return 0.5
    return 0.0


@dataclass(frozen=True)
class PairScoreAggregate:
    """Pairwise accuracy under three tie treatments.

    worst counts ties as losses, best counts them as wins, middle awards
    half a point; hence worst <= middle <= best, middle = (worst + best)/2,
    and best - worst is the tie fraction. Values are exact rationals so
    those identities hold exactly, not just to rounding.
    """

    worst: Fraction
    middle: Fraction
    best: Fraction
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.worst <= self.middle <= self.best:
            raise ValueError("aggregate ordering violated")


def aggregate_pair_scores(
    pairs: Sequence[tuple[Number, Number]],
) -> PairScoreAggregate:
    """Fold per-pair comparisons into the worst/middle/best aggregates."""
    if not pairs:
        raise EmptyInput("no pairs to aggregate")
    n = len(pairs)
    wins = sum(1 for good, poor in pairs if good > poor)
    ties = sum(1 for good, poor in pairs if good == poor)
    return PairScoreAggregate(
        worst=Fraction(wins, n),
        middle=Fraction(2 * wins + ties, 2 * n),
        best=Fraction(wins + ties, n),
        n=n,
    )


# --- deterministic baselines ----------------------------------------------

_PUNCTUATION_TABLE = str.maketrans("", "", string.punctuation)


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, strip punctuation characters, split on whitespace."""
    return text.lower().translate(_PUNCTUATION_TABLE).split()


def bot_recall(answer: str, ground_truth: str) -> float:
    """Fraction of ground-truth tokens covered by the answer (multiset)."""
    answer_tokens = Counter(normalize_tokens(answer))
    truth_tokens = Counter(normalize_tokens(ground_truth))
    total = sum(truth_tokens.values())
    if total == 0:
        raise UndefinedScore("ground truth has no tokens after normalization")
    matched = sum((answer_tokens & truth_tokens).values())
    return min(matched / total, 1.0)


def k_precision(answer: str, context: str) -> float:
    """Fraction of answer tokens found in the retrieved context (multiset)."""
    answer_tokens = Counter(normalize_tokens(answer))
    context_tokens = Counter(normalize_tokens(context))
    total = sum(answer_tokens.values())
    if total == 0:
        raise UndefinedScore("answer has no tokens after normalization")
    matched = sum((answer_tokens & context_tokens).values())
    return min(matched / total, 1.0)
