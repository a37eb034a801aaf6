"""Statement-level correctness and faithfulness scoring for RAG answers."""

from .types import (
    CorrectnessCounts,
    CorrectnessLabel,
    CorrectnessSample,
    FaithfulnessCounts,
    FaithfulnessLabel,
    FaithfulnessSample,
    SampleScore,
    Statement,
)
from .verdicts import ParsingStrategy

__all__ = [
    "CorrectnessCounts",
    "CorrectnessLabel",
    "CorrectnessSample",
    "FaithfulnessCounts",
    "FaithfulnessLabel",
    "FaithfulnessSample",
    "ParsingStrategy",
    "SampleScore",
    "Statement",
]

__version__ = "0.1.0"
