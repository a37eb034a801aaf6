from __future__ import annotations

import json
from pathlib import Path

import pytest

from ragscore.backend import BackendClient, ReplayRule, ReplayTransport

# Few-shot exemplar classification texts, as they appear in the shipped
# judge prompts. Used as known-count parsing fixtures.

SUN_CLASSIFICATION = """\
- The primary function of the sun is to provide light to the solar system. This statement is somewhat supported by the ground truth mentioning the sun providing light and its roles, though it focuses more broadly on the sun's energy. VERDICT: TP,
- The sun is powered by nuclear fission, similar to nuclear reactors on Earth. This statement is incorrect and contradicts the ground truth which states that the sun is powered by nuclear fusion. VERDICT: FP,
- The sun is powered by nuclear fusion, where hydrogen atoms fuse to form helium. This accurate description of the sun's power source is not included in the answer. VERDICT: FN
- This fusion process in the sun's core releases a tremendous amount of energy. This process and its significance are not mentioned in the answer. VERDICT: FN
- The energy from the sun provides heat and light, which are essential for life on Earth. The answer only mentions light, omitting the essential aspects of heat and its necessity for life, which the ground truth covers. VERDICT: FN
- The sun's light plays a critical role in Earth's climate system. This broader impact of the sun's light on Earth's climate system is not addressed in the answer. VERDICT: FN
- Sunlight helps to drive the weather and ocean currents. The effect of sunlight on weather patterns and ocean currents is omitted in the answer. VERDICT: FN"""

BOILING_CLASSIFICATION = """\
- The boiling point of water is 100 degrees Celsius at sea level. This statement is directly supported by the ground truth which specifies the boiling point of water as 100 degrees Celsius at sea level. VERDICT: TP,
- The boiling point of water can change with altitude. This additional information about how the boiling point of water can vary with altitude is not mentioned in the answer. VERDICT: FN
- The boiling point of water is 100 degrees Celsius (212 degrees Fahrenheit) at sea level. No need to label it because it is a ground truth statement that supports a statement from the answer."""

JOHN_ANSWER = """\
- John is majoring in Biology. John's major is explicitly mentioned as Computer Science. There is no information suggesting he is majoring in Biology. VERDICT: FAILED
- John is taking a course on Artificial Intelligence.The context mentions the courses John is currently enrolled in, and Artificial Intelligence is not mentioned. Therefore, it cannot be deduced that John is taking a course on AI. VERDICT: FAILED
- John is a dedicated student. The context states that he spends a significant amount of time studying and completing assignments. Additionally, it mentions that he often stays late in the library to work on his projects, which implies dedication. VERDICT: PASSED
- John has a part-time job. There is no information given in the context about John having a part-time job. VERDICT: FAILED"""


# Einstein birthplace scenario: three answer statements, three ground-truth
# statements, judge finds one overlap (the year).

EINSTEIN_ANSWER = "Albert Einstein was born in Barcelona Spain, 1879"
EINSTEIN_TRUTH = "Albert Einstein was born in Ulm, Germany in 1879"
EINSTEIN_QUESTION = "Where was Albert Einstein born?"

EINSTEIN_ANSWER_STATEMENTS = """\
- Albert Einstein was born in Spain.
- Albert Einstein was born in Barcelona.
- Albert Einstein was born in 1879."""

EINSTEIN_TRUTH_STATEMENTS = """\
- Albert Einstein was born in Ulm.
- Albert Einstein was born in Germany.
- Albert Einstein was born in 1879."""

EINSTEIN_JUDGE_OUTPUT = """\
- Albert Einstein was born in 1879. This statement is directly supported by the ground truth. VERDICT: TP
- Albert Einstein was born in Spain. The ground truth places the birth in Germany. VERDICT: FP
- Albert Einstein was born in Barcelona. The ground truth places the birth in Ulm. VERDICT: FP
- Albert Einstein was born in Ulm. The answer does not mention Ulm. VERDICT: FN
- Albert Einstein was born in Germany. The answer does not mention Germany. VERDICT: FN"""


def make_client(rules: list[ReplayRule], **kwargs) -> BackendClient:
    return BackendClient(ReplayTransport(rules=rules), **kwargs)


def einstein_replay_rules() -> list[dict]:
    """Replay spec (JSON form) reproducing the Einstein correctness sample."""
    return [
        {"contains": f"Answer: {EINSTEIN_ANSWER}",
         "replies": [EINSTEIN_ANSWER_STATEMENTS]},
        {"contains": f"Answer: {EINSTEIN_TRUTH}",
         "replies": [EINSTEIN_TRUTH_STATEMENTS]},
        {"contains": "Statements ground_truth: - Albert Einstein was born in Ulm.",
         "replies": [EINSTEIN_JUDGE_OUTPUT]},
    ]


@pytest.fixture
def einstein_replay_file(tmp_path: Path) -> Path:
    path = tmp_path / "replay.json"
    path.write_text(json.dumps({"rules": einstein_replay_rules()}), encoding="utf-8")
    return path


@pytest.fixture
def einstein_dataset_file(tmp_path: Path) -> Path:
    path = tmp_path / "correctness.jsonl"
    record = {
        "id": "einstein-1",
        "question": EINSTEIN_QUESTION,
        "answer": EINSTEIN_ANSWER,
        "ground_truth": EINSTEIN_TRUTH,
        "human_label": 0,
    }
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    return path
