"""Decision extraction from raw completions.

Every completion maps to exactly one status:

``valid``       a decision was extracted and passed validation
``refusal``     no decision and the text declines the task
``format``      no usable JSON block / ``[[...]]`` marker
``constraint``  a decision was found but breaks the task rules
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .budget_tasks import ENDOWMENT, SUM_TOLERANCE, Allocation
from .games import GameDecision, GameScenario, scenario_spec, validate_decision

STATUSES = ("valid", "refusal", "format", "constraint")

FIELD_NAMES = {
    "risk": ("Points for investing Asset A", "Points for investing Asset B"),
    "social": ("Points allocated to yourself", "Points allocated to the other one"),
}

_FENCE = re.compile(r"```[ \t]*json[ \t]*\r?\n?(.*?)```", re.IGNORECASE | re.DOTALL)
_BRACKET = re.compile(r"\[\[(.*?)\]\]", re.DOTALL)
_NUMBER = re.compile(r"^\$?\s*(-?\d+(?:,\d{3})*(?:\.\d+)?)\s*(?:dollars?|boxes?|points?)?$", re.IGNORECASE)

_REFUSAL_PATTERNS = [
    r"\bas an ai\b",
    r"\bas a language model\b",
    r"\bcannot participate\b",
    r"\bcan(?:'|no)t participate\b",
    r"\bnot capable of making decisions\b",
    r"\b(?:i am|i'm) (?:not able|unable) to\b",
    r"\bi (?:cannot|can't|can not) (?:make|provide|engage|help|choose|decide|answer)\b",
    r"\bi do(?:n't| not) have (?:personal )?(?:preferences|opinions|feelings|desires)\b",
    r"\bi (?:must|have to) decline\b",
    r"\bi won't be able to\b",
]
_REFUSAL = re.compile("|".join(_REFUSAL_PATTERNS), re.IGNORECASE)


@dataclass(frozen=True)
class ParseOutcome:
    status: str
    decision: Allocation | GameDecision | None = None
    detail: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.status == "valid") != (self.decision is not None):
            raise ValueError("a decision is present exactly when the status is valid")

    @property
    def valid(self) -> bool:
        return self.status == "valid"


def _fenced_blocks(text: str) -> list[str]:
    return [m.group(1) for m in _FENCE.finditer(text)]


def _parse_number(raw: str) -> float | None:
    m = _NUMBER.match(raw.strip())
    if not m:
        return None
    return float(m.group(1).replace(",", ""))


def _has_decision(text: str) -> bool:
    for block in _fenced_blocks(text):
        try:
            if isinstance(json.loads(block), dict):
                return True
        except (ValueError, RecursionError):
            pass
    return any(_parse_number(m.group(1)) is not None for m in _BRACKET.finditer(text))


def classify_refusal(text: str) -> bool:
    """True for a refusal that carries no extractable decision."""
    if not text or not text.strip():
        return False
    if _has_decision(text):
        return False
    return _REFUSAL.search(text) is not None


def _no_decision(text: str, what: str) -> ParseOutcome:
    if classify_refusal(text):
        return ParseOutcome("refusal", detail="declined to answer")
    return ParseOutcome("format", detail=f"no {what} found")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _allocation_from_block(block: str, field_names: Sequence[str], grid_step: float | None) -> ParseOutcome:
    try:
        obj = json.loads(block)
    except (ValueError, RecursionError) as exc:
        return ParseOutcome("format", detail=f"invalid JSON: {type(exc).__name__}")
    if not isinstance(obj, dict):
        return ParseOutcome("format", detail="JSON content is not an object")
    missing = [f for f in field_names if f not in obj]
    if missing:
        return ParseOutcome("format", detail=f"missing field(s): {', '.join(missing)}")
    a, b = (obj[f] for f in field_names)
    if not (_is_number(a) and _is_number(b)) or not (math.isfinite(a) and math.isfinite(b)):
        return ParseOutcome("format", detail="fields are not finite numbers")
    a, b = float(a), float(b)
    if a < 0 or b < 0 or a > ENDOWMENT or b > ENDOWMENT:
        return ParseOutcome("constraint", detail=f"points outside [0, 100]: ({a:g}, {b:g})")
    if abs(a + b - ENDOWMENT) > SUM_TOLERANCE:
        return ParseOutcome("constraint", detail=f"points do not sum to 100: {a:g} + {b:g} = {a + b:g}")
    if grid_step is not None:
        k = a / grid_step
        if abs(k - round(k)) > 1e-9:
            return ParseOutcome("constraint", detail=f"({a:g}, {b:g}) is not one of the 21 options")
    return ParseOutcome("valid", Allocation(a, b))


def extract_json_allocation(
    text: str,
    field_names: Sequence[str],
    expected_count: int = 1,
    grid_step: float | None = None,
) -> list[ParseOutcome]:
    """Parse fenced JSON allocations.

    Returns ``expected_count`` outcomes, matched to blocks by position.  A
    wrong number of blocks marks every slot as a format failure.  Pass
    ``grid_step=5`` to enforce the multiple-choice options.
    """
    if expected_count < 1:
        raise ValueError("expected_count must be positive")
    blocks = _fenced_blocks(text or "")
    if not blocks:
        return [_no_decision(text or "", "```json block")] * expected_count
    if len(blocks) != expected_count:
        bad = ParseOutcome("format", detail=f"expected {expected_count} JSON block(s), found {len(blocks)}")
        if expected_count > 1:
            return [bad] * expected_count
        # one answer requested but several given: the first block wins
        first = _allocation_from_block(blocks[0], field_names, grid_step)
        if first.valid:
            return [ParseOutcome("valid", first.decision, f"{len(blocks)} blocks, first used")]
        return [first]
    return [_allocation_from_block(b, field_names, grid_step) for b in blocks]


def extract_bracket_value(text: str, scenario: GameScenario | str, answer_type: str = "open") -> ParseOutcome:
    """Read the first ``[[value]]`` marker and check it against the scenario."""
    if isinstance(scenario, str):
        scenario = scenario_spec(scenario)
    matches = list(_BRACKET.finditer(text or ""))
    if not matches:
        return _no_decision(text or "", "[[]] marker")
    extra = f"; {len(matches) - 1} further marker(s) ignored" if len(matches) > 1 else ""
    raw = matches[0].group(1)
    value = _parse_number(raw)
    if value is None:
        return ParseOutcome("format", detail=f"[[{raw}]] is not a number{extra}")
    reason = validate_decision(scenario, value, answer_type)
    if reason:
        return ParseOutcome("constraint", detail=f"{value:g} is {reason}{extra}")
    return ParseOutcome("valid", GameDecision(scenario.id, value), detail=extra.lstrip("; "))


def parse_reply(text: str, case: str, answer_type: str = "open", expected_count: int = 1) -> list[ParseOutcome]:
    """Dispatch on the case: JSON allocations for budget domains, ``[[ ]]`` for games."""
    if case in FIELD_NAMES:
        step = 5.0 if answer_type == "choice" else None
        return extract_json_allocation(text, FIELD_NAMES[case], expected_count, step)
    return [extract_bracket_value(text, case, answer_type)]


@dataclass(frozen=True)
class FixtureItem:
    file: str
    text: str
    expected_status: str
    expected_value: float | None
    case: str
    answer_type: str


def load_fixture_corpus(directory: str | Path) -> list[FixtureItem]:
    """Read ``labels.csv`` (file, expected_status, expected_value[, case, answer_type])
    and the completion texts it names."""
    directory = Path(directory)
    items = []
    with open(directory / "labels.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            value = row.get("expected_value") or ""
            items.append(
                FixtureItem(
                    file=row["file"],
                    text=(directory / row["file"]).read_text(encoding="utf-8"),
                    expected_status=row["expected_status"],
                    expected_value=float(value) if value.strip() else None,
                    case=row.get("case") or "risk",
                    answer_type=row.get("answer_type") or "open",
                )
            )
    return items


def decision_value(outcome: ParseOutcome) -> float | None:
    """Scalar summary used in labels: points on account A, or the game value."""
    d = outcome.decision
    if isinstance(d, Allocation):
        return d.points_a
    if isinstance(d, GameDecision):
        return d.value
    return None
