"""Render system and user messages for every experimental condition.

Templates live in ``templates/<case>/<section>.txt`` and use ``{name}``
placeholders.  Literal braces (the JSON schema block) are left untouched
because only ``{identifier}`` tokens are substituted.

Placeholders per template:

* ``risk|social/system*.txt``: ``role``
* ``risk|social/question*.txt``: ``return_a``, ``return_b`` and, for the
  choice variants, ``options``
* ``<scenario>/options.txt``: ``options``
* ``games/system.txt``: ``role``
* ``personas/*.txt``: tab-separated ``kind<TAB>sentence``; the occupation
  line takes ``article`` and ``occupation``
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .budget_tasks import DOMAINS, N_ROUNDS, BudgetRound
from .games import SCENARIOS, scenario_spec

PERSONA_KINDS = (
    "none", "male", "female", "young", "elderly",
    "elementary", "college", "asian", "african_american", "occupation",
)
STAKES = (1, 10, 100, 1000)
DIALOGUES = ("multi_turn", "single_turn")
ANSWER_TYPES = ("open", "choice")
CASES = DOMAINS + SCENARIOS

CORE_HEADER = "You core tasks include:"
SUPPLEMENTAL_HEADER = "Your supplemental tasks include:"

_PLACEHOLDER = re.compile(r"\{([A-Za-z_]\w*)\}")


@dataclass(frozen=True)
class PersonaSpec:
    kind: str = "none"
    occupation_name: str | None = None
    occupation_tasks: str | None = None

    def __post_init__(self):
        if self.kind not in PERSONA_KINDS:
            raise ValueError(f"unknown persona {self.kind!r}")
        has_occ = self.occupation_name is not None or self.occupation_tasks is not None
        if (self.kind == "occupation") != has_occ:
            raise ValueError("occupation fields are required for, and only for, occupation personas")

    @property
    def label(self) -> str:
        if self.kind == "occupation":
            return re.sub(r"\W+", "_", self.occupation_name or "").strip("_").lower()
        return self.kind


@dataclass(frozen=True)
class Condition:
    """One experimental cell: a case (budget domain or game scenario) plus
    every protocol knob that the variations touch."""

    case: str
    persona: PersonaSpec = field(default_factory=PersonaSpec)
    temperature: float | None = None
    incentive: bool = True
    stake_multiplier: int = 1
    include_example: bool = True
    dialogue: str = "multi_turn"
    answer_type: str = "open"
    variation: str = "baseline"
    name: str = "baseline"

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}")
        if self.stake_multiplier not in STAKES:
            raise ValueError(f"stake_multiplier must be one of {STAKES}")
        if self.dialogue not in DIALOGUES:
            raise ValueError(f"unknown dialogue type {self.dialogue!r}")
        if self.answer_type not in ANSWER_TYPES:
            raise ValueError(f"unknown answer type {self.answer_type!r}")
        if self.is_game and self.dialogue == "single_turn":
            raise ValueError("single-turn dialogue is not available for games")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be nonnegative")
        if not re.fullmatch(r"[\w.\-]+", self.name):
            raise ValueError(f"condition name {self.name!r} must be filename-safe")

    @property
    def is_game(self) -> bool:
        return self.case in SCENARIOS

    @property
    def slug(self) -> str:
        return f"{self.case}__{self.name}"

    def with_case(self, case: str) -> "Condition":
        return replace(self, case=case)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Condition":
        d = dict(d)
        persona = d.pop("persona", None) or {}
        if isinstance(persona, str):
            persona = {"kind": persona}
        return cls(persona=PersonaSpec(**persona), **d)


@dataclass(frozen=True)
class RenderedPrompt:
    system: str
    user_turns: list[str]


def auto_name(**changes) -> str:
    """Name a condition after the fields that differ from the baseline."""
    parts = []
    for key, val in sorted(changes.items()):
        if key == "persona":
            val = val.label if isinstance(val, PersonaSpec) else val
        if isinstance(val, bool):
            val = "on" if val else "off"
        parts.append(f"{key}-{val}")
    return "_".join(parts) or "baseline"


@lru_cache(maxsize=None)
def load_template(case: str, section: str) -> str:
    path = resources.files("llmexp") / "templates" / case / f"{section}.txt"
    return path.read_text(encoding="utf-8")


def fill(template: str, **values) -> str:
    def sub(m):
        key = m.group(1)
        if key not in values:
            raise KeyError(f"missing value for placeholder {{{key}}}")
        return str(values[key])

    return _PLACEHOLDER.sub(sub, template)


@lru_cache(maxsize=None)
def _persona_table(family: str) -> dict[str, str]:
    rows = load_template("personas", family).splitlines()
    return dict(line.split("\t", 1) for line in rows if line.strip())


def mathematician_tasks() -> str:
    """Truncated task description shipped as an occupation fixture."""
    return load_template("personas", "mathematician").rstrip("\n")


def format_number(x: float) -> str:
    """Shortest decimal with at most two fractional digits: 0.8, 8, 0.25."""
    s = f"{round(float(x), 2):.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _role(persona: PersonaSpec, family: str) -> str:
    sentence = _persona_table(family)[persona.kind]
    if persona.kind != "occupation":
        return sentence
    tasks = (persona.occupation_tasks or "").strip()
    if not tasks or CORE_HEADER not in tasks or SUPPLEMENTAL_HEADER not in tasks:
        raise ValueError(
            f"occupation persona needs a task description with {CORE_HEADER!r} and {SUPPLEMENTAL_HEADER!r}"
        )
    name = persona.occupation_name.strip()
    article = "an" if name[:1].lower() in "aeiou" else "a"
    return fill(sentence, article=article, occupation=name) + "\n\n" + tasks


def render_system(condition: Condition) -> str:
    if condition.is_game:
        return fill(load_template("games", "system"), role=_role(condition.persona, "games"))
    template = load_template(condition.case, "system" if condition.incentive else "system_no_incentive")
    rest = template.split("{role} ", 1)[1]
    # occupation task lists sit in their own paragraph after the role sentence
    sep = "\n\n" if condition.persona.kind == "occupation" else " "
    return _role(condition.persona, "budget") + sep + rest


def budget_options_text() -> str:
    return ", ".join(f"({m},{100 - m})" for m in range(0, 101, 5))


def game_options_text(scenario_id: str) -> str:
    return ", ".join(f"({format_number(v)})" for v in scenario_spec(scenario_id).options())


def _question(condition: Condition, round: BudgetRound) -> str:
    k = condition.stake_multiplier
    values = dict(return_a=format_number(round.return_a * k), return_b=format_number(round.return_b * k))
    if condition.answer_type == "choice":
        return fill(load_template(condition.case, "question_choice"), options=budget_options_text(), **values)
    return fill(load_template(condition.case, "question"), **values)


def _preamble(condition: Condition) -> list[str]:
    case = condition.case
    parts = [load_template(case, "intro_choice" if condition.answer_type == "choice" else "intro")]
    if condition.include_example:
        parts.append(load_template(case, "example"))
    parts.append(load_template(case, "schema"))
    return parts


def _require_budget(condition: Condition) -> None:
    if condition.is_game:
        raise ValueError(f"{condition.case!r} is not a budgetary case")


def render_round_user(condition: Condition, round: BudgetRound, is_first: bool) -> str:
    """User message for one round of a multi-turn budgetary dialogue."""
    _require_budget(condition)
    reminder = load_template(condition.case, "reminder_choice" if condition.answer_type == "choice" else "reminder")
    parts = _preamble(condition) if is_first else []
    parts += [_question(condition, round), reminder]
    return "\n\n".join(parts)


def render_single_turn(condition: Condition, rounds: Sequence[BudgetRound]) -> str:
    """All rounds as one numbered user message."""
    _require_budget(condition)
    if len(rounds) != N_ROUNDS:
        raise ValueError(f"single-turn prompts hold exactly {N_ROUNDS} rounds, got {len(rounds)}")
    numbered = [f"{i}. {_question(condition, r)}" for i, r in enumerate(rounds, start=1)]
    closing = load_template(condition.case, "closing_single_turn")
    return "\n\n".join(_preamble(condition) + numbered + [closing])


def render_budget(condition: Condition, rounds: Sequence[BudgetRound]) -> RenderedPrompt:
    system = render_system(condition)
    if condition.dialogue == "single_turn":
        return RenderedPrompt(system, [render_single_turn(condition, rounds)])
    turns = [render_round_user(condition, r, i == 0) for i, r in enumerate(rounds)]
    return RenderedPrompt(system, turns)


def render_game(condition: Condition, scenario: str | None = None) -> RenderedPrompt:
    scenario = scenario or condition.case
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    if condition.dialogue == "single_turn":
        raise ValueError("single-turn dialogue is not available for games")
    parts = [load_template(scenario, "intro")]
    if condition.include_example:
        parts.append(load_template(scenario, "example"))
    question = load_template(scenario, "question")
    if condition.answer_type == "choice":
        options = fill(load_template(scenario, "options"), options=game_options_text(scenario))
        question = f"{options} {question}"
    parts.append(question)
    body = "\n\n".join(parts)
    return RenderedPrompt(render_system(condition), [load_template("games", "greeting"), body])


def render(condition: Condition, rounds: Sequence[BudgetRound] | None = None) -> RenderedPrompt:
    if condition.is_game:
        return render_game(condition)
    if rounds is None:
        raise ValueError("budgetary prompts need rounds")
    return render_budget(condition, rounds)

