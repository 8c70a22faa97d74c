"""The five one-shot decision scenarios of the behavioral-game study.

Only first-round decisions are elicited, so the payoff functions here are
used for validating answers, reporting, and building scripted agents; the
other player is never simulated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCENARIOS = ("dictator", "ultimatum_proposer", "ultimatum_responder", "public_goods", "bomb_risk")
N_OPTIONS = 21
GRID_TOL = 1e-9


@dataclass(frozen=True)
class GameScenario:
    id: str
    feasible_min: float
    feasible_max: float
    option_step: float
    unit_label: str

    @property
    def interval_length(self) -> float:
        return self.feasible_max - self.feasible_min

    def options(self) -> np.ndarray:
        return self.feasible_min + self.option_step * np.arange(N_OPTIONS)


@dataclass(frozen=True)
class GameDecision:
    scenario: str
    value: float


_SPECS = {
    "dictator": GameScenario("dictator", 0, 100, 5, "$"),
    "ultimatum_proposer": GameScenario("ultimatum_proposer", 0, 100, 5, "$"),
    "ultimatum_responder": GameScenario("ultimatum_responder", 0, 100, 5, "$"),
    "public_goods": GameScenario("public_goods", 0, 20, 1, "$"),
    "bomb_risk": GameScenario("bomb_risk", 0, 100, 5, "boxes"),
}


def scenario_spec(id: str) -> GameScenario:
    try:
        return _SPECS[id]
    except KeyError:
        raise ValueError(f"unknown scenario {id!r}") from None


def _in_range(x: float, lo: float, hi: float, what: str) -> None:
    if not lo <= x <= hi:
        raise ValueError(f"{what}={x} outside [{lo}, {hi}]")


def payoff_dictator(given: float) -> tuple[float, float]:
    """(dictator, recipient) dollars when ``given`` of $100 is passed on."""
    _in_range(given, 0, 100, "given")
    return 100 - given, given


def payoff_ultimatum(offer: float, min_accept: float) -> tuple[float, float]:
    """(proposer, responder) dollars; the responder accepts any offer >= min_accept."""
    _in_range(offer, 0, 100, "offer")
    _in_range(min_accept, 0, 100, "min_accept")
    if offer >= min_accept:
        return 100 - offer, offer
    return 0.0, 0.0


def payoff_public_goods(own_contribution: float, total_contributions: float) -> float:
    """Endowment kept plus half the group total (four players, $20 each)."""
    _in_range(own_contribution, 0, 20, "own_contribution")
    if not own_contribution <= total_contributions <= own_contribution + 60:
        raise ValueError("total contributions inconsistent with own contribution and 3 others")
    return (20 - own_contribution) + 0.5 * total_contributions


def payoff_bomb(boxes: int, bomb_in_opened: bool) -> float:
    _in_range(boxes, 0, 100, "boxes")
    return 0.0 if bomb_in_opened else float(boxes)


def expected_payoff_bomb(boxes: float) -> float:
    """Expected dollars when the bomb sits uniformly in one of 100 boxes."""
    _in_range(boxes, 0, 100, "boxes")
    return boxes * (1 - boxes / 100)


def on_grid(scenario: GameScenario, value: float) -> bool:
    k = (value - scenario.feasible_min) / scenario.option_step
    return abs(k - round(k)) <= GRID_TOL and 0 <= round(k) < N_OPTIONS


def validate_decision(scenario: GameScenario | str, value: float, answer_type: str = "open") -> str | None:
    """None when valid, otherwise the reason the value is invalid."""
    if isinstance(scenario, str):
        scenario = scenario_spec(scenario)
    if not np.isfinite(value):
        return "not a finite number"
    if value < scenario.feasible_min or value > scenario.feasible_max:
        return f"outside the range [{scenario.feasible_min:g}, {scenario.feasible_max:g}]"
    if answer_type == "choice" and not on_grid(scenario, value):
        return f"not one of the {N_OPTIONS} options"
    return None
