"""Budgetary allocation tasks for the risk and social preference domains.

Each round asks the agent to split a 100-point endowment between two
accounts A and B whose per-point dollar returns differ.  Allocations are
mapped to standard (price, quantity) observations normalised to unit
expenditure so that revealed-preference indices can be computed directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

DOMAINS = ("risk", "social")
N_ROUNDS = 25
ENDOWMENT = 100.0
SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class BudgetRound:
    domain: str
    return_a: float
    return_b: float
    round_index: int
    endowment: float = ENDOWMENT

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if not (self.return_a > 0 and self.return_b > 0):
            raise ValueError("returns must be positive")
        if self.endowment != ENDOWMENT:
            raise ValueError("endowment is fixed at 100 points")

    def to_record(self) -> dict:
        return {
            "domain": self.domain,
            "index": self.round_index,
            "return_a": self.return_a,
            "return_b": self.return_b,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "BudgetRound":
        return cls(
            domain=rec["domain"],
            return_a=float(rec["return_a"]),
            return_b=float(rec["return_b"]),
            round_index=int(rec["index"]),
        )


@dataclass(frozen=True)
class Allocation:
    points_a: float
    points_b: float

    def is_valid(self, tol: float = SUM_TOLERANCE) -> bool:
        return (
            self.points_a >= 0
            and self.points_b >= 0
            and abs(self.points_a + self.points_b - ENDOWMENT) <= tol
        )


@dataclass(frozen=True)
class Observation:
    prices: np.ndarray
    quantities: np.ndarray

    @property
    def expenditure(self) -> float:
        return float(self.prices @ self.quantities)


@dataclass(frozen=True)
class TaskGenConfig:
    """Sampling design for per-point returns.

    Returns are drawn uniformly on ``[return_min, return_max]`` and, when
    ``decimals`` is set, rounded to that many places so the value shown in a
    prompt is exactly the value used downstream.  Pairs are redrawn until
    ``max/min >= min_ratio``.
    """

    return_min: float = 0.1
    return_max: float = 1.0
    min_ratio: float = 1.0
    seed: int = 0
    decimals: int | None = 2

    def validate(self) -> None:
        if not (self.return_min > 0 and self.return_max > 0):
            raise ValueError("return bounds must be positive")
        if self.return_min > self.return_max:
            raise ValueError("return_min must not exceed return_max")
        if self.min_ratio < 1:
            raise ValueError("min_ratio must be >= 1")
        if self.return_max / self.return_min < self.min_ratio:
            raise ValueError("min_ratio is unattainable within [return_min, return_max]")


def _draw_return(rng: np.random.Generator, config: TaskGenConfig) -> float:
    r = rng.uniform(config.return_min, config.return_max)
    if config.decimals is not None:
        r = round(r, config.decimals)
        r = min(max(r, config.return_min), config.return_max)
    return float(r)


def generate_rounds(domain: str, config: TaskGenConfig, n_rounds: int = N_ROUNDS) -> list[BudgetRound]:
    """Draw ``n_rounds`` budget lines, deterministically from ``config.seed``."""
    config.validate()
    if domain not in DOMAINS:
        raise ValueError(f"unknown domain {domain!r}")
    rng = np.random.default_rng(config.seed)
    rounds = []
    for k in range(1, n_rounds + 1):
        while True:
            ra = _draw_return(rng, config)
            rb = _draw_return(rng, config)
            if max(ra, rb) / min(ra, rb) >= config.min_ratio:
                break
        rounds.append(BudgetRound(domain, ra, rb, k))
    return rounds


def to_observation(round: BudgetRound, alloc: Allocation) -> Observation:
    """Encode an allocation as dollar quantities at unit-expenditure prices."""
    if not alloc.is_valid():
        raise ValueError(
            f"allocation ({alloc.points_a}, {alloc.points_b}) violates the 100-point constraint"
        )
    quantities = np.array([alloc.points_a * round.return_a, alloc.points_b * round.return_b])
    prices = np.array([1.0 / (ENDOWMENT * round.return_a), 1.0 / (ENDOWMENT * round.return_b)])
    return Observation(prices=prices, quantities=quantities)


def write_rounds(path: str | Path, rounds: Iterable[BudgetRound]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rounds:
            fh.write(json.dumps(r.to_record(), sort_keys=True) + "\n")


def read_rounds(path: str | Path) -> list[BudgetRound]:
    with open(path, encoding="utf-8") as fh:
        return [BudgetRound.from_record(json.loads(line)) for line in fh if line.strip()]


def allocation_grid(step: float = 5.0) -> list[Allocation]:
    """The 21 discrete (M, 100 - M) options used under multiple choice."""
    return [Allocation(float(m), ENDOWMENT - m) for m in np.arange(0, ENDOWMENT + step / 2, step)]
