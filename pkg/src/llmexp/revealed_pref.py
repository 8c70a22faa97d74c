"""GARP at efficiency level e, Afriat's critical cost efficiency index, and
the random-choice power benchmark.

Conventions: ``E[i, j] = p_i . x_j``.  Bundle i is directly revealed
preferred to j at level e when ``e * E[i, i] >= E[i, j]`` and strictly so
when the inequality is strict.  GARP(e) fails when ``i R(e) j`` and
``e * E[j, j] > E[j, i]`` for some pair, where R(e) is the reflexive
transitive closure of the direct relation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .budget_tasks import ENDOWMENT, Allocation, BudgetRound, to_observation

# Relative slack for comparisons of expenditures.  Candidate efficiencies are
# ratios of expenditures, so e * E[i, i] can miss E[i, j] by an ulp.
REL_TOL = 1e-12


@dataclass(frozen=True)
class ChoiceDataset:
    prices: np.ndarray
    quantities: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.prices, dtype=float))
        x = np.atleast_2d(np.asarray(self.quantities, dtype=float))
        if p.size == 0 or x.size == 0:
            raise ValueError("empty dataset")
        if p.shape != x.shape:
            raise ValueError(f"price shape {p.shape} does not match quantity shape {x.shape}")
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise ValueError("prices must be positive and finite")
        if np.any(x < 0) or not np.all(np.isfinite(x)):
            raise ValueError("quantities must be nonnegative and finite")
        if np.any(np.einsum("ij,ij->i", p, x) <= 0):
            raise ValueError("every observation needs positive expenditure")
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "quantities", x)

    @property
    def n(self) -> int:
        return self.prices.shape[0]

    def expenditure_matrix(self) -> np.ndarray:
        return self.prices @ self.quantities.T

    @classmethod
    def from_allocations(cls, rounds: Sequence[BudgetRound], allocs: Sequence[Allocation]) -> "ChoiceDataset":
        if len(rounds) != len(allocs):
            raise ValueError("rounds and allocations differ in length")
        obs = [to_observation(r, a) for r, a in zip(rounds, allocs)]
        return cls(np.vstack([o.prices for o in obs]), np.vstack([o.quantities for o in obs]))

    def to_csv(self, path: str | Path) -> None:
        if self.prices.shape[1] != 2:
            raise ValueError("CSV layout holds two goods")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "price_a", "price_b", "qty_a", "qty_b"])
            for t in range(self.n):
                w.writerow([t + 1, *(repr(float(v)) for v in (*self.prices[t], *self.quantities[t]))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "ChoiceDataset":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = sorted(csv.DictReader(fh), key=lambda r: int(r["round"]))
        p = [[float(r["price_a"]), float(r["price_b"])] for r in rows]
        x = [[float(r["qty_a"]), float(r["qty_b"])] for r in rows]
        return cls(np.array(p), np.array(x))


@dataclass(frozen=True)
class RelationMatrices:
    n: int
    r0: np.ndarray
    p0: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class CceiResult:
    value: float
    garp_at_one: bool
    violation_witness: tuple[int, int] | None = None


def _check_e(e: float) -> None:
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {e}")


def transitive_closure(rel: np.ndarray) -> np.ndarray:
    """Reflexive transitive closure by Warshall's algorithm."""
    r = rel.copy()
    np.fill_diagonal(r, True)
    for k in range(r.shape[0]):
        r |= r[:, k : k + 1] & r[k : k + 1, :]
    return r


def _relations(E: np.ndarray, e: float) -> RelationMatrices:
    own = np.diag(E)[:, None]
    r0 = e * own >= E * (1 - REL_TOL)
    p0 = e * own > E * (1 + REL_TOL)
    return RelationMatrices(n=E.shape[0], r0=r0, p0=p0, r=transitive_closure(r0))


def direct_relations(data: ChoiceDataset, e: float = 1.0) -> RelationMatrices:
    _check_e(e)
    return _relations(data.expenditure_matrix(), e)


def _violations(E: np.ndarray, e: float) -> np.ndarray:
    rel = _relations(E, e)
    own = np.diag(E)
    # strict[j, i]: x_i is strictly cheaper than x_j at prices p_j, at level e
    strict = e * own[:, None] > E * (1 + REL_TOL)
    return rel.r & strict.T


def garp_satisfied(data: ChoiceDataset, e: float = 1.0) -> bool:
    _check_e(e)
    return not _violations(data.expenditure_matrix(), e).any()


def garp_witness(data: ChoiceDataset, e: float = 1.0) -> tuple[int, int] | None:
    """First violating pair (i, j) with i R(e) j and x_i strictly cheaper at p_j."""
    _check_e(e)
    hits = np.argwhere(_violations(data.expenditure_matrix(), e))
    return None if len(hits) == 0 else (int(hits[0, 0]), int(hits[0, 1]))


def ccei_candidates(data: ChoiceDataset) -> np.ndarray:
    E = data.expenditure_matrix()
    ratios = (E / np.diag(E)[:, None]).ravel()
    ratios = ratios[(ratios >= 0) & (ratios <= 1)]
    return np.unique(np.concatenate([ratios, [0.0, 1.0]]))


def ccei(data: ChoiceDataset) -> CceiResult:
    """Exact CCEI: the supremum of the efficiency levels at which GARP holds.

    GARP(e) is monotone in e and the relations only change at ratios
    E[i, j] / E[i, i], so the supremum is a candidate ratio.  Binary search
    brackets it between the last passing and first failing candidates; the
    set of passing levels may be open at the top, which the open interval
    between the two decides.
    """
    E = data.expenditure_matrix()
    if not _violations(E, 1.0).any():
        return CceiResult(1.0, True, None)
    witness = np.argwhere(_violations(E, 1.0))[0]
    cands = ccei_candidates(data)
    lo, hi = 0, len(cands) - 1  # cands[lo] satisfies (e = 0 is vacuous), cands[hi] = 1 fails
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _violations(E, float(cands[mid])).any():
            hi = mid
        else:
            lo = mid
    between = 0.5 * (cands[lo] + cands[hi])
    value = cands[lo] if _violations(E, float(between)).any() else cands[hi]
    return CceiResult(float(value), False, (int(witness[0]), int(witness[1])))


def ccei_bisection(data: ChoiceDataset, tol: float = 1e-6) -> float:
    """CCEI by bisection on e; agrees with :func:`ccei` to within ``tol``."""
    E = data.expenditure_matrix()
    if not _violations(E, 1.0).any():
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _violations(E, mid).any():
            hi = mid
        else:
            lo = mid
    return lo


def agent_rng(seed: int, agent_index: int) -> np.random.Generator:
    """Per-agent random stream, independent of how agents are scheduled."""
    return np.random.default_rng(np.random.SeedSequence([seed, agent_index]))


def random_allocations(rng: np.random.Generator, n_rounds: int) -> list[Allocation]:
    points_a = rng.uniform(0.0, ENDOWMENT, size=n_rounds)
    return [Allocation(float(a), ENDOWMENT - float(a)) for a in points_a]


def bronars_power(n_agents: int, rounds: Sequence[BudgetRound], seed: int) -> list[CceiResult]:
    """CCEI of agents who split points uniformly at random in every round."""
    if n_agents < 0:
        raise ValueError("n_agents must be nonnegative")
    if n_agents > 0 and not rounds:
        raise ValueError("no rounds to allocate over")
    out = []
    for i in range(n_agents):
        allocs = random_allocations(agent_rng(seed, i), len(rounds))
        out.append(ccei(ChoiceDataset.from_allocations(rounds, allocs)))
    return out
