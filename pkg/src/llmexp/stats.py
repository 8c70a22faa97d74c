"""Analysis statistics: two-sample and proportion tests, Benjamini-Hochberg
adjustment, sensitivity scores, normalised dispersion and the resampling
Turing test."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Hashable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .games import scenario_spec

ALPHA = 0.05


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    variant: str
    mean_difference: float
    std_error: float
    detail: str = ""


def _clean(sample, name: str) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2:
        raise ValueError(f"{name} needs at least 2 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def _se_df(a: np.ndarray, b: np.ndarray, variant: str) -> tuple[float, float]:
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if variant == "pooled":
        df = na + nb - 2
        sp2 = ((na - 1) * va + (nb - 1) * vb) / df
        return math.sqrt(sp2 * (1 / na + 1 / nb)), float(df)
    if variant == "welch":
        qa, qb = va / na, vb / nb
        se2 = qa + qb
        if se2 == 0:
            return 0.0, float(na + nb - 2)
        df = se2**2 / (qa**2 / (na - 1) + qb**2 / (nb - 1))
        return math.sqrt(se2), float(df)
    raise ValueError(f"unknown t-test variant {variant!r}")


def t_test(sample_a, sample_b, variant: str = "pooled") -> TTestResult:
    """Two-sided two-sample t-test (pooled variance by default, Welch on request).

    Two constant samples give p = 1 when their means agree and p = 0
    otherwise; ``detail`` flags that limiting convention.
    """
    a, b = _clean(sample_a, "sample_a"), _clean(sample_b, "sample_b")
    diff = float(a.mean() - b.mean())
    se, df = _se_df(a, b, variant)
    if se == 0:
        if diff == 0:
            return TTestResult(0.0, df, 1.0, variant, diff, se, "zero variance, equal means")
        return TTestResult(math.copysign(math.inf, diff), df, 0.0, variant, diff, se,
                           "zero variance, unequal means")
    t = diff / se
    p = float(min(1.0, 2 * sps.t.sf(abs(t), df)))
    return TTestResult(t, df, p, variant, diff, se)


def mean_diff_ci(sample_a, sample_b, level: float = 0.95, variant: str = "pooled") -> tuple[float, float]:
    """Confidence interval for mean(a) - mean(b)."""
    a, b = _clean(sample_a, "sample_a"), _clean(sample_b, "sample_b")
    se, df = _se_df(a, b, variant)
    diff = float(a.mean() - b.mean())
    half = float(sps.t.ppf(0.5 + level / 2, df)) * se
    return diff - half, diff + half


def proportion_test(k1: int, n1: int, k2: int, n2: int) -> float:
    """Two-sided two-proportion z-test with the pooled success rate."""
    if n1 < 1 or n2 < 1:
        raise ValueError("sample sizes must be positive")
    if not (0 <= k1 <= n1 and 0 <= k2 <= n2):
        raise ValueError("successes must lie in [0, n]")
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return 1.0
    z = (k1 / n1 - k2 / n2) / se
    return float(min(1.0, 2 * sps.norm.sf(abs(z))))


def _bh(p: np.ndarray) -> np.ndarray:
    m = p.size
    order = np.argsort(p, kind="mergesort")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj_sorted, 1.0)
    return out


def fdr_adjust(raw_p: Sequence[float], families: Sequence[Hashable] | None = None) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values.

    With ``families`` (one label per p-value) each family is adjusted on
    its own; otherwise all values form a single family.
    """
    p = np.asarray(raw_p, dtype=float).ravel()
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("p-values must lie in [0, 1]")
    if p.size == 0:
        return p
    if families is None:
        return _bh(p)
    labels = list(families)
    if len(labels) != p.size:
        raise ValueError("one family label per p-value is required")
    out = np.empty_like(p)
    for fam in dict.fromkeys(labels):
        idx = np.array([i for i, f in enumerate(labels) if f == fam])
        out[idx] = _bh(p[idx])
    return out


Cell = tuple[str, str, str]  # (model, measure, condition)


@dataclass
class PValueGrid:
    """Raw p-values over models x measures x conditions for one variation.

    The whole grid is one correction family; adjusted values are filled in
    on construction.
    """

    raw: dict[Cell, float]
    family_id: str = "default"
    adjusted: dict[Cell, float] = field(init=False)

    def __post_init__(self):
        cells = list(self.raw)
        adj = fdr_adjust([self.raw[c] for c in cells]) if cells else []
        self.adjusted = {c: float(a) for c, a in zip(cells, adj)}

    @property
    def models(self) -> list[str]:
        return sorted({c[0] for c in self.raw})

    @property
    def measures(self) -> list[str]:
        return sorted({c[1] for c in self.raw})

    @property
    def conditions(self) -> list[str]:
        return sorted({c[2] for c in self.raw})


@dataclass(frozen=True)
class SensitivityReport:
    lambda_: float
    lambda_by_measure: dict[str, float]
    alpha: float
    n_models: int
    n_measures: int
    n_conditions: int
    n_significant: int


def sensitivity(grid: PValueGrid, alpha: float = ALPHA) -> SensitivityReport:
    """Share of (model, measure, condition) cells whose adjusted p is below alpha."""
    models, measures, conds = grid.models, grid.measures, grid.conditions
    if not grid.raw:
        raise ValueError("empty grid")
    missing = [c for c in itertools.product(models, measures, conds) if c not in grid.adjusted]
    if missing:
        raise ValueError(f"incomplete grid: {len(missing)} missing cell(s), e.g. {missing[0]}")
    sig = {c: grid.adjusted[c] < alpha for c in grid.adjusted}
    by_measure = {
        m: sum(sig[(i, m, s)] for i in models for s in conds) / (len(models) * len(conds))
        for m in measures
    }
    n_sig = sum(sig.values())
    return SensitivityReport(
        lambda_=n_sig / len(sig),
        lambda_by_measure=by_measure,
        alpha=alpha,
        n_models=len(models),
        n_measures=len(measures),
        n_conditions=len(conds),
        n_significant=n_sig,
    )


@dataclass(frozen=True)
class TuringOutcome:
    p_llm_more_likely: float
    p_equal: float
    p_human_more_likely: float
    n_draws: int

    @property
    def passed(self) -> bool:
        # the model passes when its draw is at least as human-like in over half the comparisons
        return self.p_llm_more_likely + self.p_equal > 0.5


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def empirical_likelihood(values, reference, decimals: int = 3) -> np.ndarray:
    """Frequency of each (rounded) value among the (rounded) reference sample."""
    ref = np.round(np.asarray(reference, dtype=float), decimals)
    keys, counts = np.unique(ref, return_counts=True)
    v = np.round(np.asarray(values, dtype=float), decimals)
    pos = np.clip(np.searchsorted(keys, v), 0, len(keys) - 1)
    hit = keys[pos] == v
    return np.where(hit, counts[pos], 0) / ref.size


def turing_test(llm_sample, human_sample, n_draws: int = 10_000, rng=None, decimals: int = 3) -> TuringOutcome:
    """Pair random LLM and human draws and ask which is likelier under the
    empirical human distribution."""
    llm = np.asarray(llm_sample, dtype=float).ravel()
    human = np.asarray(human_sample, dtype=float).ravel()
    if llm.size == 0 or human.size == 0:
        raise ValueError("both samples must be nonempty")
    rng = _as_rng(rng)
    li = rng.integers(llm.size, size=n_draws)
    hi = rng.integers(human.size, size=n_draws)
    lik_llm = empirical_likelihood(llm[li], human, decimals)
    lik_h = empirical_likelihood(human[hi], human, decimals)
    return TuringOutcome(
        p_llm_more_likely=float(np.mean(lik_llm > lik_h)),
        p_equal=float(np.mean(lik_llm == lik_h)),
        p_human_more_likely=float(np.mean(lik_llm < lik_h)),
        n_draws=n_draws,
    )


def normalized_std(decisions: Mapping[str, Sequence[float]], scenarios: Sequence[str] | None = None) -> float:
    """Mean over scenarios of the population SD divided by the feasible interval length."""
    scenarios = list(scenarios) if scenarios is not None else list(decisions)
    if not scenarios:
        raise ValueError("no scenarios given")
    total = 0.0
    for s in scenarios:
        if s not in decisions:
            raise ValueError(f"missing decisions for scenario {s!r}")
        x = np.asarray(decisions[s], dtype=float)
        if x.size < 2:
            raise ValueError(f"scenario {s!r} needs at least 2 decisions")
        total += x.std(ddof=0) / scenario_spec(s).interval_length
    return total / len(scenarios)


def ecdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Distinct values and the cumulative share of observations at or below each."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        return x, x
    keys, counts = np.unique(x, return_counts=True)
    return keys, np.cumsum(counts) / x.size


def load_reference_distribution(path: str | Path) -> dict[str, np.ndarray]:
    """Human reference CSV: a ``value`` column plus a ``measure`` (or
    ``scenario`` / ``domain``) column naming the task."""
    out: dict[str, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        key = next((c for c in ("measure", "scenario", "domain") if c in cols), None)
        if key is None or "value" not in cols:
            raise ValueError(f"{path}: need a 'value' column and a measure/scenario/domain column")
        for row in reader:
            out.setdefault(row[key], []).append(float(row["value"]))
    return {k: np.array(v) for k, v in out.items()}


def load_published_values() -> list[dict]:
    """Read-only table of published summary values for report annotation."""
    path = resources.files("llmexp") / "data" / "published_values.csv"
    with path.open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["value"] = float(r["value"])
    return rows
