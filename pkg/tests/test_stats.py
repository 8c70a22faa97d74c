import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from llmexp.stats import (
    PValueGrid,
    ecdf,
    empirical_likelihood,
    fdr_adjust,
    load_published_values,
    load_reference_distribution,
    mean_diff_ci,
    normalized_std,
    proportion_test,
    sensitivity,
    t_test,
    turing_test,
)


def bh_brute_force(p):
    """Benjamini-Hochberg by definition: q_(i) = min over k >= i of m p_(k) / k."""
    p = list(p)
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    rank = {idx: r + 1 for r, idx in enumerate(order)}
    out = []
    for i in range(m):
        out.append(min(1.0, min(m * p[j] / rank[j] for j in range(m) if rank[j] >= rank[i])))
    return out


@settings(max_examples=50)
@given(st.integers(0, 10_000))
def test_t_test_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(0, 1, 20), rng.normal(0.3, 2, 35)
    for variant, equal_var in (("pooled", True), ("welch", False)):
        ours = t_test(a, b, variant)
        ref = sps.ttest_ind(a, b, equal_var=equal_var)
        assert ours.t_statistic == pytest.approx(ref.statistic, rel=1e-10)
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-300)


def test_t_test_degenerate_samples():
    assert t_test([1, 1, 1], [1, 1]).p_value == 1.0
    res = t_test([1, 1, 1], [0.5, 0.5])
    assert res.p_value == 0.0 and res.t_statistic == math.inf
    with pytest.raises(ValueError):
        t_test([1], [1, 2])
    with pytest.raises(ValueError):
        t_test([1, np.nan], [1, 2])
    with pytest.raises(ValueError):
        t_test([1, 2], [1, 2], variant="student")


def test_confidence_interval_matches_scipy():
    rng = np.random.default_rng(2)
    a, b = rng.normal(1, 1, 40), rng.normal(0, 1, 30)
    lo, hi = mean_diff_ci(a, b)
    ref = sps.ttest_ind(a, b).confidence_interval(0.95)
    assert (lo, hi) == pytest.approx((ref.low, ref.high), rel=1e-10)


def test_proportion_test():
    # pooled z by hand
    p = (44 + 21) / 160
    z = (44 / 80 - 21 / 80) / math.sqrt(p * (1 - p) * (2 / 80))
    assert proportion_test(44, 80, 21, 80) == pytest.approx(math.erfc(abs(z) / math.sqrt(2)), rel=1e-12)
    assert proportion_test(0, 10, 0, 10) == 1.0
    with pytest.raises(ValueError):
        proportion_test(11, 10, 0, 10)


def test_fdr_known_case():
    assert fdr_adjust([0.01, 0.02, 0.03, 0.04]).tolist() == [0.04, 0.04, 0.04, 0.04]


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_fdr_matches_definition(p):
    np.testing.assert_allclose(fdr_adjust(p), bh_brute_force(p), rtol=1e-12, atol=0)


def test_fdr_matches_scipy():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = rng.random(17) ** 3
        np.testing.assert_allclose(fdr_adjust(p), sps.false_discovery_control(p), rtol=1e-12)


def test_fdr_families_are_independent():
    p = [0.01, 0.02, 0.03, 0.04]
    fam = ["a", "a", "b", "b"]
    np.testing.assert_allclose(fdr_adjust(p, fam), [0.02, 0.02, 0.04, 0.04])
    with pytest.raises(ValueError):
        fdr_adjust(p, ["a"])
    with pytest.raises(ValueError):
        fdr_adjust([1.5])
    assert fdr_adjust([]).size == 0


def grid(values):
    models, measures, conds = ["m1", "m2"], ["risk", "social"], ["c1", "c2"]
    cells = [(i, m, s) for i in models for m in measures for s in conds]
    return PValueGrid(dict(zip(cells, values)))


def test_sensitivity_six_of_eight():
    rep = sensitivity(grid([1e-6] * 6 + [0.9, 0.8]))
    assert rep.lambda_ == 0.75 and rep.n_significant == 6
    assert rep.lambda_by_measure == {"risk": 1.0, "social": 0.5}


def test_sensitivity_none_significant():
    assert sensitivity(grid([0.3] * 8)).lambda_ == 0.0


def test_sensitivity_uses_adjusted_p():
    # raw p of 0.04 everywhere except one cell: BH lifts the large one, keeps the rest below alpha
    rep = sensitivity(grid([0.04] * 7 + [0.9]))
    assert rep.n_significant == 7
    rep = sensitivity(grid([0.01, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6]))
    assert rep.n_significant == 0  # 0.01 * 8 = 0.08 after adjustment


def test_sensitivity_rejects_incomplete_grid():
    with pytest.raises(ValueError):
        sensitivity(PValueGrid({("m1", "risk", "c1"): 0.01, ("m2", "social", "c2"): 0.02}))


def test_empirical_likelihood():
    np.testing.assert_allclose(empirical_likelihood([1, 2, 5], [1, 1, 2, 3]), [0.5, 0.25, 0.0])
    # values are compared after rounding to three decimals
    assert empirical_likelihood([0.12341], [0.1234])[0] == 1.0


def test_turing_outside_support_fails():
    out = turing_test(np.full(50, 200.0), np.arange(100.0), n_draws=2000, rng=0)
    assert out.p_human_more_likely == 1.0 and not out.passed


def test_turing_identical_point_mass_passes():
    out = turing_test(np.full(10, 3.0), np.full(10, 3.0), n_draws=100, rng=0)
    assert out.p_equal == 1.0 and out.passed


def test_turing_probabilities_sum_to_one():
    rng = np.random.default_rng(0)
    out = turing_test(rng.integers(0, 10, 40), rng.integers(0, 10, 60), n_draws=1000, rng=1)
    assert out.p_llm_more_likely + out.p_equal + out.p_human_more_likely == pytest.approx(1.0)


def test_turing_reproducible():
    a, b = np.arange(30.0), np.arange(10.0, 50.0)
    assert turing_test(a, b, rng=3) == turing_test(a, b, rng=3)


def test_normalized_std_hand_case():
    def two_point(center, sd):
        return [center - sd, center + sd] * 5

    data = {s: two_point(50, 10) for s in ("dictator", "ultimatum_proposer", "ultimatum_responder", "bomb_risk")}
    data["public_goods"] = two_point(10, 2)
    assert normalized_std(data) == pytest.approx(0.1, abs=1e-12)
    with pytest.raises(ValueError):
        normalized_std({"dictator": [1.0]})
    with pytest.raises(ValueError):
        normalized_std(data, ["dictator", "trust"])


def test_ecdf():
    x, f = ecdf([3, 1, 2, 2])
    assert x.tolist() == [1, 2, 3] and f.tolist() == [0.25, 0.75, 1.0]


def test_reference_loader(tmp_path):
    (tmp_path / "r.csv").write_text("scenario,value\ndictator,10\ndictator,20\nbomb_risk,50\n")
    ref = load_reference_distribution(tmp_path / "r.csv")
    assert ref["dictator"].tolist() == [10, 20] and ref["bomb_risk"].tolist() == [50]
    (tmp_path / "bad.csv").write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        load_reference_distribution(tmp_path / "bad.csv")


def test_published_values_table():
    rows = load_published_values()
    lam = {(r["measure"], r["condition"]): r["value"] for r in rows if r["quantity"] == "lambda"}
    assert lam[("budget", "dialogue")] == 0.75 and lam[("budget", "persona")] == 0.0
    nsd = {r["model"]: r["value"] for r in rows if r["quantity"] == "normalized_std"}
    assert nsd["human"] == 0.231
