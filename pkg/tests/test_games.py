import numpy as np
import pytest

from llmexp.games import (
    SCENARIOS,
    expected_payoff_bomb,
    on_grid,
    payoff_bomb,
    payoff_dictator,
    payoff_public_goods,
    payoff_ultimatum,
    scenario_spec,
    validate_decision,
)


def test_scenario_specs():
    for s in SCENARIOS:
        spec = scenario_spec(s)
        assert len(spec.options()) == 21
        assert spec.options()[0] == spec.feasible_min and spec.options()[-1] == spec.feasible_max
    assert scenario_spec("public_goods").interval_length == 20
    assert scenario_spec("bomb_risk").interval_length == 100
    assert scenario_spec("bomb_risk").unit_label == "boxes"
    with pytest.raises(ValueError):
        scenario_spec("trust")


def test_payoffs_from_prompt_examples():
    assert payoff_dictator(40) == (60, 40)
    assert payoff_ultimatum(40, 40) == (60, 40)
    assert payoff_ultimatum(30, 40) == (0, 0)
    assert payoff_public_goods(12, 20) == 18
    assert payoff_bomb(60, True) == 0
    assert payoff_bomb(60, False) == 60


def test_public_goods_consistency():
    with pytest.raises(ValueError):
        payoff_public_goods(12, 10)
    with pytest.raises(ValueError):
        payoff_public_goods(5, 70)
    with pytest.raises(ValueError):
        payoff_public_goods(25, 30)


def test_bomb_expected_payoff_peaks_at_half():
    grid = np.arange(101)
    best = grid[np.argmax([expected_payoff_bomb(k) for k in grid])]
    assert best == 50
    assert expected_payoff_bomb(50) == 25


def test_range_checks():
    for fn, arg in ((payoff_dictator, 101), (payoff_dictator, -1), (expected_payoff_bomb, 120)):
        with pytest.raises(ValueError):
            fn(arg)


def test_validate_decision():
    assert validate_decision("dictator", 40) is None
    assert validate_decision("dictator", 42) is None
    assert validate_decision("dictator", 42, "choice") is not None
    assert validate_decision("dictator", 150) is not None
    assert validate_decision("public_goods", 7, "choice") is None
    assert validate_decision("public_goods", 7.5, "choice") is not None
    assert validate_decision("bomb_risk", float("nan")) is not None


def test_on_grid():
    pg = scenario_spec("public_goods")
    assert on_grid(pg, 20) and not on_grid(pg, 21)
    assert on_grid(scenario_spec("dictator"), 35.0000000001)
