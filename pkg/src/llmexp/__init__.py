"""Harness for running economic experiments on chat models and scoring the answers."""

from .budget_tasks import Allocation, BudgetRound, TaskGenConfig, generate_rounds, to_observation
from .games import GameDecision, GameScenario, scenario_spec
from .parsing import ParseOutcome, parse_reply
from .prompts import Condition, PersonaSpec, render
from .revealed_pref import ChoiceDataset, bronars_power, ccei, garp_satisfied
from .stats import fdr_adjust, normalized_std, sensitivity, t_test, turing_test

__version__ = "0.1.0"
