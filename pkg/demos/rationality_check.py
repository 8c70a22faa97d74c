"""Score three scripted decision makers on the same 25 budget lines.

A Cobb-Douglas chooser and a corner chooser never violate GARP, so both get a
CCEI of 1. A chooser that splits points at random usually does not.
"""

from llmexp import ChoiceDataset, TaskGenConfig, ccei, generate_rounds
from llmexp.budget_tasks import Allocation
from llmexp.revealed_pref import agent_rng

rounds = generate_rounds("risk", TaskGenConfig(seed=3))


def cobb_douglas(r, share=0.4):
    # spend a fixed share of the 100 points on A
    return Allocation(100 * share, 100 * (1 - share))


def corner(r):
    return Allocation(100.0, 0.0) if r.return_a >= r.return_b else Allocation(0.0, 100.0)


rng = agent_rng(3, 0)


def uniform(r):
    a = float(rng.uniform(0, 100))
    return Allocation(a, 100 - a)


for name, policy in [("cobb-douglas", cobb_douglas), ("corner", corner), ("uniform random", uniform)]:
    data = ChoiceDataset.from_allocations(rounds, [policy(r) for r in rounds])
    result = ccei(data)
    print(f"{name:>15}: CCEI = {result.value:.4f}")
