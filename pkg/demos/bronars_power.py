"""How much power do 25 budget lines have against random choice?

Draws 200 uniform-random choosers on one task set and reports the CCEI
distribution. Values well below 1 mean the task set can tell deliberate
choices from noise.
"""

import numpy as np

from llmexp import TaskGenConfig, bronars_power, generate_rounds

rounds = generate_rounds("social", TaskGenConfig(seed=11))
values = np.array([r.value for r in bronars_power(200, rounds, seed=5)])

print(f"mean CCEI of random choosers: {values.mean():.3f}")
print(f"share with CCEI < 0.95:       {(values < 0.95).mean():.1%}")
for q in (0.1, 0.5, 0.9):
    print(f"  quantile {q:.1f}: {np.quantile(values, q):.3f}")
