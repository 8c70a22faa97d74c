"""Run a small campaign end to end with scripted agents and print the report.

Nothing here touches the network. Swap the agent factory for a ChatClient to
run the same campaign against a live chat-completions endpoint.
"""

import tempfile
from pathlib import Path

from llmexp import Condition
from llmexp.llm_runtime import run_campaign, scripted_agent
from llmexp.report import analyze, render_markdown

out = Path(tempfile.mkdtemp(prefix="llmexp-demo-"))
conditions = [
    Condition("risk"),
    Condition("risk", dialogue="single_turn", variation="dialogue", name="single_turn"),
]

for model, policy in [("steady", "cobb_douglas(0.5)"), ("noisy", "uniform_random")]:
    run_campaign(conditions, lambda c, i, seed, p=policy: scripted_agent(p, seed=seed), 20,
                 campaign_seed=1, model_id=model, out_dir=out)

print(render_markdown(analyze(out)))
print(f"transcripts under {out}")
