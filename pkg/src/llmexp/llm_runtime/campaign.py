"""Many simulations per condition, persisted and resumable.

Directory layout under ``out_dir``::

    manifest.json
    tasks/<domain>/sim_000.jsonl              budget rounds shared by all conditions
    transcripts/<model>/<case>__<condition>/sim_000.jsonl

A transcript file is complete once its last record has ``type == "result"``;
anything else is rerun from scratch on resume.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ..budget_tasks import BudgetRound, TaskGenConfig, generate_rounds, read_rounds, write_rounds
from ..prompts import Condition
from .simulation import DEFAULT_MAX_RETRIES, SimulationResult, Transcript, Turn, run_simulation, utc_now

log = logging.getLogger(__name__)

AgentFactory = Callable[[Condition, int, int], Callable]


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labels (independent of PYTHONHASHSEED)."""
    digest = hashlib.sha256(json.dumps([str(p) for p in parts]).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def task_seed(campaign_seed: int, domain: str, sim_index: int) -> int:
    return derive_seed(campaign_seed, "tasks", domain, sim_index)


def sim_seed(campaign_seed: int, condition: Condition, sim_index: int) -> int:
    return derive_seed(campaign_seed, condition.slug, sim_index)


def task_path(out_dir: Path, domain: str, sim_index: int) -> Path:
    return Path(out_dir) / "tasks" / domain / f"sim_{sim_index:03d}.jsonl"


def transcript_path(out_dir: Path, model_id: str, condition: Condition, sim_index: int) -> Path:
    return Path(out_dir) / "transcripts" / model_id / condition.slug / f"sim_{sim_index:03d}.jsonl"


def campaign_rounds(campaign_seed: int, domain: str, sim_index: int, task_config: TaskGenConfig,
                    out_dir: Path | None = None) -> list[BudgetRound]:
    """Rounds for one simulation index: read from ``tasks/`` when present, else drawn."""
    if out_dir is not None:
        path = task_path(out_dir, domain, sim_index)
        if path.exists():
            return read_rounds(path)
    cfg = TaskGenConfig(**{**asdict(task_config), "seed": task_seed(campaign_seed, domain, sim_index)})
    return generate_rounds(domain, cfg)


def generate_tasks(out_dir: Path, domains: Sequence[str], n_sims: int, campaign_seed: int,
                   task_config: TaskGenConfig) -> list[Path]:
    paths = []
    for domain in domains:
        for i in range(n_sims):
            path = task_path(out_dir, domain, i)
            path.parent.mkdir(parents=True, exist_ok=True)
            cfg = TaskGenConfig(**{**asdict(task_config), "seed": task_seed(campaign_seed, domain, i)})
            write_rounds(path, generate_rounds(domain, cfg))
            paths.append(path)
    return paths


def load_transcript(path: Path) -> tuple[Transcript | None, SimulationResult | None]:
    """Parse a transcript file; the result is None when the file is incomplete."""
    transcript, result = None, None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError:
                # a torn trailing write from an interrupted run
                return transcript, None
            kind = rec.pop("type")
            if kind == "header":
                transcript = Transcript(**rec)
            elif kind == "turn" and transcript is not None:
                transcript.turns.append(Turn(**rec))
            elif kind == "result":
                result = SimulationResult.from_record({"type": kind, **rec})
    return transcript, result


class _JsonlSink:
    def __init__(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(path, "w", encoding="utf-8")

    def __call__(self, record: dict) -> None:
        self.fh.write(json.dumps(record, sort_keys=True) + "\n")
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


@dataclass
class CampaignOutcome:
    results: list[SimulationResult]
    executed: list[str] = field(default_factory=list)
    loaded: list[str] = field(default_factory=list)

    @property
    def incomplete(self) -> list[str]:
        return [r.simulation_id for r in self.results if not r.completed]


_manifest_lock = threading.Lock()


def update_manifest(out_dir: Path, entry: dict) -> None:
    path = Path(out_dir) / "manifest.json"
    with _manifest_lock:
        manifest = json.loads(path.read_text()) if path.exists() else {"runs": {}}
        manifest.setdefault("runs", {})[entry["model_id"]] = entry
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run_campaign(
    conditions: Sequence[Condition],
    agent_factory: AgentFactory,
    n_sims: int = 100,
    *,
    campaign_seed: int = 0,
    model_id: str = "agent",
    out_dir: str | Path | None = None,
    parallelism: int = 1,
    task_config: TaskGenConfig | None = None,
    fixed_rounds: dict[str, list[BudgetRound]] | None = None,
    temperature: float | None = None,
    max_retries_per_round: int = DEFAULT_MAX_RETRIES,
    keep_invalid_context: bool = False,
    clock: Callable[[], str] = utc_now,
    manifest_extra: dict | None = None,
) -> CampaignOutcome:
    """Run ``n_sims`` simulations for every condition.

    ``agent_factory(condition, sim_index, sim_seed)`` supplies the agent for
    each simulation.  With ``out_dir`` every transcript is written as it
    grows and completed simulations are loaded instead of rerun.
    ``fixed_rounds`` (domain -> rounds) pins the same budget lines for all
    simulations of a domain.
    """
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    if not conditions:
        raise ValueError("no conditions")
    task_config = task_config or TaskGenConfig()
    out = Path(out_dir) if out_dir is not None else None
    jobs = [(c, i) for c in conditions for i in range(n_sims)]
    outcome = CampaignOutcome(results=[])
    lock = threading.Lock()

    def one(job) -> SimulationResult:
        cond, i = job
        seed = sim_seed(campaign_seed, cond, i)
        sim_id = f"{model_id}/{cond.slug}/sim_{i:03d}"
        path = transcript_path(out, model_id, cond, i) if out is not None else None
        if path is not None and path.exists():
            _, done = load_transcript(path)
            if done is not None:
                with lock:
                    outcome.loaded.append(sim_id)
                return done
        rounds = None
        if not cond.is_game:
            if fixed_rounds is not None and cond.case in fixed_rounds:
                rounds = fixed_rounds[cond.case]
            else:
                rounds = campaign_rounds(campaign_seed, cond.case, i, task_config, out)
        sink = _JsonlSink(path) if path is not None else None
        try:
            result, _ = run_simulation(
                cond, agent_factory(cond, i, seed), seed,
                rounds=rounds, model_id=model_id, simulation_id=sim_id, temperature=temperature,
                max_retries_per_round=max_retries_per_round, keep_invalid_context=keep_invalid_context,
                sink=sink, clock=clock,
            )
        finally:
            if sink is not None:
                sink.close()
        with lock:
            outcome.executed.append(sim_id)
        return result

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        update_manifest(out, {
            "model_id": model_id,
            "campaign_seed": campaign_seed,
            "n_sims": n_sims,
            "conditions": [c.to_dict() for c in conditions],
            "task_config": asdict(task_config),
            "seeds": {c.slug: [sim_seed(campaign_seed, c, i) for i in range(n_sims)] for c in conditions},
            **(manifest_extra or {}),
        })

    if parallelism <= 1:
        outcome.results = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcome.results = list(pool.map(one, jobs))
    if outcome.incomplete:
        log.warning("%d simulation(s) incomplete: %s", len(outcome.incomplete), ", ".join(outcome.incomplete))
    return outcome


def load_campaign(out_dir: str | Path) -> list[SimulationResult]:
    """Every completed simulation record under ``out_dir/transcripts``, in path order."""
    results = []
    for path in sorted((Path(out_dir) / "transcripts").glob("*/*/sim_*.jsonl")):
        _, result = load_transcript(path)
        if result is not None:
            results.append(result)
    return results
