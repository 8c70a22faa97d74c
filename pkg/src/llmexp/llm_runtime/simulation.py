"""One simulated subject: drive a dialogue until every decision is valid.

Invalid replies are excluded from the forwarded context and the same
question is asked again, up to ``max_retries_per_round`` times.  When the
retries run out the simulation stops and is marked incomplete; decisions
are never substituted.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable

from ..budget_tasks import Allocation, BudgetRound, TaskGenConfig, generate_rounds
from ..games import GameDecision
from ..parsing import parse_reply
from ..prompts import Condition, load_template, render_round_user, render_game, render_single_turn, render_system
from .client import TransportError

VALIDITY = ("valid", "refusal", "format", "constraint", "transport_error")
INVALID_CLASSES = VALIDITY[1:]
DEFAULT_MAX_RETRIES = 10


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class Turn:
    role: str
    text: str
    round_index: int
    timestamp: str
    attempt: int = 0
    validity: str | None = None
    detail: str = ""

    def to_record(self) -> dict:
        return {"type": "turn", **asdict(self)}


@dataclass
class Transcript:
    simulation_id: str
    condition: dict
    model_id: str
    seed: int
    turns: list[Turn] = field(default_factory=list)

    def header_record(self) -> dict:
        return {
            "type": "header",
            "simulation_id": self.simulation_id,
            "condition": self.condition,
            "model_id": self.model_id,
            "seed": self.seed,
        }

    def assistant_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.role == "assistant"]


@dataclass
class SimulationResult:
    simulation_id: str
    condition: Condition
    model_id: str
    seed: int
    decisions: list
    invalid_count: dict[str, int]
    completed: bool
    rounds: list[BudgetRound] = field(default_factory=list)
    n_assistant_turns: int = 0

    @property
    def n_invalid(self) -> int:
        return sum(self.invalid_count.values())

    def to_record(self) -> dict:
        if self.condition.is_game:
            decisions = [d.value for d in self.decisions]
        else:
            decisions = [[d.points_a, d.points_b] for d in self.decisions]
        return {
            "type": "result",
            "simulation_id": self.simulation_id,
            "condition": self.condition.to_dict(),
            "model_id": self.model_id,
            "seed": self.seed,
            "decisions": decisions,
            "invalid_count": dict(self.invalid_count),
            "completed": self.completed,
            "rounds": [r.to_record() for r in self.rounds],
            "n_assistant_turns": self.n_assistant_turns,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SimulationResult":
        cond = Condition.from_dict(rec["condition"])
        if cond.is_game:
            decisions = [GameDecision(cond.case, float(v)) for v in rec["decisions"]]
        else:
            decisions = [Allocation(float(a), float(b)) for a, b in rec["decisions"]]
        return cls(
            simulation_id=rec["simulation_id"],
            condition=cond,
            model_id=rec["model_id"],
            seed=int(rec["seed"]),
            decisions=decisions,
            invalid_count={k: int(v) for k, v in rec["invalid_count"].items()},
            completed=bool(rec["completed"]),
            rounds=[BudgetRound.from_record(r) for r in rec.get("rounds", [])],
            n_assistant_turns=int(rec.get("n_assistant_turns", 0)),
        )


class _Session:
    def __init__(self, transcript: Transcript, agent, temperature, sink, clock, max_retries, keep_invalid):
        self.t = transcript
        self.agent = agent
        self.temperature = temperature
        self.sink = sink
        self.clock = clock
        self.max_retries = max_retries
        self.keep_invalid = keep_invalid
        self.invalid = Counter({k: 0 for k in INVALID_CLASSES})

    def record(self, turn: Turn) -> None:
        self.t.turns.append(turn)
        if self.sink is not None:
            self.sink(turn.to_record())

    def ask(self, context: list[dict], user: str, round_index: int, judge) -> tuple[object, bool]:
        """Ask ``user`` until ``judge(reply)`` accepts it.

        ``judge`` returns ``(status, payload, detail)``.  On success the
        exchange is appended to ``context`` in place.
        """
        for attempt in range(self.max_retries + 1):
            self.record(Turn("user", user, round_index, self.clock(), attempt))
            try:
                reply = self.agent(context + [{"role": "user", "content": user}], temperature=self.temperature)
            except TransportError as exc:
                self.record(Turn("assistant", "", round_index, self.clock(), attempt, "transport_error", str(exc)))
                self.invalid["transport_error"] += 1
                continue
            status, payload, detail = judge(reply)
            self.record(Turn("assistant", reply, round_index, self.clock(), attempt, status, detail))
            if status == "valid":
                context += [{"role": "user", "content": user}, {"role": "assistant", "content": reply}]
                return payload, True
            self.invalid[status] += 1
            if self.keep_invalid:
                context += [{"role": "user", "content": user}, {"role": "assistant", "content": reply}]
        return None, False


def simulation_rounds(condition: Condition, rounds, task_config: TaskGenConfig | None, sim_seed: int):
    if condition.is_game:
        return []
    if rounds is not None:
        rounds = list(rounds)
        if any(r.domain != condition.case for r in rounds):
            raise ValueError("round domain does not match the condition")
        return rounds
    cfg = task_config or TaskGenConfig()
    return generate_rounds(condition.case, replace(cfg, seed=sim_seed))


def run_simulation(
    condition: Condition,
    agent: Callable,
    sim_seed: int,
    *,
    rounds: list[BudgetRound] | None = None,
    task_config: TaskGenConfig | None = None,
    model_id: str = "agent",
    simulation_id: str | None = None,
    temperature: float | None = None,
    max_retries_per_round: int = DEFAULT_MAX_RETRIES,
    keep_invalid_context: bool = False,
    sink: Callable[[dict], None] | None = None,
    clock: Callable[[], str] = utc_now,
) -> tuple[SimulationResult, Transcript]:
    """Collect one simulation's decisions from ``agent``.

    Budget cases use ``rounds`` when given, otherwise 25 rounds drawn from
    ``task_config`` seeded with ``sim_seed``.  ``sink`` receives each
    transcript record as it is produced (for incremental persistence).
    """
    if max_retries_per_round < 1:
        raise ValueError("max_retries_per_round must be >= 1")
    rounds = simulation_rounds(condition, rounds, task_config, sim_seed)
    sim_id = simulation_id or f"{model_id}/{condition.slug}/{sim_seed}"
    transcript = Transcript(sim_id, condition.to_dict(), model_id, sim_seed)
    if sink is not None:
        sink(transcript.header_record())
    temp = condition.temperature if condition.temperature is not None else temperature
    s = _Session(transcript, agent, temp, sink, clock, max_retries_per_round, keep_invalid_context)

    system = render_system(condition)
    s.record(Turn("system", system, 0, clock()))
    context = [{"role": "system", "content": system}]
    decisions: list = []
    completed = True

    def judge_one(reply):
        out = parse_reply(reply, condition.case, condition.answer_type)[0]
        return out.status, out.decision, out.detail

    if condition.is_game:
        greeting = load_template("games", "greeting")
        _, ok = s.ask(context, greeting, 0, lambda reply: ("valid", None, "greeting"))
        if ok:
            body = render_game(condition).user_turns[1]
            decision, ok = s.ask(context, body, 1, judge_one)
            if ok:
                decisions.append(decision)
        completed = ok
    elif condition.dialogue == "single_turn":
        def judge_batch(reply):
            outs = parse_reply(reply, condition.case, condition.answer_type, expected_count=len(rounds))
            bad = next((o for o in outs if not o.valid), None)
            if bad is None:
                return "valid", [o.decision for o in outs], ""
            return bad.status, None, bad.detail

        batch, completed = s.ask(context, render_single_turn(condition, rounds), 1, judge_batch)
        if completed:
            decisions = list(batch)
    else:
        for k, rnd in enumerate(rounds, start=1):
            user = render_round_user(condition, rnd, is_first=(k == 1))
            decision, ok = s.ask(context, user, k, judge_one)
            if not ok:
                completed = False
                break
            decisions.append(decision)

    result = SimulationResult(
        simulation_id=sim_id,
        condition=condition,
        model_id=model_id,
        seed=sim_seed,
        decisions=decisions,
        invalid_count=dict(s.invalid),
        completed=completed,
        rounds=rounds,
        n_assistant_turns=len(transcript.assistant_turns()),
    )
    if sink is not None:
        sink(result.to_record())
    return result, transcript

