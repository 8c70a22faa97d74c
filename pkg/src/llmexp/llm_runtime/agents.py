"""Scripted stand-ins for a chat model.

Agents are callables ``agent(messages, temperature=None) -> str``.  The
scripted ones read the displayed returns (or the game scenario) out of the
last user message and answer per a fixed policy, so whole campaigns run
offline and deterministically.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict

import numpy as np

from ..games import SCENARIOS, scenario_spec
from ..parsing import FIELD_NAMES
from ..prompts import load_template

POLICIES = ("corner_maximizer", "uniform_random", "fixed_midpoint", "cobb_douglas", "malformed")
MALFORMED_MODES = ("no_fence", "bad_json", "bad_sum", "out_of_range", "refusal", "no_brackets", "wrong_count")

_QUESTION = re.compile(
    r"^(?:\d+\. )?In this round, .*? returns ([0-9.]+) dollars, and .*? returns ([0-9.]+) dollars\.",
    re.MULTILINE,
)

GREETING_REPLY = "Sure, I'd be happy to play a game! What would you like to play?"
REFUSAL_TEXT = (
    "As an AI language model, I cannot participate in surveys or make personal financial decisions. "
    "I am not capable of making decisions that reflect personal preferences."
)


class FixtureError(Exception):
    """The prompt handed to a scripted agent could not be interpreted."""


def _last_user(messages: list[dict]) -> str:
    for m in reversed(messages):
        if m["role"] == "user":
            return m["content"]
    raise FixtureError("no user message")


def _json_reply(field_names, a: float, b: float) -> str:
    body = json.dumps({field_names[0]: a, field_names[1]: b}, indent=2)
    return f"```json\n{body}\n```"


def _game_scenario(text: str) -> str | None:
    for s in SCENARIOS:
        if load_template(s, "intro") in text:
            return s
    return None


def _fmt(v: float) -> str:
    return repr(float(v)).removesuffix(".0")


class ScriptedAgent:
    """Deterministic policy agent.

    ``faults`` maps a question number (1-based round, or 1 for the game
    body) to a list of malformed modes emitted on the first attempts at
    that question before the policy answer is given.
    """

    def __init__(self, policy: str = "fixed_midpoint", share: float = 0.5, mode: str = "no_fence",
                 seed=None, rng: np.random.Generator | None = None, faults: dict[int, list[str]] | None = None):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        if not 0 <= share <= 1:
            raise ValueError("share must lie in [0, 1]")
        if policy == "malformed" and mode not in MALFORMED_MODES:
            raise ValueError(f"unknown malformed mode {mode!r}")
        self.policy = policy
        self.share = share
        self.mode = mode
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.faults = {k: list(v) for k, v in (faults or {}).items()}
        self._attempts: dict[int, int] = defaultdict(int)
        self.received: list[list[dict]] = []

    def __call__(self, messages: list[dict], temperature: float | None = None) -> str:
        self.received.append([dict(m) for m in messages])
        text = _last_user(messages)
        if text == load_template("games", "greeting"):
            return GREETING_REPLY
        scenario = _game_scenario(text)
        if scenario is not None:
            return self._game(scenario, text)
        pairs = [(float(a), float(b)) for a, b in _QUESTION.findall(text)]
        if not pairs:
            raise FixtureError("prompt shows neither a budget question nor a known game")
        domain = "risk" if "Asset A" in text else "social"
        # count questions actually answered so far in the forwarded context
        question_no = 1 if len(pairs) > 1 else sum(m["role"] == "user" for m in messages)
        return self._budget(domain, pairs, "There are 21 options" in text, question_no)

    def _pending_fault(self, question_no: int) -> str | None:
        k = self._attempts[question_no]
        self._attempts[question_no] += 1
        queue = self.faults.get(question_no, [])
        return queue[k] if k < len(queue) else None

    def _budget(self, domain: str, pairs, choice: bool, question_no: int) -> str:
        fields = FIELD_NAMES[domain]
        mode = self.mode if self.policy == "malformed" else self._pending_fault(question_no)
        if mode is not None:
            return self._malformed_budget(mode, fields, len(pairs))
        blocks = []
        for ra, rb in pairs:
            a = self._points_a(ra, rb)
            if choice:
                a = float(5 * round(a / 5))
            blocks.append(_json_reply(fields, a, 100.0 - a))
        return "\n\n".join(blocks)

    def _points_a(self, ra: float, rb: float) -> float:
        if self.policy == "corner_maximizer":
            return 100.0 if ra >= rb else 0.0
        if self.policy == "uniform_random":
            return float(self.rng.uniform(0.0, 100.0))
        if self.policy == "cobb_douglas":
            return 100.0 * self.share
        return 50.0

    def _malformed_budget(self, mode: str, fields, n: int) -> str:
        if mode == "no_fence":
            return f'{{"{fields[0]}": 50, "{fields[1]}": 50}}'
        if mode == "bad_json":
            return f'```json\n{{"{fields[0]}": 50 "{fields[1]}": 50}}\n```'
        if mode == "bad_sum":
            return _json_reply(fields, 60.0, 38.0)
        if mode == "out_of_range":
            return _json_reply(fields, 120.0, -20.0)
        if mode == "refusal":
            return REFUSAL_TEXT
        if mode == "wrong_count":
            return "\n\n".join([_json_reply(fields, 50.0, 50.0)] * max(1, n - 1))
        return "I would split the points evenly."  # no_brackets has no budget analogue

    def _game(self, scenario: str, text: str) -> str:
        spec = scenario_spec(scenario)
        mode = self.mode if self.policy == "malformed" else self._pending_fault(1)
        if mode is not None:
            if mode == "refusal":
                return REFUSAL_TEXT
            if mode in ("out_of_range", "bad_sum"):
                return f"My choice is [[{_fmt(spec.feasible_max + 50)}]]."
            return "I would choose a moderate amount."
        lo, hi = spec.feasible_min, spec.feasible_max
        if self.policy == "corner_maximizer":
            # payoff-maximising answer against an accept-anything counterpart
            value = 50.0 if scenario == "bomb_risk" else lo
        elif self.policy == "uniform_random":
            value = float(self.rng.uniform(lo, hi))
        elif self.policy == "cobb_douglas":
            value = lo + self.share * (hi - lo)
        else:
            value = (lo + hi) / 2
        if "21 options" in text:
            value = float(lo + spec.option_step * round((value - lo) / spec.option_step))
        prefix = "$" if spec.unit_label == "$" else ""
        return f"After thinking it over, my choice is [[{prefix}{_fmt(value)}]]."


class SequenceAgent:
    """Replays canned replies in order; an exception instance is raised instead of returned."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.received: list[list[dict]] = []

    def __call__(self, messages: list[dict], temperature: float | None = None) -> str:
        self.received.append([dict(m) for m in messages])
        if not self.replies:
            raise FixtureError("scripted replies exhausted")
        r = self.replies.pop(0)
        if isinstance(r, BaseException):
            raise r
        return r


def scripted_agent(policy: str, seed=None, **kwargs) -> ScriptedAgent:
    """Build a scripted agent; ``policy`` may carry a parameter, e.g.
    ``"cobb_douglas(0.3)"`` or ``"malformed(no_fence)"``."""
    m = re.fullmatch(r"(\w+)(?:\((.*)\))?", policy.strip())
    if not m:
        raise ValueError(f"cannot parse policy {policy!r}")
    name, arg = m.group(1), m.group(2)
    if arg:
        if name == "cobb_douglas":
            kwargs["share"] = float(arg)
        elif name == "malformed":
            kwargs["mode"] = arg.strip()
        else:
            raise ValueError(f"policy {name!r} takes no argument")
    return ScriptedAgent(name, seed=seed, **kwargs)
