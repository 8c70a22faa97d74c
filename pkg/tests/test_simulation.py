import pytest

from llmexp.budget_tasks import Allocation, TaskGenConfig, generate_rounds
from llmexp.llm_runtime.agents import REFUSAL_TEXT, FixtureError, ScriptedAgent, SequenceAgent, scripted_agent
from llmexp.llm_runtime.client import TransportError
from llmexp.llm_runtime.simulation import run_simulation
from llmexp.parsing import FIELD_NAMES
from llmexp.prompts import Condition, render_round_user, render_system

ROUNDS = generate_rounds("risk", TaskGenConfig(seed=8))


def clock():
    return "t"


def block(a, b, domain="risk"):
    f = FIELD_NAMES[domain]
    return f'```json\n{{"{f[0]}": {a}, "{f[1]}": {b}}}\n```'


def test_multi_turn_context_accumulates():
    agent = ScriptedAgent("fixed_midpoint")
    res, tr = run_simulation(Condition("risk"), agent, 1, rounds=ROUNDS, clock=clock)
    assert res.completed and len(res.decisions) == 25
    assert all(d == Allocation(50.0, 50.0) for d in res.decisions)
    third = agent.received[2]
    assert [m["role"] for m in third] == ["system", "user", "assistant", "user", "assistant", "user"]
    assert third[0]["content"] == render_system(Condition("risk"))
    assert third[1]["content"] == render_round_user(Condition("risk"), ROUNDS[0], True)
    assert third[5]["content"] == render_round_user(Condition("risk"), ROUNDS[2], False)


def test_invalid_reply_is_dropped_and_retried():
    agent = ScriptedAgent("corner_maximizer", faults={2: ["bad_json", "refusal"]})
    res, tr = run_simulation(Condition("risk"), agent, 1, rounds=ROUNDS, clock=clock)
    assert res.completed and res.invalid_count["format"] == 1 and res.invalid_count["refusal"] == 1
    # the retry of round 2 sees the same context as the first attempt
    assert agent.received[1] == agent.received[2] == agent.received[3]
    labels = [t.validity for t in tr.assistant_turns()]
    assert labels[:4] == ["valid", "format", "refusal", "valid"]
    assert res.n_assistant_turns == 27


def test_keep_invalid_context_switch():
    agent = ScriptedAgent("fixed_midpoint", faults={1: ["bad_sum"]})
    run_simulation(Condition("risk"), agent, 1, rounds=ROUNDS, keep_invalid_context=True, clock=clock)
    assert len(agent.received[1]) == 4  # system, bad exchange, repeated question


def test_retry_exhaustion_marks_incomplete():
    agent = ScriptedAgent("malformed", mode="no_fence")
    res, tr = run_simulation(Condition("risk"), agent, 1, rounds=ROUNDS, max_retries_per_round=3, clock=clock)
    assert not res.completed and res.decisions == []
    assert res.invalid_count["format"] == 4


def test_transport_errors_count_as_invalid():
    good = block(40, 60)
    agent = SequenceAgent([TransportError("boom"), good] + [good] * 24)
    res, tr = run_simulation(Condition("risk"), agent, 1, rounds=ROUNDS, clock=clock)
    assert res.completed and res.invalid_count["transport_error"] == 1


def test_single_turn_batch():
    agent = ScriptedAgent("cobb_douglas", share=0.3)
    cond = Condition("social", dialogue="single_turn")
    rounds = generate_rounds("social", TaskGenConfig(seed=2))
    res, tr = run_simulation(cond, agent, 1, rounds=rounds, clock=clock)
    assert res.completed and len(res.decisions) == 25 and len(agent.received) == 1
    assert all(d.points_a == pytest.approx(30.0) for d in res.decisions)


def test_single_turn_wrong_count_is_retried_whole():
    agent = ScriptedAgent("fixed_midpoint", faults={1: ["wrong_count"]})
    cond = Condition("risk", dialogue="single_turn")
    res, _ = run_simulation(cond, agent, 1, rounds=ROUNDS, clock=clock)
    assert res.completed and res.invalid_count["format"] == 1 and len(agent.received) == 2


def test_game_dialogue():
    agent = ScriptedAgent("corner_maximizer")
    res, tr = run_simulation(Condition("bomb_risk"), agent, 5, clock=clock)
    assert res.completed and res.decisions[0].value == 50.0
    assert [m["role"] for m in agent.received[1]] == ["system", "user", "assistant", "user"]
    assert agent.received[1][1]["content"] == "Hi, let's play a game."


def test_game_refusal_then_answer():
    agent = SequenceAgent(["Sure!", REFUSAL_TEXT, "I give [[$30]]."])
    res, _ = run_simulation(Condition("dictator"), agent, 5, clock=clock)
    assert res.decisions[0].value == 30.0 and res.invalid_count["refusal"] == 1


def test_choice_mode_agent_stays_on_grid():
    agent = ScriptedAgent("uniform_random", seed=3)
    res, _ = run_simulation(Condition("risk", answer_type="choice"), agent, 1, rounds=ROUNDS, clock=clock)
    assert res.completed and all(d.points_a % 5 == 0 for d in res.decisions)


def test_sink_receives_header_turns_and_result():
    records = []
    run_simulation(Condition("dictator"), ScriptedAgent(), 5, sink=records.append, clock=clock)
    assert records[0]["type"] == "header" and records[-1]["type"] == "result"
    assert {r["type"] for r in records[1:-1]} == {"turn"}


def test_generated_rounds_follow_seed():
    a, _ = run_simulation(Condition("risk"), ScriptedAgent(), 9, task_config=TaskGenConfig(), clock=clock)
    b, _ = run_simulation(Condition("risk"), ScriptedAgent(), 9, task_config=TaskGenConfig(), clock=clock)
    assert a.rounds == b.rounds == generate_rounds("risk", TaskGenConfig(seed=9))


def test_argument_checks():
    with pytest.raises(ValueError):
        run_simulation(Condition("risk"), ScriptedAgent(), 1, rounds=ROUNDS, max_retries_per_round=0)
    with pytest.raises(ValueError):
        run_simulation(Condition("social"), ScriptedAgent(), 1, rounds=ROUNDS)


def test_scripted_agent_factory():
    assert scripted_agent("cobb_douglas(0.25)").share == 0.25
    assert scripted_agent("malformed(refusal)").mode == "refusal"
    with pytest.raises(ValueError):
        scripted_agent("fixed_midpoint(3)")
    with pytest.raises(ValueError):
        scripted_agent("psychic")
    with pytest.raises(FixtureError):
        ScriptedAgent()([{"role": "user", "content": "What's the weather?"}])
