"""Simulator: canonical runs, consensus, determinism, counterexamples."""

from __future__ import annotations

import json

import pytest

from swarmproto import transport
from swarmproto.errors import ParseError, PreconditionError, ScenarioError
from swarmproto.eventlog import EventRecord
from swarmproto.sim import (
    canonical_run,
    consensus_check,
    enumerate_schedules,
    parse_scenario,
    run_scenario,
    scenario_from_obj,
    trace_to_ndjson,
)

SESSION = transport.SESSION_ID


def _rec(event_type, payload, lamport, node, seq):
    return EventRecord(event_type, payload, lamport, node, seq, SESSION)


def _auction_log(late_bid: bool = False) -> list[EventRecord]:
    records = [
        _rec("requested", {"id": "1", "from": "A", "to": "B"}, 1, "n1", 0),
        _rec("bid", {"robot": "agv1", "delay": 1}, 2, "n2", 0),
        _rec("bid", {"robot": "agv2", "delay": 2}, 3, "n3", 0),
        _rec("selected", {"winner": "agv1"}, 4, "n1", 1),
    ]
    if late_bid:
        records.append(_rec("bid", {"robot": "agv2", "delay": 2}, 5, "n3", 1))
    return records


# --------------------------------------------------------------------------
# Canonical run
# --------------------------------------------------------------------------


def test_canonical_run_full_auction(protocol) -> None:
    run = canonical_run(protocol, _auction_log(), SESSION)
    assert run.path == (0, 1, 1, 2)
    assert run.final_state == "doIt"
    assert run.discarded == ()


def test_canonical_run_empty(protocol) -> None:
    run = canonical_run(protocol, [], SESSION)
    assert run.path == ()
    assert run.final_state == "initial"


def test_canonical_run_discards_late_bid(protocol) -> None:
    run = canonical_run(protocol, _auction_log(late_bid=True), SESSION)
    assert run.path == (0, 1, 1, 2)
    assert run.final_state == "doIt"
    assert [r.key for r in run.discarded] == [("n3", 1)]


def test_canonical_run_multi_event_log() -> None:
    from swarmproto.model import protocol_from_obj

    p = protocol_from_obj(
        {
            "initial": "s0",
            "transitions": [
                {"source": "s0", "target": "s1", "label": {"cmd": "c", "logType": ["a", "b"], "role": "r"}},
                {"source": "s1", "target": "s0", "label": {"cmd": "d", "logType": ["z"], "role": "r"}},
            ],
        }
    )
    log = [
        _rec("a", {}, 1, "n1", 0),
        _rec("z", {}, 2, "n2", 0),  # interleaved: discarded, reaction stays open
        _rec("b", {}, 3, "n1", 1),
        _rec("z", {}, 4, "n2", 1),
    ]
    run = canonical_run(p, log, SESSION)
    assert run.path == (0, 1)
    assert [r.key for r in run.discarded] == [("n2", 0)]
    assert run.final_state == "s0"


# --------------------------------------------------------------------------
# Scenario runs
# --------------------------------------------------------------------------


def test_ok_scenario_seed_42_converges() -> None:
    scenario = scenario_from_obj(transport.ok_scenario_obj())
    result = run_scenario(scenario)
    assert result.report.converged
    assert result.report.canonical_path == (0, 1, 1, 2)
    for outcome in result.report.per_agent.values():
        assert outcome.matches
    assert result.report.per_agent["station"].final_state == "DoIt"


def test_single_node_scenario_always_converges() -> None:
    obj = transport.ok_scenario_obj()
    obj["agents"] = [obj["agents"][0]]
    obj["agents"][0]["strategy"] = [
        {"name": "once", "cmd": "request", "args": ["1", "a", "b"]},
        {"name": "select-after", "k": 1},
    ]
    obj["partitionSchedule"] = []
    scenario = scenario_from_obj(obj)
    for seed in (1, 7, 99):
        report = run_scenario(scenario, seed=seed).report
        assert report.converged


def test_trace_is_deterministic_and_complete() -> None:
    scenario = scenario_from_obj(transport.ok_scenario_obj())
    one = run_scenario(scenario)
    two = run_scenario(scenario)
    assert trace_to_ndjson(one.trace) == trace_to_ndjson(two.trace)

    # every record in any node log appears exactly once as an emission
    emitted = [
        f"{rec['nodeId']}/{rec['seq']}"
        for line in one.trace
        if line["kind"] == "invoke"
        for rec in line["records"]
    ]
    assert len(emitted) == len(set(emitted)) == 4
    # deliveries and drains only move records that were emitted
    moved = {
        key
        for line in one.trace
        if line["kind"] in ("deliver", "drain")
        for key in line["records"]
    }
    assert moved <= set(emitted)
    # everything an agent applied or discarded was emitted too
    for outcome in one.report.per_agent.values():
        assert set(outcome.discards) <= set(emitted)


def test_different_seeds_may_reorder_but_converge() -> None:
    scenario = scenario_from_obj(transport.ok_scenario_obj())
    for seed in range(1, 21):
        report = run_scenario(scenario, seed=seed).report
        assert report.converged, seed
        assert report.canonical_path == (0, 1, 1, 2)


def test_branch_blind_scenario_has_recorded_counterexample() -> None:
    scenario = scenario_from_obj(transport.branch_blind_scenario_obj())
    report = run_scenario(scenario, seed=1).report  # recorded diverging seed
    assert not report.converged
    robots = [report.per_agent["agv1"], report.per_agent["agv2"]]
    assert any(not o.matches for o in robots)
    stuck = next(o for o in robots if not o.matches)
    assert stuck.final_state == "Auction"  # never learns the auction closed
    assert report.per_agent["station"].matches  # divergence localized to robots


def test_actor_blind_scenario_has_recorded_counterexample() -> None:
    scenario = scenario_from_obj(transport.actor_blind_scenario_obj())
    report = run_scenario(scenario, seed=1).report
    assert not report.converged
    assert not report.per_agent["station"].matches
    assert report.per_agent["station"].final_state == "Initial"
    assert report.per_agent["agv1"].matches and report.per_agent["agv2"].matches


def test_consensus_check_requires_equal_logs() -> None:
    from swarmproto.sim import _build_agents

    scenario = scenario_from_obj(transport.ok_scenario_obj())
    agents = _build_agents(scenario)
    agents[0].node.append("requested", {"id": "1", "from": "a", "to": "b"}, SESSION)
    with pytest.raises(PreconditionError):
        consensus_check(scenario.protocol, scenario.subs, agents, SESSION)


# --------------------------------------------------------------------------
# Exhaustive enumeration
# --------------------------------------------------------------------------


def test_enumeration_ok_fixture_all_converge() -> None:
    scenario = scenario_from_obj(transport.ok_scenario_obj())
    result = enumerate_schedules(scenario, max_emitted=8)
    assert result.all_converged
    assert result.terminal_runs >= 1
    assert result.states_explored > result.terminal_runs


def test_enumeration_finds_counterexamples_for_mutants() -> None:
    for obj in (transport.branch_blind_scenario_obj(), transport.actor_blind_scenario_obj()):
        result = enumerate_schedules(scenario_from_obj(obj), max_emitted=8)
        assert not result.all_converged


def test_enumeration_bound_guard() -> None:
    scenario = scenario_from_obj(transport.ok_scenario_obj())
    with pytest.raises(ScenarioError):
        enumerate_schedules(scenario, max_emitted=2)


def test_random_wellformed_protocols_converge() -> None:
    # The headline soundness claim beyond the stock fixture: machines derived
    # from the projection, run over random schedules of random protocols that
    # pass the checker, always reach consensus.  Dropping either log-closure
    # direction or branch-cone separation makes this fail reliably.
    import random

    from conftest import closure_subs, generic_scenario_obj, random_protocol
    from swarmproto.wellformed import check_swarm_protocol

    rng = random.Random(9090)
    case = 0
    tried = 0
    while case < 40 and tried < 1000:
        tried += 1
        p = random_protocol(rng)
        if not p.transitions:
            continue
        subs = closure_subs(p)
        if not check_swarm_protocol(p, subs).ok:
            continue
        case += 1
        scenario = scenario_from_obj(generic_scenario_obj(p, subs, f"rand/{case}"))
        for seed in (1, 2, 3):
            report = run_scenario(scenario, seed=seed).report
            assert report.converged, (seed, report.divergences, p)


def test_random_small_protocols_converge_exhaustively() -> None:
    # Bounded model check on generated protocols small enough to enumerate.
    import random

    from conftest import closure_subs, generic_scenario_obj, random_protocol
    from swarmproto.wellformed import check_swarm_protocol

    rng = random.Random(9191)
    case = 0
    tried = 0
    while case < 12 and tried < 3000:
        tried += 1
        p = random_protocol(rng, max_states=4, max_roles=3, max_transitions=4)
        if not p.transitions:
            continue
        if sum(len(t.log_type) for t in set(p.transitions)) > 8:
            continue
        subs = closure_subs(p)
        if not check_swarm_protocol(p, subs).ok:
            continue
        case += 1
        scenario = scenario_from_obj(generic_scenario_obj(p, subs, f"enum/{case}"))
        result = enumerate_schedules(scenario, max_emitted=8)
        assert result.all_converged, (result.diverged, p)


# --------------------------------------------------------------------------
# Scenario parsing and validation
# --------------------------------------------------------------------------


def test_parse_scenario_roundtrips_fixture(fixtures_dir) -> None:
    scenario = parse_scenario((fixtures_dir / "scenario_ok.json").read_text())
    assert scenario.seed == 42
    assert scenario.max_steps == 200
    assert [a.agent_id for a in scenario.agents] == ["station", "agv1", "agv2"]
    assert scenario.partition_schedule[0].groups == (
        frozenset({"n1", "n2"}),
        frozenset({"n3"}),
    )


def test_scenario_validation_errors() -> None:
    base = transport.ok_scenario_obj()

    dup = json.loads(json.dumps(base))
    dup["agents"][1]["nodeId"] = "n1"
    with pytest.raises(ScenarioError):
        scenario_from_obj(dup)

    bad_role = json.loads(json.dumps(base))
    bad_role["agents"][1]["role"] = "ghost"
    with pytest.raises(ScenarioError):
        scenario_from_obj(bad_role)

    bad_machine = json.loads(json.dumps(base))
    bad_machine["agents"][1]["machine"] = "nope"
    with pytest.raises(ScenarioError):
        scenario_from_obj(bad_machine)

    bad_groups = json.loads(json.dumps(base))
    bad_groups["partitionSchedule"] = [{"fromStep": 0, "toStep": 5, "groups": [["n1"]]}]
    with pytest.raises(ScenarioError):
        scenario_from_obj(bad_groups)

    overlap = json.loads(json.dumps(base))
    overlap["partitionSchedule"] = [
        {"fromStep": 0, "toStep": 10, "groups": [["n1", "n2", "n3"]]},
        {"fromStep": 5, "toStep": 15, "groups": [["n1", "n2", "n3"]]},
    ]
    with pytest.raises(ScenarioError):
        scenario_from_obj(overlap)

    unknown_strategy = json.loads(json.dumps(base))
    unknown_strategy["agents"][1]["strategy"] = {"name": "chaos"}
    with pytest.raises(ParseError):
        scenario_from_obj(unknown_strategy)

    unknown_field = json.loads(json.dumps(base))
    unknown_field["surprise"] = 1
    with pytest.raises(ParseError):
        scenario_from_obj(unknown_field)
