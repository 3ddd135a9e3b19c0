"""Shared fixtures: the transport-order example and random-instance generators."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from swarmproto import transport
from swarmproto.model import Input, ProtocolTransition, Subscriptions, SwarmProtocol
from swarmproto.projection import ProjectedMachine
from swarmproto.runner import MachineDefinition
from swarmproto.wellformed import check_swarm_protocol

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def protocol() -> SwarmProtocol:
    return transport.PROTOCOL


@pytest.fixture
def full_subs() -> Subscriptions:
    return dict(transport.FULL_SUBS)


# --------------------------------------------------------------------------
# Random instance generators (seeded; used by property-style tests)
# --------------------------------------------------------------------------


def random_protocol(
    rng: random.Random,
    max_states: int = 8,
    max_roles: int = 4,
    max_transitions: int = 12,
) -> SwarmProtocol:
    """A structurally sane random protocol: connected from the initial state,
    non-empty logs of globally fresh event types (so guards never clash and
    no event type is reused)."""
    states = [f"s{i}" for i in range(rng.randrange(1, max_states + 1))]
    roles = [f"r{i}" for i in range(rng.randrange(1, max_roles + 1))]
    transitions: list[ProtocolTransition] = []
    reached = [states[0]]
    next_event = 0
    for i in range(rng.randrange(0, max_transitions + 1)):
        source = reached[rng.randrange(len(reached))]
        target = states[rng.randrange(len(states))]
        log_len = 1 + rng.randrange(3)
        log = tuple(f"e{next_event + j}" for j in range(log_len))
        next_event += log_len
        transitions.append(
            ProtocolTransition(
                source=source,
                target=target,
                cmd=f"c{i}",
                role=roles[rng.randrange(len(roles))],
                log_type=log,
            )
        )
        if target not in reached:
            reached.append(target)
    return SwarmProtocol(initial=states[0], transitions=tuple(transitions))


def closure_subs(p: SwarmProtocol) -> Subscriptions:
    """Smallest subscription satisfying the visibility conditions, by
    fixpoint iteration; used to seed generated well-formed pairs."""
    subs: dict[str, set[str]] = {t.role: set() for t in p.transitions}
    outgoing: dict[str, list[ProtocolTransition]] = {}
    for t in p.transitions:
        outgoing.setdefault(t.source, []).append(t)

    def states_from(state: str) -> set[str]:
        seen = {state}
        todo = [state]
        while todo:
            s = todo.pop()
            for t in outgoing.get(s, ()):
                if t.target not in seen:
                    seen.add(t.target)
                    todo.append(t.target)
        return seen

    changed = True
    while changed:
        changed = False

        def add(role: str, ev: str) -> None:
            nonlocal changed
            if ev not in subs[role]:
                subs[role].add(ev)
                changed = True

        for t in p.transitions:
            for ev in t.log_type:
                add(t.role, ev)
            for later in outgoing.get(t.target, ()):
                add(later.role, t.log_type[0])
        for state, outs in outgoing.items():
            if len(outs) < 2:
                continue
            involved = set()
            for s in states_from(state):
                for t in outgoing.get(s, ()):
                    involved.add(t.role)
                    emitted = set(t.log_type)
                    for role, types in subs.items():
                        if types & emitted:
                            involved.add(role)
            for role in involved:
                for t in outs:
                    add(role, t.log_type[0])
        for t in p.transitions:
            for role, types in subs.items():
                if types & set(t.log_type):
                    add(role, t.log_type[0])
                if t.log_type[0] in types:
                    add(role, t.log_type[-1])

        # branch-cone separation: a role seeing a guard of a choice must not
        # conflate the branching state with states inside the branch cones
        for role, types in subs.items():
            parent = {st: st for st in p.states()}

            def find(x: str) -> str:
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for t in p.transitions:
                if not (set(t.log_type) & types):
                    ra, rb = find(t.source), find(t.target)
                    if ra != rb:
                        parent[rb] = ra
            for state, outs in outgoing.items():
                if len(outs) < 2 or not any(t.log_type[0] in types for t in outs):
                    continue
                cone: set[str] = set()
                for t in outs:
                    cone |= states_from(t.target)
                if any(q != state and find(q) == find(state) for q in cone):
                    for t in p.transitions:
                        if not (set(t.log_type) & types) and find(t.source) == find(state):
                            add(role, t.log_type[0])
                            break

    return {role: frozenset(types) for role, types in subs.items()}


def generic_definition(projected: ProjectedMachine, role: str) -> MachineDefinition:
    """A runnable machine for a projected shape: the payload collects applied
    event types, commands emit empty payloads.  Chains are rebuilt from the
    provenance map (edges of one protocol transition share an origin)."""
    shape = projected.shape
    by_origin: dict[int, list] = {}
    for idx in sorted(projected.provenance):
        by_origin.setdefault(projected.provenance[idx], []).append(shape.transitions[idx])
    d = MachineDefinition(role=role, initial=shape.initial)
    for origin in sorted(by_origin):
        ts = by_origin[origin]
        inputs = [t for t in ts if isinstance(t.label, Input)]
        if inputs:
            types = [t.label.event_type for t in inputs]
            d.state(inputs[0].source).state(inputs[-1].target)
            d.react(
                inputs[0].source,
                types,
                inputs[-1].target,
                lambda p, recs: p + [r.event_type for r in recs],
            )
        for t in ts:
            if not isinstance(t.label, Input):
                emission_count = len(t.label.log_type)
                d.state(t.source)
                d.command(
                    t.source,
                    t.label.cmd,
                    list(t.label.log_type),
                    (lambda k: (lambda p: [{} for _ in range(k)]))(emission_count),
                )
    return d


def generic_scenario_obj(
    p: SwarmProtocol, subs: Subscriptions, tag: str, max_steps: int = 150
) -> dict:
    """Scenario running one agent per role, each firing every command of its
    role at most once.  Registers the generic machines under ``tag``."""
    from swarmproto.model import protocol_to_obj, subscriptions_to_obj
    from swarmproto.projection import project
    from swarmproto.sim import register_machine

    agents = []
    for i, role in enumerate(sorted(subs)):
        name = f"{tag}/{role}"
        register_machine(name, generic_definition(project(p, subs, role), role), lambda a: [])
        cmds = []
        for t in p.transitions:
            if t.role == role and t.cmd not in cmds:
                cmds.append(t.cmd)
        agents.append(
            {
                "agentId": f"a{i}",
                "role": role,
                "machine": name,
                "nodeId": f"n{i}",
                "strategy": [{"name": "once", "cmd": c, "args": []} for c in cmds]
                or {"name": "idle"},
            }
        )
    return {
        "protocol": protocol_to_obj(p),
        "subs": subscriptions_to_obj(subs),
        "agents": agents,
        "sessionId": "t",
        "seed": 1,
        "maxSteps": max_steps,
    }


def random_wellformed_pair(rng: random.Random) -> tuple[SwarmProtocol, Subscriptions] | None:
    """One random protocol plus a subscription that passes the checker, or
    None when the sampled variant fails (callers filter)."""
    p = random_protocol(rng)
    base = closure_subs(p)
    variant = rng.randrange(3)
    if variant == 0:
        subs = base
    elif variant == 1:
        all_types = frozenset(e for t in p.transitions for e in t.log_type)
        subs = {role: all_types for role in base}
    else:
        all_types = sorted({e for t in p.transitions for e in t.log_type})
        subs = {
            role: frozenset(
                set(types) | {e for e in all_types if rng.randrange(4) == 0}
            )
            for role, types in base.items()
        }
    if not check_swarm_protocol(p, subs).ok:
        return None
    return p, subs
