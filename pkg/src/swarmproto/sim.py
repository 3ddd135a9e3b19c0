"""Deterministic multi-node swarm simulation.

Each scenario step, a seeded RNG picks one enabled action: an agent's
strategy invokes a command, a random subset of one node's records is
delivered to another node in the same partition group, or nothing happens.
After the step budget, partitions heal, delivery drains to quiescence, and
the consensus predicate is evaluated: the run converged when every agent's
applied-record sequence and settled state match the projection of the
canonical protocol run onto its role.

The whole simulation is single-threaded and integer-seeded: identical
scenarios yield byte-identical traces.  ``enumerate_schedules`` replaces
the RNG with a depth-first walk over every schedule at single-record
delivery granularity, for bounded model checking of small fixtures.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping

from .errors import ParseError, PreconditionError, ScenarioError
from .eventlog import EventRecord, NodeLog, record_to_obj, records_to_ndjson
from .model import Subscriptions, SwarmProtocol, protocol_from_obj, roles_of
from .runner import MachineDefinition, MachineRunner, RunnerState, evaluate

# --------------------------------------------------------------------------
# Strategies: the closed set of named decision rules agents run
# --------------------------------------------------------------------------


class Strategy:
    """Decision rule mapping a settled state to an optional command call.

    ``propose`` must be pure given (state, memory, draw); strategies that
    ignore ``draw`` stay enumerable by the bounded model checker.
    """

    name: str = "?"

    def propose(
        self, state: RunnerState, memory: dict, draw: int
    ) -> tuple[str, list] | None:
        raise NotImplementedError

    def mark_invoked(self, memory: dict) -> None:
        """Called by the scheduler after the proposed command was invoked."""

    def to_obj(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Once(Strategy):
    """Invoke ``cmd`` with fixed arguments the first time it is enabled."""

    cmd: str
    args: tuple

    name = "once"

    def propose(self, state: RunnerState, memory: dict, draw: int):
        if memory.get("fired") or self.cmd not in state.enabled_commands:
            return None
        return (self.cmd, list(self.args))

    def mark_invoked(self, memory: dict) -> None:
        memory["fired"] = True

    def to_obj(self):
        return {"name": "once", "cmd": self.cmd, "args": list(self.args)}


@dataclass(frozen=True)
class BidOnce(Strategy):
    """Bid with a fixed delay while the agent's own id is absent from the
    observed scores (the bid has not come back yet)."""

    delay: int

    name = "bid-once"

    def propose(self, state: RunnerState, memory: dict, draw: int):
        if "bid" not in state.enabled_commands:
            return None
        payload = state.payload
        if not isinstance(payload, dict) or "scores" not in payload:
            return None
        own = payload.get("robot")
        if any(s.get("robot") == own for s in payload["scores"]):
            return None
        return ("bid", [self.delay])

    def to_obj(self):
        return {"name": "bid-once", "delay": self.delay}


@dataclass(frozen=True)
class SelectAfter(Strategy):
    """Select a winner once at least ``k`` bids have been observed."""

    k: int

    name = "select-after"

    def propose(self, state: RunnerState, memory: dict, draw: int):
        if "select" not in state.enabled_commands:
            return None
        payload = state.payload
        if not isinstance(payload, dict) or len(payload.get("scores", ())) < self.k:
            return None
        return ("select", [])

    def to_obj(self):
        return {"name": "select-after", "k": self.k}


@dataclass(frozen=True)
class Idle(Strategy):
    """Never invoke anything (pure observer)."""

    name = "idle"

    def propose(self, state: RunnerState, memory: dict, draw: int):
        return None

    def to_obj(self):
        return {"name": "idle"}


def strategy_from_obj(obj: Any, path: str) -> Strategy:
    if not isinstance(obj, dict) or "name" not in obj:
        raise ParseError(path, "expected a strategy object with a name")
    name = obj["name"]
    fields_for = {
        "once": {"name", "cmd", "args"},
        "bid-once": {"name", "delay"},
        "select-after": {"name", "k"},
        "idle": {"name"},
    }
    if name not in fields_for:
        raise ParseError(f"{path}.name", f"unknown strategy '{name}'")
    unknown = set(obj) - fields_for[name]
    if unknown:
        raise ParseError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    if name == "once":
        if not isinstance(obj.get("cmd"), str) or not obj["cmd"]:
            raise ParseError(f"{path}.cmd", "expected a non-empty string")
        if not isinstance(obj.get("args"), list):
            raise ParseError(f"{path}.args", "expected an array")
        return Once(cmd=obj["cmd"], args=tuple(obj["args"]))
    if name == "bid-once":
        if not isinstance(obj.get("delay"), int):
            raise ParseError(f"{path}.delay", "expected an integer")
        return BidOnce(delay=obj["delay"])
    if name == "select-after":
        if not isinstance(obj.get("k"), int) or obj["k"] < 1:
            raise ParseError(f"{path}.k", "expected an integer >= 1")
        return SelectAfter(k=obj["k"])
    return Idle()


# --------------------------------------------------------------------------
# Machine registry: named definitions scenario files can reference
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MachineEntry:
    definition: MachineDefinition
    payload_factory: Callable[[str], Any]  # agent id -> initial payload


MACHINE_REGISTRY: dict[str, MachineEntry] = {}


def register_machine(
    name: str, definition: MachineDefinition, payload_factory: Callable[[str], Any]
) -> None:
    definition.validate()
    MACHINE_REGISTRY[name] = MachineEntry(definition, payload_factory)


def _ensure_builtin_machines() -> None:
    from . import transport  # noqa: F401  (registers its machines on import)


# --------------------------------------------------------------------------
# Scenario model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentSpec:
    """One participant: its role, machine, node, and decision rules.

    ``strategies`` is an ordered list; each step the first rule that
    proposes a command wins.  The initial payload comes from the machine
    registry's payload factory applied to ``agent_id``.
    """

    agent_id: str
    role: str
    machine: str
    node_id: str
    strategies: tuple[Strategy, ...]


@dataclass(frozen=True)
class PartitionWindow:
    """During steps ``from_step <= step < to_step`` delivery is only
    possible inside each group."""

    from_step: int
    to_step: int
    groups: tuple[frozenset[str], ...]


@dataclass(frozen=True)
class Scenario:
    protocol: SwarmProtocol
    subs: Subscriptions
    agents: tuple[AgentSpec, ...]
    session_id: str
    seed: int
    max_steps: int
    partition_schedule: tuple[PartitionWindow, ...] = ()

    def validate(self) -> None:
        node_ids = [a.node_id for a in self.agents]
        if len(set(node_ids)) != len(node_ids):
            raise ScenarioError("node ids must be unique")
        agent_ids = [a.agent_id for a in self.agents]
        if len(set(agent_ids)) != len(agent_ids):
            raise ScenarioError("agent ids must be unique")
        roles = roles_of(self.protocol)
        for a in self.agents:
            if a.role not in roles:
                raise ScenarioError(f"agent '{a.agent_id}': role '{a.role}' not in protocol")
            if a.role not in self.subs:
                raise ScenarioError(f"agent '{a.agent_id}': role '{a.role}' has no subscription")
            if a.machine not in MACHINE_REGISTRY:
                raise ScenarioError(f"agent '{a.agent_id}': unknown machine '{a.machine}'")
        if self.max_steps < 0:
            raise ScenarioError("maxSteps must be >= 0")
        nodes = set(node_ids)
        for w in self.partition_schedule:
            if w.from_step >= w.to_step:
                raise ScenarioError("partition window must have fromStep < toStep")
            listed = [n for g in w.groups for n in g]
            if sorted(listed) != sorted(nodes):
                raise ScenarioError("partition groups must partition the node ids")
        windows = sorted((w.from_step, w.to_step) for w in self.partition_schedule)
        for (_, end), (start, _) in zip(windows, windows[1:]):
            if start < end:
                raise ScenarioError("partition windows must not overlap")


def parse_scenario(text: str) -> Scenario:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("scenario", f"invalid JSON: {exc}") from None
    return scenario_from_obj(obj)


def scenario_from_obj(obj: Any, path: str = "scenario") -> Scenario:
    _ensure_builtin_machines()
    if not isinstance(obj, dict):
        raise ParseError(path, "expected an object")
    allowed = {"protocol", "subs", "agents", "sessionId", "seed", "maxSteps", "partitionSchedule"}
    required = allowed - {"partitionSchedule"}
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    missing = required - set(obj)
    if missing:
        raise ParseError(f"{path}.{sorted(missing)[0]}", "missing field")

    protocol = protocol_from_obj(obj["protocol"], f"{path}.protocol")
    raw_subs = obj["subs"]
    if not isinstance(raw_subs, dict):
        raise ParseError(f"{path}.subs", "expected an object")
    subs: Subscriptions = {}
    for role, types in raw_subs.items():
        if not isinstance(types, list):
            raise ParseError(f"{path}.subs.{role}", "expected an array")
        subs[role] = frozenset(types)

    if not isinstance(obj["agents"], list):
        raise ParseError(f"{path}.agents", "expected an array")
    agents = []
    for i, item in enumerate(obj["agents"]):
        apath = f"{path}.agents[{i}]"
        if not isinstance(item, dict):
            raise ParseError(apath, "expected an object")
        afields = {"agentId", "role", "machine", "nodeId", "strategy"}
        unknown = set(item) - afields
        if unknown:
            raise ParseError(f"{apath}.{sorted(unknown)[0]}", "unknown field")
        missing = afields - set(item)
        if missing:
            raise ParseError(f"{apath}.{sorted(missing)[0]}", "missing field")
        raw_strategy = item["strategy"]
        if isinstance(raw_strategy, list):
            strategies = tuple(
                strategy_from_obj(s, f"{apath}.strategy[{j}]") for j, s in enumerate(raw_strategy)
            )
        else:
            strategies = (strategy_from_obj(raw_strategy, f"{apath}.strategy"),)
        agents.append(
            AgentSpec(
                agent_id=item["agentId"],
                role=item["role"],
                machine=item["machine"],
                node_id=item["nodeId"],
                strategies=strategies,
            )
        )

    windows = []
    for i, item in enumerate(obj.get("partitionSchedule", [])):
        wpath = f"{path}.partitionSchedule[{i}]"
        if not isinstance(item, dict) or set(item) != {"fromStep", "toStep", "groups"}:
            raise ParseError(wpath, "expected an object with fromStep, toStep, groups")
        groups = tuple(frozenset(g) for g in item["groups"])
        windows.append(PartitionWindow(item["fromStep"], item["toStep"], groups))

    if not isinstance(obj["sessionId"], str) or not obj["sessionId"]:
        raise ParseError(f"{path}.sessionId", "expected a non-empty string")
    if not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
        raise ParseError(f"{path}.seed", "expected an integer")
    if not isinstance(obj["maxSteps"], int) or isinstance(obj["maxSteps"], bool):
        raise ParseError(f"{path}.maxSteps", "expected an integer")

    scenario = Scenario(
        protocol=protocol,
        subs=subs,
        agents=tuple(agents),
        session_id=obj["sessionId"],
        seed=obj["seed"],
        max_steps=obj["maxSteps"],
        partition_schedule=tuple(windows),
    )
    scenario.validate()
    return scenario


# --------------------------------------------------------------------------
# Canonical protocol run: the omniscient reference semantics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CanonicalRun:
    """Result of folding a merged log through the protocol graph itself.

    ``path`` lists the indices of the protocol transitions taken, in order
    (including a trailing transition whose multi-event log is still open at
    the end of the log).  Records matching no open position are discarded.
    """

    path: tuple[int, ...]
    final_state: str
    applied: tuple[EventRecord, ...]
    discarded: tuple[EventRecord, ...]


def canonical_run(
    p: SwarmProtocol, merged_log: Iterable[EventRecord], session_id: str
) -> CanonicalRun:
    """Reference run: the protocol executed synchronously over the total order."""
    state = p.initial
    path: list[int] = []
    applied: list[EventRecord] = []
    discarded: list[EventRecord] = []
    open_idx: int | None = None
    pos = 0
    for rec in merged_log:
        if rec.session_id != session_id:
            continue
        if open_idx is not None:
            t = p.transitions[open_idx]
            if rec.event_type == t.log_type[pos]:
                applied.append(rec)
                pos += 1
                if pos == len(t.log_type):
                    state = t.target
                    open_idx = None
            else:
                discarded.append(rec)
            continue
        chosen = None
        for i, t in p.outgoing(state):
            if t.log_type and t.log_type[0] == rec.event_type:
                chosen = i
                break
        if chosen is None:
            discarded.append(rec)
            continue
        path.append(chosen)
        applied.append(rec)
        t = p.transitions[chosen]
        if len(t.log_type) == 1:
            state = t.target
        else:
            open_idx = chosen
            pos = 1
    return CanonicalRun(
        path=tuple(path),
        final_state=state,
        applied=tuple(applied),
        discarded=tuple(discarded),
    )


# --------------------------------------------------------------------------
# Consensus predicate
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentOutcome:
    final_state: str
    expected_state: str
    matches: bool
    discards: tuple[str, ...]
    invalidations: tuple[str, ...]


@dataclass(frozen=True)
class ConsensusReport:
    converged: bool
    canonical_path: tuple[int, ...]
    per_agent: dict[str, AgentOutcome]
    divergences: tuple[str, ...]

    def to_obj(self) -> dict[str, Any]:
        return {
            "converged": self.converged,
            "canonicalPath": list(self.canonical_path),
            "perAgent": {
                aid: {
                    "finalState": o.final_state,
                    "expectedState": o.expected_state,
                    "matches": o.matches,
                    "discards": list(o.discards),
                    "invalidations": list(o.invalidations),
                }
                for aid, o in sorted(self.per_agent.items())
            },
            "divergences": list(self.divergences),
        }


def _key_str(key: tuple[str, int]) -> str:
    return f"{key[0]}/{key[1]}"


@dataclass
class AgentRuntime:
    """Live state of one agent during a simulation."""

    spec: AgentSpec
    definition: MachineDefinition
    initial_payload: Any
    node: NodeLog
    runner: MachineRunner
    memories: list[dict] = field(default_factory=list)


def consensus_check(
    p: SwarmProtocol,
    subs: Mapping[str, frozenset[str]],
    agents: list[AgentRuntime],
    session_id: str,
) -> ConsensusReport:
    """Evaluate eventual consensus at quiescence.

    Precondition: replication has completed (all known logs are identical).
    The canonical run is projected onto each agent by filtering its applied
    records through the agent's role subscription; the agent matches when it
    applied exactly that record sequence and settled in the state its own
    machine reaches on it.
    """
    serialized = [records_to_ndjson(a.node.known) for a in agents]
    if len(set(serialized)) > 1:
        raise PreconditionError("node logs differ; heal and drain delivery first")

    common = agents[0].node.known if agents else []
    canonical = canonical_run(p, common, session_id)

    per_agent: dict[str, AgentOutcome] = {}
    divergences: list[str] = []
    for agent in agents:
        role_types = subs[agent.spec.role]
        expected_records = [r for r in canonical.applied if r.event_type in role_types]
        expected_state, _ = evaluate(
            agent.definition,
            agent.initial_payload,
            expected_records,
            session_id,
            subscription=frozenset(role_types),
        )
        actual = [r.key for r in agent.runner.applied_records]
        expected = [r.key for r in expected_records]
        state_ok = agent.runner.state.state_name == expected_state.state_name
        matches = actual == expected and state_ok
        if not matches:
            extra = [k for k in actual if k not in set(expected)]
            missing = [k for k in expected if k not in set(actual)]
            detail = []
            if extra:
                detail.append(f"applied off-path records {[_key_str(k) for k in extra]}")
            if missing:
                detail.append(f"missed canonical records {[_key_str(k) for k in missing]}")
            if not state_ok:
                detail.append(
                    f"settled in '{agent.runner.state.state_name}' "
                    f"instead of '{expected_state.state_name}'"
                )
            divergences.append(
                f"agent '{agent.spec.agent_id}' (role '{agent.spec.role}'): " + "; ".join(detail)
            )
        per_agent[agent.spec.agent_id] = AgentOutcome(
            final_state=agent.runner.state.state_name,
            expected_state=expected_state.state_name,
            matches=matches,
            discards=tuple(
                _key_str(rep.record.key) for rep in agent.runner.current_discards
            ),
            invalidations=tuple(
                _key_str(k) for k in sorted(agent.runner.invalidated_keys)
            ),
        )

    converged = all(o.matches for o in per_agent.values())
    return ConsensusReport(
        converged=converged,
        canonical_path=canonical.path,
        per_agent=per_agent,
        divergences=tuple(divergences),
    )


# --------------------------------------------------------------------------
# The seeded scheduler
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    trace: tuple[dict, ...]
    report: ConsensusReport


def trace_to_ndjson(trace: Iterable[dict]) -> str:
    return "".join(
        json.dumps(line, sort_keys=True, separators=(",", ":")) + "\n" for line in trace
    )


def _build_agents(scenario: Scenario) -> list[AgentRuntime]:
    _ensure_builtin_machines()
    agents: list[AgentRuntime] = []
    for spec in scenario.agents:
        entry = MACHINE_REGISTRY[spec.machine]
        payload = entry.payload_factory(spec.agent_id)
        node = NodeLog(node_id=spec.node_id)
        runner = MachineRunner(
            entry.definition,
            payload,
            scenario.session_id,
            subscription=frozenset(scenario.subs[spec.role]),
        )
        agents.append(
            AgentRuntime(
                spec=spec,
                definition=entry.definition,
                initial_payload=payload,
                node=node,
                runner=runner,
                memories=[{} for _ in spec.strategies],
            )
        )
    return agents


def _group_of(scenario: Scenario, step: int, node_id: str) -> int:
    for w in scenario.partition_schedule:
        if w.from_step <= step < w.to_step:
            for gi, group in enumerate(w.groups):
                if node_id in group:
                    return gi
    return 0


def _propose(agent: AgentRuntime, draw: int) -> tuple[int, str, list] | None:
    state = agent.runner.state
    for si, strategy in enumerate(agent.spec.strategies):
        decision = strategy.propose(state, agent.memories[si], draw)
        if decision is not None:
            return (si, decision[0], decision[1])
    return None


def run_scenario(scenario: Scenario, seed: int | None = None) -> RunResult:
    """Run one seeded simulation to quiescence and evaluate consensus.

    ``seed`` overrides the scenario's own seed (for sweeps).  The trace has
    one line per scheduler action; every emitted record appears exactly once
    in an ``invoke`` line.
    """
    _ensure_builtin_machines()
    scenario.validate()
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    rng = random.Random(scenario.seed)
    agents = _build_agents(scenario)
    trace: list[dict] = []

    for step in range(scenario.max_steps):
        draw = rng.randrange(2**32)
        actions: list[tuple] = []
        for ai, agent in enumerate(agents):
            proposal = _propose(agent, draw)
            if proposal is not None:
                actions.append(("invoke", ai, proposal))
        for si, src in enumerate(agents):
            for di, dst in enumerate(agents):
                if si == di:
                    continue
                if _group_of(scenario, step, src.spec.node_id) != _group_of(
                    scenario, step, dst.spec.node_id
                ):
                    continue
                if src.node.undelivered_for(dst.node):
                    actions.append(("deliver", si, di))
        actions.append(("noop",))

        action = actions[rng.randrange(len(actions))]
        if action[0] == "invoke":
            _, ai, (si, cmd, args) = action
            agent = agents[ai]
            records = agent.runner.invoke(cmd, args, agent.node)
            agent.spec.strategies[si].mark_invoked(agent.memories[si])
            agent.runner.advance(records)
            trace.append(
                {
                    "step": step,
                    "kind": "invoke",
                    "agent": agent.spec.agent_id,
                    "cmd": cmd,
                    "args": args,
                    "records": [record_to_obj(r) for r in records],
                }
            )
        elif action[0] == "deliver":
            _, si, di = action
            src, dst = agents[si], agents[di]
            undelivered = src.node.undelivered_for(dst.node)
            count = 1 + rng.randrange(len(undelivered))
            # subset selection via randrange only, for cross-platform streams
            pool = list(range(len(undelivered)))
            picked = [pool.pop(rng.randrange(len(pool))) for _ in range(count)]
            picked.sort()
            batch = [undelivered[i] for i in picked]
            dst.node.receive(batch)
            dst.runner.advance(batch)
            trace.append(
                {
                    "step": step,
                    "kind": "deliver",
                    "from": src.spec.node_id,
                    "to": dst.spec.node_id,
                    "records": [_key_str(r.key) for r in batch],
                }
            )
        else:
            trace.append({"step": step, "kind": "noop"})

    _drain(agents, trace, scenario.max_steps)
    report = consensus_check(scenario.protocol, scenario.subs, agents, scenario.session_id)
    return RunResult(trace=tuple(trace), report=report)


def _drain(agents: list[AgentRuntime], trace: list[dict], step0: int) -> None:
    """Heal all partitions and run full pairwise delivery to quiescence."""
    step = step0
    changed = True
    while changed:
        changed = False
        for si, src in enumerate(agents):
            for di, dst in enumerate(agents):
                if si == di:
                    continue
                batch = src.node.undelivered_for(dst.node)
                if not batch:
                    continue
                dst.node.receive(batch)
                dst.runner.advance(batch)
                trace.append(
                    {
                        "step": step,
                        "kind": "drain",
                        "from": src.spec.node_id,
                        "to": dst.spec.node_id,
                        "records": [_key_str(r.key) for r in batch],
                    }
                )
                step += 1
                changed = True


# --------------------------------------------------------------------------
# Exhaustive schedule enumeration (bounded model check)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EnumerationResult:
    states_explored: int
    terminal_runs: int
    diverged: tuple[str, ...]

    @property
    def all_converged(self) -> bool:
        return not self.diverged


def enumerate_schedules(scenario: Scenario, max_emitted: int = 8) -> EnumerationResult:
    """Explore every schedule of the scenario and check consensus at each
    quiescent endpoint.

    Nondeterminism is step order only: each branch either lets one agent's
    first willing strategy invoke, or delivers the single oldest undelivered
    record between one node pair.  The partition schedule is ignored —
    arbitrary delivery delay is already part of the explored space.  Raises
    :class:`ScenarioError` when a run would emit more than ``max_emitted``
    events, as a guard for the bounded-model-check scope.
    """
    _ensure_builtin_machines()
    scenario.validate()
    seen: set[tuple] = set()
    diverged: list[str] = []
    terminals = 0

    initial = _enum_snapshot(_build_agents(scenario))
    stack = [initial]
    while stack:
        snap = stack.pop()
        if snap in seen:
            continue
        seen.add(snap)
        agents = _enum_restore(scenario, snap)

        actions: list[tuple] = []
        for ai, agent in enumerate(agents):
            proposal = _propose(agent, draw=0)
            if proposal is not None:
                actions.append(("invoke", ai, proposal))
        for si, src in enumerate(agents):
            for di, dst in enumerate(agents):
                if si != di and src.node.undelivered_for(dst.node):
                    actions.append(("deliver", si, di))

        if not actions:
            terminals += 1
            report = consensus_check(
                scenario.protocol, scenario.subs, agents, scenario.session_id
            )
            if not report.converged:
                diverged.extend(report.divergences)
            continue

        for action in actions:
            branch = _enum_restore(scenario, snap)
            if action[0] == "invoke":
                _, ai, (si, cmd, args) = action
                agent = branch[ai]
                emitted = sum(len(a.node.own) for a in branch)
                records = agent.runner.invoke(cmd, args, agent.node)
                if emitted + len(records) > max_emitted:
                    raise ScenarioError(
                        f"enumeration bound exceeded: more than {max_emitted} emitted events"
                    )
                agent.spec.strategies[si].mark_invoked(agent.memories[si])
                agent.runner.advance(records)
            else:
                _, si, di = action
                batch = branch[si].node.undelivered_for(branch[di].node)[:1]
                branch[di].node.receive(batch)
                branch[di].runner.advance(batch)
            stack.append(_enum_snapshot(branch))

    return EnumerationResult(
        states_explored=len(seen),
        terminal_runs=terminals,
        diverged=tuple(diverged),
    )


def _enum_snapshot(agents: list[AgentRuntime]) -> tuple:
    """Canonical immutable world state: per agent, the known log plus the
    path-dependent bits (command lock, strategy memories)."""
    parts = []
    for agent in agents:
        parts.append(
            (
                records_to_ndjson(agent.node.known),
                agent.runner._locked,
                tuple(tuple(sorted(m.items())) for m in agent.memories),
            )
        )
    return tuple(parts)


def _enum_restore(scenario: Scenario, snap: tuple) -> list[AgentRuntime]:
    """Rebuild live agents from a snapshot: runner state is a pure function
    of the merged log, so replaying the known records reconstructs it."""
    from .eventlog import records_from_ndjson

    agents = _build_agents(scenario)
    for agent, (known_ndjson, locked, memories) in zip(agents, snap):
        records = records_from_ndjson(known_ndjson)
        own = [r for r in records if r.node_id == agent.node.node_id]
        agent.node.own = sorted(own, key=lambda r: r.seq)
        agent.node.receive(records)
        agent.runner.advance(records)
        agent.runner._locked = locked
        agent.memories = [dict(items) for items in memories]
    return agents
