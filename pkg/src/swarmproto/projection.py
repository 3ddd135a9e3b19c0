"""Role projection of swarm protocols and machine conformance checking.

``project`` derives the local machine a role should run: protocol transition
logs are filtered by the role's subscription, surviving event sequences
become chains of input edges, and transitions rendered invisible by the
filter merge their endpoint states (an unobserved hop is indistinguishable
locally).  ``check_projection`` compares an implemented machine shape
against the projection by a synchronized walk: equivalence is bisimulation
on deterministic machines, so state names and redundant states are
irrelevant.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Mapping

from .errors import PreconditionError, ProjectionAmbiguity
from .model import (
    CheckResult,
    Diagnostic,
    Execute,
    Input,
    MachineShape,
    MachineTransition,
    SwarmProtocol,
)

PROJ_MISSING_REACTION = "PROJ_MISSING_REACTION"
PROJ_EXTRA_REACTION = "PROJ_EXTRA_REACTION"
PROJ_CMD_SET_MISMATCH = "PROJ_CMD_SET_MISMATCH"
PROJ_TARGET_MISMATCH = "PROJ_TARGET_MISMATCH"
PROJ_SUBSCRIPTION_MISMATCH = "PROJ_SUBSCRIPTION_MISMATCH"


@dataclass(frozen=True)
class ProjectedMachine:
    """A projected machine shape plus provenance back to the protocol.

    ``provenance`` maps indices of ``shape.transitions`` to the protocol
    transition index each edge was derived from.
    """

    shape: MachineShape
    provenance: dict[int, int]


class _UnionFind:
    def __init__(self, items: set[str]) -> None:
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def project(
    p: SwarmProtocol, subs: Mapping[str, frozenset[str]], role: str
) -> ProjectedMachine:
    """Project ``p`` onto ``role`` under the role's subscription.

    For each protocol transition, the retained subsequence of its log
    becomes a chain of input edges through synthetic states; a fully
    filtered transition identifies its endpoints instead.  Commands of the
    acting role attach to (the class of) the transition's source and carry
    the full emitted log, even where the subscription drops part of it.

    Raises :class:`ProjectionAmbiguity` when the quotient would give one
    state two same-typed inputs with different targets; that cannot happen
    for protocols passing the determinacy conditions.
    """
    if role not in subs:
        raise PreconditionError(f"role '{role}' has no subscription entry")
    retained = subs[role]

    uf = _UnionFind(p.states())
    for t in p.transitions:
        if not any(e in retained for e in t.log_type):
            uf.union(t.source, t.target)

    # Canonical class names: smallest member state name.
    members: dict[str, list[str]] = {}
    for s in p.states():
        members.setdefault(uf.find(s), []).append(s)
    class_name = {root: min(group) for root, group in members.items()}

    def cls(state: str) -> str:
        return class_name[uf.find(state)]

    edges: list[tuple[str, str, str, int]] = []  # (source, event type, target, protocol index)
    edge_target: dict[tuple[str, str], str] = {}
    synth_count: dict[str, int] = {}

    def add_edge(src: str, ev: str, dst: str, origin: int) -> None:
        key = (src, ev)
        known = edge_target.get(key)
        if known is None:
            edge_target[key] = dst
            edges.append((src, ev, dst, origin))
        elif known != dst:
            raise ProjectionAmbiguity(
                f"state '{src}' would have input '{ev}' leading to both "
                f"'{known}' and '{dst}' (protocol transition {origin})"
            )

    commands: list[tuple[str, str, tuple[str, ...], int]] = []  # (state, cmd, log, origin)
    seen_commands: set[tuple[str, str, tuple[str, ...]]] = set()

    for i, t in enumerate(p.transitions):
        source = cls(t.source)
        if t.role == role:
            key = (source, t.cmd, t.log_type)
            if key not in seen_commands:
                seen_commands.add(key)
                commands.append((source, t.cmd, t.log_type, i))
        filtered = [e for e in t.log_type if e in retained]
        if not filtered:
            continue
        current = source
        for ev in filtered[:-1]:
            synth_count[source] = synth_count.get(source, 0) + 1
            synth = f"{source}|{synth_count[source]}"
            add_edge(current, ev, synth, i)
            current = synth
        add_edge(current, filtered[-1], cls(t.target), i)

    transitions: list[MachineTransition] = []
    provenance: dict[int, int] = {}
    for src, ev, dst, origin in edges:
        provenance[len(transitions)] = origin
        transitions.append(MachineTransition(source=src, target=dst, label=Input(ev)))
    for state, cmd, log, origin in commands:
        provenance[len(transitions)] = origin
        transitions.append(
            MachineTransition(source=state, target=state, label=Execute(cmd=cmd, log_type=log))
        )

    shape = MachineShape(
        initial=cls(p.initial),
        subscriptions=frozenset(retained),
        transitions=tuple(transitions),
    )
    return ProjectedMachine(shape=shape, provenance=provenance)


def check_projection(
    p: SwarmProtocol,
    subs: Mapping[str, frozenset[str]],
    role: str,
    impl: MachineShape,
) -> CheckResult:
    """Check that ``impl`` is equivalent to the projection of ``p`` for ``role``.

    Equivalence is a synchronized walk from both initial states: input edges
    are matched by event type and each visited state pair must enable the
    same commands (command name plus emitted log, order-sensitive).  Each
    diagnostic carries the shortest event-type path to the discrepancy.
    """
    expected = project(p, subs, role).shape
    diags: list[Diagnostic] = []

    if impl.subscriptions != expected.subscriptions:
        extra = sorted(impl.subscriptions - expected.subscriptions)
        missing = sorted(expected.subscriptions - impl.subscriptions)
        diags.append(
            Diagnostic(
                code=PROJ_SUBSCRIPTION_MISMATCH,
                message=f"machine subscriptions differ from the role's: "
                f"missing {missing}, extra {extra}",
                role=role,
            )
        )

    queue: deque[tuple[str, str, tuple[str, ...]]] = deque()
    queue.append((expected.initial, impl.initial, ()))
    visited: set[tuple[str, str]] = {(expected.initial, impl.initial)}
    flagged_nondet: set[str] = set()

    while queue:
        e_state, i_state, path = queue.popleft()

        e_cmds = expected.commands(e_state)
        i_cmds = impl.commands(i_state)
        if e_cmds != i_cmds:
            fmt = lambda cs: sorted(f"{c}/{','.join(log)}" for c, log in cs)
            diags.append(
                Diagnostic(
                    code=PROJ_CMD_SET_MISMATCH,
                    message=f"state '{i_state}': commands {fmt(i_cmds)} do not match "
                    f"projected commands {fmt(e_cmds)}",
                    state=i_state,
                    path=path,
                )
            )

        if i_state not in flagged_nondet:
            targets_seen: dict[str, str] = {}
            for t in impl.transitions:
                if t.source == i_state and isinstance(t.label, Input):
                    prev = targets_seen.setdefault(t.label.event_type, t.target)
                    if prev != t.target:
                        flagged_nondet.add(i_state)
                        diags.append(
                            Diagnostic(
                                code=PROJ_TARGET_MISMATCH,
                                message=f"state '{i_state}' has two inputs for "
                                f"'{t.label.event_type}' with different targets",
                                state=i_state,
                                event_type=t.label.event_type,
                                path=path,
                            )
                        )

        e_edges = expected.input_edges(e_state)
        i_edges = impl.input_edges(i_state)
        for ev in sorted(set(e_edges) - set(i_edges)):
            diags.append(
                Diagnostic(
                    code=PROJ_MISSING_REACTION,
                    message=f"state '{i_state}' lacks a reaction to '{ev}'",
                    state=i_state,
                    event_type=ev,
                    path=path,
                )
            )
        for ev in sorted(set(i_edges) - set(e_edges)):
            diags.append(
                Diagnostic(
                    code=PROJ_EXTRA_REACTION,
                    message=f"state '{i_state}' reacts to '{ev}' but the projection does not",
                    state=i_state,
                    event_type=ev,
                    path=path,
                )
            )
        for ev in sorted(set(e_edges) & set(i_edges)):
            pair = (e_edges[ev], i_edges[ev])
            if pair not in visited:
                visited.add(pair)
                queue.append((pair[0], pair[1], path + (ev,)))

    if diags:
        return CheckResult.failed(diags)
    return CheckResult.passed()
