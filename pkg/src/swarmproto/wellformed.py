"""Well-formedness checking for swarm protocols.

Decides whether a protocol, under a given subscription, guarantees eventual
consensus without coordination.  The checker is exhaustive (it reports every
violation, not just the first) and deterministic: diagnostics are sorted by
transition index, then code.

Conditions, all evaluated on the subgraph reachable from the initial state:

* shape: every transition emits at least one event type, and every
  transition is reachable (``WF_EMPTY_LOG``, ``WF_UNREACHABLE``);
* determinacy: guard events are distinct per state and no event type is
  emitted by two different transitions (``WF_GUARD_CLASH``,
  ``WF_EVENT_REUSE``);
* actor causality: the acting role observes its own emissions, and every
  role that can act in the target state observes the guard
  (``WF_ACTOR_BLIND``, ``WF_LATER_ACTOR_BLIND``);
* choice awareness: at a state with several outgoing transitions, every
  role still involved downstream observes every branch guard, and any role
  able to witness one of the guards sees enough of the surrounding
  transitions that its local view never conflates the branching state with
  a state inside one of its branch cones (``WF_BRANCH_BLIND``);
* log closure: a role that observes any part of a transition's log also
  observes its guard, and a role that observes the guard also observes the
  log's last element (``WF_LOG_GAP``).

The second closure direction is what makes multi-event logs safe: the guard
announces that a transition started, the last element that it completed.
A role acting on the guard alone can emit before the predecessor's log has
fully replicated; its record then sorts into the middle of that log, where
every machine (and the reference run) discards it, and consensus is lost.
Simulation of randomly generated protocols finds such divergences reliably
when this direction is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import PreconditionError
from .model import CheckResult, Diagnostic, SwarmProtocol, reachable_states, roles_of

WF_EMPTY_LOG = "WF_EMPTY_LOG"
WF_UNREACHABLE = "WF_UNREACHABLE"
WF_GUARD_CLASH = "WF_GUARD_CLASH"
WF_EVENT_REUSE = "WF_EVENT_REUSE"
WF_ACTOR_BLIND = "WF_ACTOR_BLIND"
WF_LATER_ACTOR_BLIND = "WF_LATER_ACTOR_BLIND"
WF_BRANCH_BLIND = "WF_BRANCH_BLIND"
WF_LOG_GAP = "WF_LOG_GAP"

ALL_CODES = frozenset(
    {
        WF_EMPTY_LOG,
        WF_UNREACHABLE,
        WF_GUARD_CLASH,
        WF_EVENT_REUSE,
        WF_ACTOR_BLIND,
        WF_LATER_ACTOR_BLIND,
        WF_BRANCH_BLIND,
        WF_LOG_GAP,
    }
)

# Codes that depend on the subscription, as opposed to protocol shape alone.
VISIBILITY_CODES = frozenset({WF_ACTOR_BLIND, WF_LATER_ACTOR_BLIND, WF_BRANCH_BLIND, WF_LOG_GAP})


@dataclass
class WfContext:
    """Derived indices shared by the individual condition checks."""

    protocol: SwarmProtocol
    subs: Mapping[str, frozenset[str]]
    reachable: set[str] = field(init=False)
    outgoing: dict[str, list[int]] = field(init=False)
    active_roles: dict[str, set[str]] = field(init=False)
    involved_after: dict[str, set[str]] = field(init=False)

    def __post_init__(self) -> None:
        p = self.protocol
        self.reachable = reachable_states(p)
        self.outgoing = {s: [] for s in p.states()}
        for i, t in enumerate(p.transitions):
            self.outgoing[t.source].append(i)
        self.active_roles = {
            s: {p.transitions[i].role for i in idxs} for s, idxs in self.outgoing.items()
        }
        self.involved_after = {s: self._involved_after(s) for s in p.states()}

    def reachable_transitions(self) -> list[int]:
        return [i for i, t in enumerate(self.protocol.transitions) if t.source in self.reachable]

    def _states_from(self, state: str) -> set[str]:
        seen = {state}
        frontier = [state]
        while frontier:
            s = frontier.pop()
            for i in self.outgoing.get(s, ()):
                nxt = self.protocol.transitions[i].target
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def _involved_after(self, state: str) -> set[str]:
        """Roles active in, or subscribed to an emission of, any transition
        on a path from ``state``."""
        involved: set[str] = set()
        for s in self._states_from(state):
            for i in self.outgoing.get(s, ()):
                t = self.protocol.transitions[i]
                involved.add(t.role)
                emitted = set(t.log_type)
                for role, types in self.subs.items():
                    if types & emitted:
                        involved.add(role)
        return involved


def check_swarm_protocol(
    p: SwarmProtocol, subs: Mapping[str, frozenset[str]]
) -> CheckResult:
    """Check protocol well-formedness under ``subs``.

    Every role appearing in ``p`` must have a subscription entry (possibly
    empty); otherwise a :class:`PreconditionError` is raised.
    """
    missing = sorted(roles_of(p) - set(subs))
    if missing:
        raise PreconditionError(f"roles without a subscription entry: {missing}")

    ctx = WfContext(p, subs)
    diags: list[Diagnostic] = []
    diags.extend(_check_shape(ctx))
    reachable_idx = ctx.reachable_transitions()
    diags.extend(_check_determinacy(ctx, reachable_idx))
    diags.extend(_check_actor_causality(ctx, reachable_idx))
    diags.extend(_check_choice_awareness(ctx))
    diags.extend(_check_log_closure(ctx, reachable_idx))

    diags.sort(key=lambda d: (d.transition, d.code, d.role or "", d.event_type or ""))
    if diags:
        return CheckResult.failed(diags)
    return CheckResult.passed()


def _check_shape(ctx: WfContext) -> list[Diagnostic]:
    out = []
    for i, t in enumerate(ctx.protocol.transitions):
        if t.source not in ctx.reachable:
            out.append(
                Diagnostic(
                    code=WF_UNREACHABLE,
                    message=f"transition {i} ({t.cmd}@{t.role}) is unreachable from "
                    f"'{ctx.protocol.initial}'",
                    state=t.source,
                    transition=i,
                )
            )
        elif not t.log_type:
            out.append(
                Diagnostic(
                    code=WF_EMPTY_LOG,
                    message=f"transition {i} ({t.cmd}@{t.role}) emits no events",
                    state=t.source,
                    transition=i,
                )
            )
    return out


def _check_determinacy(ctx: WfContext, reachable_idx: list[int]) -> list[Diagnostic]:
    out = []
    p = ctx.protocol
    # (a) per state, guard events of outgoing transitions are pairwise distinct
    for state in sorted(ctx.reachable):
        seen_guards: dict[str, int] = {}
        for i in ctx.outgoing.get(state, ()):
            guard = p.transitions[i].guard
            if guard is None:
                continue
            if guard in seen_guards:
                out.append(
                    Diagnostic(
                        code=WF_GUARD_CLASH,
                        message=f"state '{state}': transitions {seen_guards[guard]} and {i} "
                        f"share guard event '{guard}'",
                        state=state,
                        transition=i,
                        event_type=guard,
                    )
                )
            else:
                seen_guards[guard] = i
    # (b) each event type is emitted by at most one transition
    first_use: dict[str, int] = {}
    for i in reachable_idx:
        for ev in dict.fromkeys(p.transitions[i].log_type):
            if ev in first_use and first_use[ev] != i:
                out.append(
                    Diagnostic(
                        code=WF_EVENT_REUSE,
                        message=f"event type '{ev}' emitted by transitions {first_use[ev]} and {i}",
                        transition=i,
                        event_type=ev,
                    )
                )
            else:
                first_use.setdefault(ev, i)
    return out


def _check_actor_causality(ctx: WfContext, reachable_idx: list[int]) -> list[Diagnostic]:
    out = []
    p = ctx.protocol
    for i in reachable_idx:
        t = p.transitions[i]
        if not t.log_type:
            continue
        for ev in dict.fromkeys(t.log_type):
            if ev not in ctx.subs.get(t.role, frozenset()):
                out.append(
                    Diagnostic(
                        code=WF_ACTOR_BLIND,
                        message=f"role '{t.role}' emits '{ev}' in transition {i} "
                        f"but does not subscribe to it",
                        transition=i,
                        role=t.role,
                        event_type=ev,
                    )
                )
        guard = t.guard
        for role in sorted(ctx.active_roles.get(t.target, ())):
            if guard not in ctx.subs.get(role, frozenset()):
                out.append(
                    Diagnostic(
                        code=WF_LATER_ACTOR_BLIND,
                        message=f"role '{role}' can act in state '{t.target}' but does not "
                        f"subscribe to guard '{guard}' of transition {i}",
                        state=t.target,
                        transition=i,
                        role=role,
                        event_type=guard,
                    )
                )
    return out


def _check_choice_awareness(ctx: WfContext) -> list[Diagnostic]:
    out = []
    p = ctx.protocol
    for state in sorted(ctx.reachable):
        idxs = ctx.outgoing.get(state, [])
        if len(idxs) < 2:
            continue
        for role in sorted(ctx.involved_after[state]):
            for i in idxs:
                guard = p.transitions[i].guard
                if guard is None:
                    continue
                if guard not in ctx.subs.get(role, frozenset()):
                    out.append(
                        Diagnostic(
                            code=WF_BRANCH_BLIND,
                            message=f"role '{role}' is involved after state '{state}' but does "
                            f"not subscribe to branch guard '{guard}'",
                            state=state,
                            transition=i,
                            role=role,
                            event_type=guard,
                        )
                    )
    out.extend(_check_cone_separation(ctx))
    return out


def _check_cone_separation(ctx: WfContext) -> list[Diagnostic]:
    """A role that can witness a choice must not conflate the branching
    state with states inside its branch cones.

    A role's local view identifies the endpoints of transitions it cannot
    observe at all.  If that quotient folds a state reachable through one
    of the branches back onto the branching state itself, the role cannot
    tell "the choice is still open" apart from "a branch already won": a
    record carrying a losing branch's guard then looks applicable locally
    although the reference run discards it.
    """
    out = []
    p = ctx.protocol
    for role in sorted(ctx.subs):
        types = ctx.subs[role]
        parent = {st: st for st in p.states()}

        def find(x: str) -> str:
            root = x
            while parent[root] != root:
                root = parent[root]
            while parent[x] != root:
                parent[x], x = root, parent[x]
            return root

        for t in p.transitions:
            if not (set(t.log_type) & types):
                ra, rb = find(t.source), find(t.target)
                if ra != rb:
                    parent[rb] = ra

        for state in sorted(ctx.reachable):
            idxs = ctx.outgoing.get(state, [])
            if len(idxs) < 2:
                continue
            if not any(p.transitions[i].guard in types for i in idxs):
                continue  # the role cannot misread a guard it never sees
            cone: set[str] = set()
            for i in idxs:
                cone |= ctx._states_from(p.transitions[i].target)
            conflated = sorted(
                q for q in cone if q != state and find(q) == find(state)
            )
            if not conflated:
                continue
            culprit = next(
                (
                    (i, t)
                    for i, t in enumerate(p.transitions)
                    if not (set(t.log_type) & types) and find(t.source) == find(state)
                ),
                None,
            )
            locus_idx, locus_event = min(idxs), None
            if culprit is not None:
                locus_idx = culprit[0]
                locus_event = culprit[1].guard
            out.append(
                Diagnostic(
                    code=WF_BRANCH_BLIND,
                    message=f"role '{role}' cannot distinguish branching state '{state}' "
                    f"from {conflated} reached through its own branches",
                    state=state,
                    transition=locus_idx,
                    role=role,
                    event_type=locus_event,
                )
            )
    return out


def _check_log_closure(ctx: WfContext, reachable_idx: list[int]) -> list[Diagnostic]:
    out = []
    p = ctx.protocol
    for i in reachable_idx:
        t = p.transitions[i]
        if not t.log_type:
            continue
        guard = t.guard
        last = t.log_type[-1]
        for role in sorted(ctx.subs):
            types = ctx.subs[role]
            if types & set(t.log_type) and guard not in types:
                out.append(
                    Diagnostic(
                        code=WF_LOG_GAP,
                        message=f"role '{role}' subscribes to part of transition {i}'s log "
                        f"but not to its guard '{guard}'",
                        transition=i,
                        role=role,
                        event_type=guard,
                    )
                )
            elif guard in types and last not in types:
                out.append(
                    Diagnostic(
                        code=WF_LOG_GAP,
                        message=f"role '{role}' subscribes to the guard of transition {i} "
                        f"but not to its closing event '{last}'",
                        transition=i,
                        role=role,
                        event_type=last,
                    )
                )
    return out
