"""Data model and interchange formats for swarm protocols.

A swarm protocol is a global workflow graph: a finite state machine whose
transitions are labeled with a command, the role allowed to invoke it, and
the ordered log of event types the command emits.  Machine shapes are the
local per-role counterpart: input transitions selected by event type plus
command annotations.  This module owns the value types, their strict JSON
parsers and serializers, graph utilities, and DOT export.

All values here are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
from typing import Any, Iterable, Mapping

from .errors import ParseError

Subscriptions = dict[str, frozenset[str]]


@dataclass(frozen=True)
class ProtocolTransition:
    """One arrow of the global workflow graph.

    ``log_type`` is the ordered list of event types emitted when ``role``
    invokes ``cmd`` in ``source``; its first element is the guard event that
    selects this branch.
    """

    source: str
    target: str
    cmd: str
    role: str
    log_type: tuple[str, ...]

    @property
    def guard(self) -> str | None:
        """First emitted event type; None for an (ill-formed) empty log."""
        return self.log_type[0] if self.log_type else None


@dataclass(frozen=True)
class SwarmProtocol:
    """Global workflow graph: an initial state plus labeled transitions.

    The state set is implicit: the initial state plus every transition
    source and target.
    """

    initial: str
    transitions: tuple[ProtocolTransition, ...]

    def states(self) -> set[str]:
        out = {self.initial}
        for t in self.transitions:
            out.add(t.source)
            out.add(t.target)
        return out

    def outgoing(self, state: str) -> list[tuple[int, ProtocolTransition]]:
        return [(i, t) for i, t in enumerate(self.transitions) if t.source == state]


@dataclass(frozen=True)
class Input:
    """Machine transition consuming one event type."""

    event_type: str


@dataclass(frozen=True)
class Execute:
    """Command annotation: invoking ``cmd`` emits ``log_type``.

    Commands do not move the machine, so Execute transitions are self-loops.
    """

    cmd: str
    log_type: tuple[str, ...]


MachineLabel = Input | Execute


@dataclass(frozen=True)
class MachineTransition:
    source: str
    target: str
    label: MachineLabel


@dataclass(frozen=True)
class MachineShape:
    """One role's local state machine in interchange form.

    Multi-event reactions appear expanded as chains of Input edges through
    synthetic intermediate states, which makes equivalence checking a plain
    labeled-graph comparison.
    """

    initial: str
    subscriptions: frozenset[str]
    transitions: tuple[MachineTransition, ...]

    def input_edges(self, state: str) -> dict[str, str]:
        """Map event type -> target for Input edges leaving ``state``."""
        out: dict[str, str] = {}
        for t in self.transitions:
            if t.source == state and isinstance(t.label, Input):
                out.setdefault(t.label.event_type, t.target)
        return out

    def commands(self, state: str) -> frozenset[tuple[str, tuple[str, ...]]]:
        """Set of (cmd, logType) pairs attached to ``state``."""
        return frozenset(
            (t.label.cmd, t.label.log_type)
            for t in self.transitions
            if t.source == state and isinstance(t.label, Execute)
        )


@dataclass(frozen=True)
class Diagnostic:
    """Structured check finding.

    ``code`` is drawn from the closed sets defined by the well-formedness
    and projection checkers; the locus fields are filled where meaningful.
    """

    code: str
    message: str
    state: str | None = None
    transition: int | None = None
    role: str | None = None
    event_type: str | None = None
    path: tuple[str, ...] | None = None

    def to_obj(self) -> dict[str, Any]:
        obj: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.state is not None:
            obj["state"] = self.state
        if self.transition is not None:
            obj["transition"] = self.transition
        if self.role is not None:
            obj["role"] = self.role
        if self.event_type is not None:
            obj["eventType"] = self.event_type
        if self.path is not None:
            obj["path"] = list(self.path)
        return obj


@dataclass(frozen=True)
class CheckResult:
    """OK, or ERROR with a non-empty list of diagnostics."""

    errors: tuple[Diagnostic, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_obj(self) -> dict[str, Any]:
        if self.ok:
            return {"type": "OK"}
        return {"type": "ERROR", "errors": [d.to_obj() for d in self.errors]}

    @staticmethod
    def passed() -> "CheckResult":
        return CheckResult()

    @staticmethod
    def failed(errors: Iterable[Diagnostic]) -> "CheckResult":
        errs = tuple(errors)
        if not errs:
            raise ValueError("ERROR result requires at least one diagnostic")
        return CheckResult(errs)


# --------------------------------------------------------------------------
# Strict JSON parsing
# --------------------------------------------------------------------------


def _as_obj(value: Any, path: str, allowed: set[str], required: set[str]) -> dict:
    if not isinstance(value, dict):
        raise ParseError(path, "expected an object")
    unknown = set(value) - allowed
    if unknown:
        raise ParseError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    missing = required - set(value)
    if missing:
        raise ParseError(f"{path}.{sorted(missing)[0]}", "missing field")
    return value


def _as_name(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ParseError(path, "expected a string")
    if not value:
        raise ParseError(path, "must be non-empty")
    return value


def _as_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ParseError(path, "expected an array")
    return value


def _load_json(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(what, f"invalid JSON: {exc}") from None


def parse_protocol(text: str) -> SwarmProtocol:
    """Parse a swarm protocol JSON document.

    Unknown fields are rejected: a typo like ``logtype`` would otherwise
    silently weaken every downstream check.
    """
    return protocol_from_obj(_load_json(text, "protocol"), "protocol")


def protocol_from_obj(obj: Any, path: str = "protocol") -> SwarmProtocol:
    top = _as_obj(obj, path, {"initial", "transitions"}, {"initial", "transitions"})
    initial = _as_name(top["initial"], f"{path}.initial")
    transitions = []
    for i, item in enumerate(_as_list(top["transitions"], f"{path}.transitions")):
        tpath = f"{path}.transitions[{i}]"
        tr = _as_obj(item, tpath, {"source", "target", "label"}, {"source", "target", "label"})
        label = _as_obj(
            tr["label"], f"{tpath}.label", {"cmd", "logType", "role"}, {"cmd", "logType", "role"}
        )
        log_type = tuple(
            _as_name(e, f"{tpath}.label.logType[{j}]")
            for j, e in enumerate(_as_list(label["logType"], f"{tpath}.label.logType"))
        )
        transitions.append(
            ProtocolTransition(
                source=_as_name(tr["source"], f"{tpath}.source"),
                target=_as_name(tr["target"], f"{tpath}.target"),
                cmd=_as_name(label["cmd"], f"{tpath}.label.cmd"),
                role=_as_name(label["role"], f"{tpath}.label.role"),
                log_type=log_type,
            )
        )
    return SwarmProtocol(initial=initial, transitions=tuple(transitions))


def protocol_to_obj(p: SwarmProtocol) -> dict[str, Any]:
    return {
        "initial": p.initial,
        "transitions": [
            {
                "source": t.source,
                "target": t.target,
                "label": {"cmd": t.cmd, "logType": list(t.log_type), "role": t.role},
            }
            for t in p.transitions
        ],
    }


def serialize_protocol(p: SwarmProtocol) -> str:
    return json.dumps(protocol_to_obj(p), indent=2, sort_keys=True)


def parse_subscriptions(text: str) -> Subscriptions:
    """Parse a subscriptions JSON object: role -> array of event type names."""
    obj = _load_json(text, "subscriptions")
    if not isinstance(obj, dict):
        raise ParseError("subscriptions", "expected an object")
    subs: Subscriptions = {}
    for role, types in obj.items():
        _as_name(role, f"subscriptions.{role!r}")
        subs[role] = frozenset(
            _as_name(e, f"subscriptions.{role}[{j}]")
            for j, e in enumerate(_as_list(types, f"subscriptions.{role}"))
        )
    return subs


def subscriptions_to_obj(subs: Mapping[str, frozenset[str]]) -> dict[str, list[str]]:
    return {role: sorted(types) for role, types in sorted(subs.items())}


def serialize_subscriptions(subs: Mapping[str, frozenset[str]]) -> str:
    return json.dumps(subscriptions_to_obj(subs), indent=2, sort_keys=True)


def parse_machine_shape(text: str) -> MachineShape:
    """Parse a machine shape JSON document."""
    return machine_shape_from_obj(_load_json(text, "machine"), "machine")


def machine_shape_from_obj(obj: Any, path: str = "machine") -> MachineShape:
    top = _as_obj(
        obj, path, {"initial", "subscriptions", "transitions"}, {"initial", "subscriptions", "transitions"}
    )
    initial = _as_name(top["initial"], f"{path}.initial")
    subscriptions = frozenset(
        _as_name(e, f"{path}.subscriptions[{j}]")
        for j, e in enumerate(_as_list(top["subscriptions"], f"{path}.subscriptions"))
    )
    transitions = []
    for i, item in enumerate(_as_list(top["transitions"], f"{path}.transitions")):
        tpath = f"{path}.transitions[{i}]"
        tr = _as_obj(item, tpath, {"source", "target", "label"}, {"source", "target", "label"})
        raw = tr["label"]
        if not isinstance(raw, dict) or "tag" not in raw:
            raise ParseError(f"{tpath}.label", "expected an object with a tag")
        tag = raw["tag"]
        label: MachineLabel
        if tag == "Input":
            lab = _as_obj(raw, f"{tpath}.label", {"tag", "eventType"}, {"tag", "eventType"})
            label = Input(_as_name(lab["eventType"], f"{tpath}.label.eventType"))
        elif tag == "Execute":
            lab = _as_obj(raw, f"{tpath}.label", {"tag", "cmd", "logType"}, {"tag", "cmd", "logType"})
            label = Execute(
                cmd=_as_name(lab["cmd"], f"{tpath}.label.cmd"),
                log_type=tuple(
                    _as_name(e, f"{tpath}.label.logType[{j}]")
                    for j, e in enumerate(_as_list(lab["logType"], f"{tpath}.label.logType"))
                ),
            )
        else:
            raise ParseError(f"{tpath}.label.tag", "expected 'Input' or 'Execute'")
        source = _as_name(tr["source"], f"{tpath}.source")
        target = _as_name(tr["target"], f"{tpath}.target")
        if isinstance(label, Execute) and source != target:
            raise ParseError(f"{tpath}", "Execute labels must be self-loops")
        transitions.append(MachineTransition(source=source, target=target, label=label))
    return MachineShape(initial=initial, subscriptions=subscriptions, transitions=tuple(transitions))


def machine_shape_to_obj(m: MachineShape) -> dict[str, Any]:
    transitions = []
    for t in m.transitions:
        label: dict[str, Any]
        if isinstance(t.label, Input):
            label = {"tag": "Input", "eventType": t.label.event_type}
        else:
            label = {"tag": "Execute", "cmd": t.label.cmd, "logType": list(t.label.log_type)}
        transitions.append({"source": t.source, "target": t.target, "label": label})
    return {
        "initial": m.initial,
        "subscriptions": sorted(m.subscriptions),
        "transitions": transitions,
    }


def serialize_machine_shape(m: MachineShape) -> str:
    return json.dumps(machine_shape_to_obj(m), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# Graph utilities
# --------------------------------------------------------------------------


def reachable_states(p: SwarmProtocol) -> set[str]:
    """States reachable from the initial state; always contains it."""
    seen = {p.initial}
    frontier = [p.initial]
    edges: dict[str, list[str]] = {}
    for t in p.transitions:
        edges.setdefault(t.source, []).append(t.target)
    while frontier:
        state = frontier.pop()
        for nxt in edges.get(state, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def roles_of(p: SwarmProtocol) -> set[str]:
    return {t.role for t in p.transitions}


def event_types_of(p: SwarmProtocol) -> set[str]:
    return {e for t in p.transitions for e in t.log_type}


def machine_states(m: MachineShape) -> set[str]:
    out = {m.initial}
    for t in m.transitions:
        out.add(t.source)
        out.add(t.target)
    return out


# --------------------------------------------------------------------------
# Shape semantics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ShapeRun:
    """Result of walking a shape over a sequence of event types."""

    final_state: str
    applied: tuple[str, ...]
    visited: tuple[str, ...]
    command_trace: tuple[frozenset[tuple[str, tuple[str, ...]]], ...]


def walk_shape(m: MachineShape, events: Iterable[str]) -> ShapeRun:
    """Run ``m`` over ``events`` with machine-runner discard semantics.

    Event types with no Input edge at the current state are discarded and
    the state stays put.  ``command_trace`` records the enabled command set
    at the initial state and after every consumed event; synthetic chain
    states carry no commands, so command sets are empty mid-reaction.
    """
    state = m.initial
    applied: list[str] = []
    visited: list[str] = [state]
    trace = [m.commands(state)]
    for ev in events:
        target = m.input_edges(state).get(ev)
        if target is None:
            trace.append(m.commands(state))
            continue
        state = target
        applied.append(ev)
        visited.append(state)
        trace.append(m.commands(state))
    return ShapeRun(
        final_state=state,
        applied=tuple(applied),
        visited=tuple(visited),
        command_trace=tuple(trace),
    )


# --------------------------------------------------------------------------
# DOT export
# --------------------------------------------------------------------------


def _dot_quote(s: str) -> str:
    return '"{}"'.format(s.replace("\\", "\\\\").replace('"', '\\"'))


def to_dot(p: SwarmProtocol) -> str:
    """Render the protocol as a Graphviz digraph.

    One node per state, one edge per transition labeled ``cmd@role / logType``.
    """
    lines = ["digraph swarm_protocol {", "  rankdir=LR;"]
    lines.append(f"  {_dot_quote(p.initial)} [shape=doublecircle];")
    for state in sorted(p.states() - {p.initial}):
        lines.append(f"  {_dot_quote(state)} [shape=circle];")
    for t in p.transitions:
        label = f"{t.cmd}@{t.role} / {','.join(t.log_type)}"
        lines.append(f"  {_dot_quote(t.source)} -> {_dot_quote(t.target)} [label={_dot_quote(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def machine_to_dot(m: MachineShape) -> str:
    """Render a machine shape as a Graphviz digraph."""
    lines = ["digraph machine {", "  rankdir=LR;"]
    lines.append(f"  {_dot_quote(m.initial)} [shape=doublecircle];")
    for state in sorted(machine_states(m) - {m.initial}):
        lines.append(f"  {_dot_quote(state)} [shape=circle];")
    for t in m.transitions:
        if isinstance(t.label, Input):
            lines.append(
                f"  {_dot_quote(t.source)} -> {_dot_quote(t.target)} "
                f"[label={_dot_quote(t.label.event_type)}];"
            )
        else:
            label = f"{t.label.cmd}! / {','.join(t.label.log_type)}"
            lines.append(
                f"  {_dot_quote(t.source)} -> {_dot_quote(t.target)} "
                f"[label={_dot_quote(label)} style=dashed];"
            )
    lines.append("}")
    return "\n".join(lines) + "\n"
