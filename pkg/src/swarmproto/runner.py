"""Event-sourced machine runtime.

A machine definition gives one role's local behavior: states with payload,
reactions consuming ordered event-type sequences, and commands that emit
events when invoked.  The runner folds a totally ordered event log through
the definition.  Records that match no reaction at the current position are
discarded and surfaced through a hook; when records arrive that sort before
already-processed ones, the full merged log is re-evaluated from the initial
payload — the settled state is always a pure function of the merged log —
and previously applied records that fall off the path are reported as
invalidated so the application can compensate.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .errors import CommandDisabledError, DefinitionError, HandlerError
from .eventlog import EventRecord, NodeLog, OrderKey, merge_records, sort_records
from .model import Execute, Input, MachineShape, MachineTransition

ReactionHandler = Callable[[Any, Sequence[EventRecord]], Any]
CommandHandler = Callable[..., list[Any]]

UNEXPECTED = "unexpected"
INVALIDATED = "invalidated"


@dataclass(frozen=True)
class Reaction:
    """Consume ``event_types`` in order, then move to ``target``.

    The handler maps (current payload, matched records) to the new payload.
    The first event type selects the reaction, so first types must be unique
    within a state.
    """

    event_types: tuple[str, ...]
    target: str
    handler: ReactionHandler


@dataclass(frozen=True)
class Command:
    """State-local action emitting ``emitted_types`` when invoked.

    The handler maps (current payload, *invocation args) to a list of event
    payloads, one per emitted type.
    """

    name: str
    emitted_types: tuple[str, ...]
    handler: CommandHandler


@dataclass
class _StateDef:
    reactions: list[Reaction] = field(default_factory=list)
    commands: dict[str, Command] = field(default_factory=dict)


class MachineDefinition:
    """Builder for one role's machine: states, reactions, commands."""

    def __init__(self, role: str, initial: str) -> None:
        self.role = role
        self.initial = initial
        self._states: dict[str, _StateDef] = {initial: _StateDef()}

    def state(self, name: str) -> "MachineDefinition":
        self._states.setdefault(name, _StateDef())
        return self

    def react(
        self,
        source: str,
        event_types: Sequence[str],
        target: str,
        handler: ReactionHandler,
    ) -> "MachineDefinition":
        if not event_types:
            raise DefinitionError(f"reaction in '{source}' consumes no events")
        self.state(source)
        self.state(target)
        self._states[source].reactions.append(
            Reaction(tuple(event_types), target, handler)
        )
        return self

    def command(
        self,
        state: str,
        name: str,
        emitted_types: Sequence[str],
        handler: CommandHandler,
    ) -> "MachineDefinition":
        self.state(state)
        if name in self._states[state].commands:
            raise DefinitionError(f"state '{state}' already has command '{name}'")
        self._states[state].commands[name] = Command(name, tuple(emitted_types), handler)
        return self

    def states(self) -> list[str]:
        return list(self._states)

    def reactions(self, state: str) -> list[Reaction]:
        return self._states[state].reactions

    def commands(self, state: str) -> dict[str, Command]:
        return self._states[state].commands

    @property
    def subscriptions(self) -> frozenset[str]:
        """All event types referenced by reactions."""
        return frozenset(
            e for st in self._states.values() for r in st.reactions for e in r.event_types
        )

    def validate(self) -> None:
        """Raise :class:`DefinitionError` on structural violations."""
        for name, st in self._states.items():
            seen: set[str] = set()
            for r in st.reactions:
                first = r.event_types[0]
                if first in seen:
                    raise DefinitionError(
                        f"state '{name}' has two reactions selected by '{first}'"
                    )
                seen.add(first)
                if r.target not in self._states:
                    raise DefinitionError(
                        f"reaction in '{name}' targets unknown state '{r.target}'"
                    )


def extract_shape(definition: MachineDefinition) -> MachineShape:
    """Interchange shape of a definition, for conformance checking.

    Multi-event reactions expand into chains of Input edges through
    synthetic intermediate states; commands become Execute self-loops.
    """
    definition.validate()
    transitions: list[MachineTransition] = []
    synth_count: dict[str, int] = {}
    for state in definition.states():
        for r in definition.reactions(state):
            current = state
            for ev in r.event_types[:-1]:
                synth_count[state] = synth_count.get(state, 0) + 1
                synth = f"{state}|{synth_count[state]}"
                transitions.append(MachineTransition(current, synth, Input(ev)))
                current = synth
            transitions.append(MachineTransition(current, r.target, Input(r.event_types[-1])))
    for state in definition.states():
        for cmd in definition.commands(state).values():
            transitions.append(
                MachineTransition(state, state, Execute(cmd.name, cmd.emitted_types))
            )
    return MachineShape(
        initial=definition.initial,
        subscriptions=definition.subscriptions,
        transitions=tuple(transitions),
    )


@dataclass(frozen=True)
class InFlightReaction:
    """A multi-event reaction that has matched a prefix of its event types."""

    event_types: tuple[str, ...]
    target: str
    matched: tuple[EventRecord, ...]


@dataclass(frozen=True)
class RunnerState:
    """Immutable snapshot of a runner.

    ``enabled_commands`` is empty while a multi-event reaction is open or a
    locally invoked command awaits its settling transition.
    ``processed_count`` counts records consumed by this evaluation (matching
    session and subscription), applied or discarded.
    """

    state_name: str
    payload: Any
    enabled_commands: frozenset[str]
    in_flight: InFlightReaction | None
    processed_count: int


@dataclass(frozen=True)
class DiscardReport:
    """A consumed record that is not part of the current run.

    ``reason`` is ``unexpected`` (matched no reaction position) or
    ``invalidated`` (applied by a previous evaluation, removed by
    retroactive replay).
    """

    record: EventRecord
    reason: str


class _Fold:
    """Mutable fold of ordered records through a definition."""

    def __init__(self, definition: MachineDefinition, initial_payload: Any, session_id: str,
                 subscription: frozenset[str]) -> None:
        self.defn = definition
        self.session_id = session_id
        self.subscription = subscription
        self.state = definition.initial
        self.payload = copy.deepcopy(initial_payload)
        self.open: Reaction | None = None
        self.matched: list[EventRecord] = []
        self.applied: list[EventRecord] = []
        self.reports: list[DiscardReport] = []
        self.consumed = 0
        self.scanned = 0

    def feed(
        self,
        records: Iterable[EventRecord],
        invalidated_keys: frozenset = frozenset(),
        on_transition: Callable[[], None] | None = None,
    ) -> None:
        for rec in records:
            idx = self.scanned
            self.scanned += 1
            if rec.session_id != self.session_id or rec.event_type not in self.subscription:
                continue
            self.consumed += 1
            if self.open is not None:
                expected = self.open.event_types[len(self.matched)]
                if rec.event_type == expected:
                    self.matched.append(rec)
                    self.applied.append(rec)
                    if len(self.matched) == len(self.open.event_types):
                        self._complete(idx, on_transition)
                else:
                    # A foreign subscribed event does not abort the open
                    # reaction; it is discarded and matching continues.
                    self._discard(rec, invalidated_keys)
                continue
            reaction = self._select(rec.event_type)
            if reaction is None:
                self._discard(rec, invalidated_keys)
                continue
            self.open = reaction
            self.matched = [rec]
            self.applied.append(rec)
            if len(reaction.event_types) == 1:
                self._complete(idx, on_transition)

    def _select(self, event_type: str) -> Reaction | None:
        for r in self.defn.reactions(self.state):
            if r.event_types[0] == event_type:
                return r
        return None

    def _complete(self, idx: int, on_transition: Callable[[], None] | None) -> None:
        assert self.open is not None
        try:
            self.payload = self.open.handler(self.payload, tuple(self.matched))
        except Exception as exc:
            raise HandlerError(
                f"reaction handler failed in state '{self.state}': {exc}", record_index=idx
            ) from exc
        self.state = self.open.target
        self.open = None
        self.matched = []
        if on_transition is not None:
            on_transition()

    def _discard(self, rec: EventRecord, invalidated_keys: frozenset) -> None:
        reason = INVALIDATED if rec.key in invalidated_keys else UNEXPECTED
        self.reports.append(DiscardReport(rec, reason))

    def snapshot(self, enabled: bool = True) -> RunnerState:
        in_flight = None
        if self.open is not None:
            in_flight = InFlightReaction(
                event_types=self.open.event_types,
                target=self.open.target,
                matched=tuple(self.matched),
            )
        commands: frozenset[str] = frozenset()
        if enabled and in_flight is None:
            commands = frozenset(self.defn.commands(self.state))
        return RunnerState(
            state_name=self.state,
            payload=copy.deepcopy(self.payload),
            enabled_commands=commands,
            in_flight=in_flight,
            processed_count=self.consumed,
        )


def evaluate(
    definition: MachineDefinition,
    initial_payload: Any,
    ordered_log: Sequence[EventRecord],
    session_id: str,
    subscription: frozenset[str] | None = None,
) -> tuple[RunnerState, list[DiscardReport]]:
    """Fold ``ordered_log`` (sorted by order key) through the definition.

    Records with a foreign session or unsubscribed event type are invisible;
    every other record is either applied to exactly one reaction position or
    reported exactly once.  ``subscription`` defaults to the definition's own.
    """
    definition.validate()
    if subscription is None:
        subscription = definition.subscriptions
    fold = _Fold(definition, initial_payload, session_id, subscription)
    fold.feed(ordered_log)
    return fold.snapshot(), fold.reports


@dataclass(frozen=True)
class AdvanceResult:
    state: RunnerState
    reports: tuple[DiscardReport, ...]
    replayed: bool


class MachineRunner:
    """Executes one role's machine against a replicated log.

    The runner holds the log it has evaluated so far.  ``advance`` merges
    newly received records: arrivals that sort after everything processed
    continue the fold incrementally, anything else triggers a full
    re-evaluation from the initial payload (``replayed=True``) with
    previously applied, now off-path records reported as invalidated.

    ``on_state`` receives one immutable snapshot per settled state, in
    processing order; ``on_discard`` receives every discard report.

    A runner is bound to one logical thread (it is the single consumer of
    its log); the snapshots it hands out are safe to share.
    """

    def __init__(
        self,
        definition: MachineDefinition,
        initial_payload: Any,
        session_id: str,
        subscription: frozenset[str] | None = None,
        on_state: Callable[[RunnerState], None] | None = None,
        on_discard: Callable[[DiscardReport], None] | None = None,
    ) -> None:
        definition.validate()
        self.definition = definition
        self.session_id = session_id
        self.subscription = (
            frozenset(subscription) if subscription is not None else definition.subscriptions
        )
        self._initial_payload = copy.deepcopy(initial_payload)
        self._on_state = on_state
        self._on_discard = on_discard
        self._log: list[EventRecord] = []
        self._by_key: dict = {}
        self._fold = _Fold(definition, initial_payload, session_id, self.subscription)
        self._locked = False
        self._invalidated_keys: set = set()
        if on_state is not None:
            on_state(self.state)

    @property
    def state(self) -> RunnerState:
        return self._fold.snapshot(enabled=not self._locked)

    @property
    def log(self) -> tuple[EventRecord, ...]:
        return tuple(self._log)

    @property
    def applied_records(self) -> tuple[EventRecord, ...]:
        """Records applied by the current evaluation, in order."""
        return tuple(self._fold.applied)

    @property
    def current_discards(self) -> tuple[DiscardReport, ...]:
        """Discard reports of the current evaluation."""
        return tuple(self._fold.reports)

    @property
    def invalidated_keys(self) -> frozenset:
        """Keys of records ever reported invalidated by this runner."""
        return frozenset(self._invalidated_keys)

    def advance(self, records: Iterable[EventRecord]) -> AdvanceResult:
        fresh = merge_records(self._by_key, records)
        if not fresh:
            return AdvanceResult(self.state, (), False)
        fresh = sort_records(fresh)
        last: OrderKey | None = self._log[-1].order_key if self._log else None
        self._log.extend(fresh)
        self._log.sort(key=lambda r: r.order_key)

        if last is None or fresh[0].order_key > last:
            before = len(self._fold.reports)
            self._fold.feed(fresh, on_transition=self._settled)
            new_reports = self._fold.reports[before:]
            self._emit_discards(new_reports)
            return AdvanceResult(self.state, tuple(new_reports), False)

        prev_applied = frozenset(r.key for r in self._fold.applied)
        self._fold = _Fold(
            self.definition, self._initial_payload, self.session_id, self.subscription
        )
        self._fold.feed(self._log, invalidated_keys=prev_applied, on_transition=self._settled)
        for rep in self._fold.reports:
            if rep.reason == INVALIDATED:
                self._invalidated_keys.add(rep.record.key)
        self._emit_discards(self._fold.reports)
        return AdvanceResult(self.state, tuple(self._fold.reports), True)

    def invoke(self, cmd: str, args: Sequence[Any], node_log: NodeLog) -> list[EventRecord]:
        """Invoke an enabled command: emit its events to the local node log.

        The command set is disabled until the runner reaches its next
        settled state (normally by consuming the emission it just made).
        """
        snapshot = self.state
        if cmd not in snapshot.enabled_commands:
            raise CommandDisabledError(
                f"command '{cmd}' is not enabled in state '{snapshot.state_name}'"
            )
        command = self.definition.commands(snapshot.state_name)[cmd]
        try:
            payloads = command.handler(copy.deepcopy(self._fold.payload), *args)
        except Exception as exc:
            raise HandlerError(f"command handler '{cmd}' failed: {exc}") from exc
        if not isinstance(payloads, list) or len(payloads) != len(command.emitted_types):
            raise HandlerError(
                f"command '{cmd}' must return one payload per emitted type "
                f"({len(command.emitted_types)} expected)"
            )
        records = [
            node_log.append(etype, payload, self.session_id)
            for etype, payload in zip(command.emitted_types, payloads)
        ]
        self._locked = True
        return records

    def _settled(self) -> None:
        self._locked = False
        if self._on_state is not None:
            self._on_state(self._fold.snapshot(enabled=True))

    def _emit_discards(self, reports: Iterable[DiscardReport]) -> None:
        if self._on_discard is not None:
            for rep in reports:
                self._on_discard(rep)
