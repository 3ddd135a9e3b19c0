"""Persistent event records and per-node append-only logs.

Each node owns a log it appends to; logs replicate asynchronously.  A
coordination-free total order over all records of a swarm comes from a
Lamport clock paired with the emitting node id: records are compared by
``(lamport, nodeId)`` lexicographically, which is a strict total order as
long as each node's lamport values strictly increase.

``NodeLog`` is single-writer: all mutations to one log happen on one
logical thread.  Snapshots of ``known`` are plain tuples, safe to share.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import ConflictError

RecordKey = tuple[str, int]  # (nodeId, seq) — global identity of a record
OrderKey = tuple[int, str]  # (lamport, nodeId) — position in the total order


@dataclass(frozen=True)
class EventRecord:
    """A single persisted event.

    ``payload`` is opaque structured data (anything JSON-serializable);
    ``seq`` is the per-node emission counter and ``session_id`` tags the
    workflow instance the event belongs to.
    """

    event_type: str
    payload: Any
    lamport: int
    node_id: str
    seq: int
    session_id: str

    @property
    def key(self) -> RecordKey:
        return (self.node_id, self.seq)

    @property
    def order_key(self) -> OrderKey:
        return (self.lamport, self.node_id)


def compare(a: EventRecord, b: EventRecord) -> int:
    """Total-order comparison: negative, zero, or positive."""
    if a.order_key < b.order_key:
        return -1
    if a.order_key > b.order_key:
        return 1
    return 0


def sort_records(records: Iterable[EventRecord]) -> list[EventRecord]:
    return sorted(records, key=lambda r: r.order_key)


@dataclass
class NodeLog:
    """One node's view of the swarm: its own emissions plus received records.

    ``known`` is kept sorted by order key and deduplicated on ``(nodeId,
    seq)``; ``clock`` never falls below the largest lamport value seen.
    """

    node_id: str
    clock: int = 0
    own: list[EventRecord] = field(default_factory=list)
    known: list[EventRecord] = field(default_factory=list)
    _by_key: dict[RecordKey, EventRecord] = field(default_factory=dict, repr=False)

    def append(self, event_type: str, payload: Any, session_id: str) -> EventRecord:
        """Emit a new record: bump the clock and stamp the next sequence number."""
        self.clock += 1
        record = EventRecord(
            event_type=event_type,
            payload=payload,
            lamport=self.clock,
            node_id=self.node_id,
            seq=len(self.own),
            session_id=session_id,
        )
        self.own.append(record)
        self._by_key[record.key] = record
        self.known.append(record)  # own records always sort last: lamport is a fresh max
        return record

    def receive(self, records: Iterable[EventRecord]) -> list[EventRecord]:
        """Merge received records into ``known``; returns the genuinely new ones.

        Duplicates (same ``(nodeId, seq)`` and equal content) are dropped;
        a key collision with different content raises :class:`ConflictError`.
        The clock advances to the largest lamport seen, without +1: only
        emission increments, which is enough for the causality invariant.
        """
        fresh = merge_records(self._by_key, records)
        if fresh:
            self.known.extend(fresh)
            self.known.sort(key=lambda r: r.order_key)
            self.clock = max(self.clock, max(r.lamport for r in fresh))
        return fresh

    def undelivered_for(self, other: "NodeLog") -> list[EventRecord]:
        """Records this node knows that ``other`` does not, in order."""
        return [r for r in self.known if r.key not in other._by_key]


def merge_records(
    by_key: dict[RecordKey, EventRecord], records: Iterable[EventRecord]
) -> list[EventRecord]:
    """Dedup ``records`` against ``by_key``, updating it; returns new records.

    Raises :class:`ConflictError` on a key collision with differing content,
    which signals a corrupted or forged stream.
    """
    fresh: list[EventRecord] = []
    for rec in records:
        existing = by_key.get(rec.key)
        if existing is None:
            by_key[rec.key] = rec
            fresh.append(rec)
        elif existing != rec:
            raise ConflictError(
                f"records with key {rec.key} differ: {existing!r} vs {rec!r}"
            )
    return fresh


# --------------------------------------------------------------------------
# NDJSON serialization (one record per line)
# --------------------------------------------------------------------------


def record_to_obj(r: EventRecord) -> dict[str, Any]:
    return {
        "eventType": r.event_type,
        "payload": r.payload,
        "lamport": r.lamport,
        "nodeId": r.node_id,
        "seq": r.seq,
        "sessionId": r.session_id,
    }


def record_from_obj(obj: dict[str, Any]) -> EventRecord:
    return EventRecord(
        event_type=obj["eventType"],
        payload=copy.deepcopy(obj["payload"]),
        lamport=obj["lamport"],
        node_id=obj["nodeId"],
        seq=obj["seq"],
        session_id=obj["sessionId"],
    )


def records_to_ndjson(records: Iterable[EventRecord]) -> str:
    return "".join(
        json.dumps(record_to_obj(r), sort_keys=True, separators=(",", ":")) + "\n"
        for r in records
    )


def records_from_ndjson(text: str) -> list[EventRecord]:
    return [record_from_obj(json.loads(line)) for line in text.splitlines() if line.strip()]
