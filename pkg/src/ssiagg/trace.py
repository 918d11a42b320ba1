"""Append-only protocol trace and its line-delimited export format."""

from __future__ import annotations

import hashlib
import threading
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from . import canonical


class PayloadClass(str, Enum):
    CIPHERTEXT = "ciphertext"
    PLAINTEXT = "plaintext-metadata"


class EventKind(str, Enum):
    PHASE = "phase"
    STEP = "step"
    SEND = "send"
    RECV = "recv"
    DROP = "drop"
    LEDGER = "ledger"
    VERDICT = "verdict"
    STATUS = "status"
    FAULT = "fault"


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: EventKind
    actor: str = ""
    step: int | None = None
    peer: str = ""
    channel: str = ""
    payload_class: PayloadClass | None = None
    payload: bytes = b""
    detail: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "kind": self.kind.value,
            "actor": self.actor,
            "step": self.step,
            "peer": self.peer,
            "channel": self.channel,
            "payload_class": self.payload_class.value if self.payload_class else None,
            "payload": self.payload,
            "detail": dict(self.detail),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TraceEvent:
        pc = data.get("payload_class")
        return cls(
            seq=data["seq"],
            kind=EventKind(data["kind"]),
            actor=data.get("actor", ""),
            step=data.get("step"),
            peer=data.get("peer", ""),
            channel=data.get("channel", ""),
            payload_class=PayloadClass(pc) if pc else None,
            payload=data.get("payload") or b"",
            detail=data.get("detail") or {},
        )


class ProtocolTrace:
    def __init__(self) -> None:
        self._events: list[TraceEvent] = []
        self._lock = threading.Lock()

    def record(self, kind: EventKind, **fields: Any) -> TraceEvent:
        with self._lock:
            event = TraceEvent(len(self._events), EventKind(kind), **fields)
            self._events.append(event)
        return event

    @property
    def events(self) -> tuple[TraceEvent, ...]:
        with self._lock:
            return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(self.events)

    def wire_payloads(self) -> list[TraceEvent]:
        """Events that put bytes on a wire: messages and ledger submissions."""
        return [e for e in self.events if e.kind in (EventKind.SEND, EventKind.LEDGER)]

    def to_lines(self) -> str:
        return "".join(canonical.dumps_text(e.to_dict()) + "\n" for e in self.events)

    def digest(self) -> str:
        return hashlib.sha256(self.to_lines().encode()).hexdigest()

    def export(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_lines())
        return path


def load_events(path: str | Path) -> list[TraceEvent]:
    return [
        TraceEvent.from_dict(canonical.loads(line))
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]


def filter_events(
    events: Iterable[TraceEvent],
    step: int | None = None,
    actor: str | None = None,
    payload_class: str | None = None,
    kind: str | None = None,
    tx_kind: str | None = None,
) -> list[TraceEvent]:
    out = []
    for e in events:
        if step is not None and e.step != step:
            continue
        if actor is not None and actor not in (e.actor, e.peer):
            continue
        if payload_class is not None and (e.payload_class is None or e.payload_class.value != payload_class):
            continue
        if kind is not None and e.kind.value != kind:
            continue
        if tx_kind is not None and e.detail.get("tx_kind") != tx_kind:
            continue
        out.append(e)
    return out
