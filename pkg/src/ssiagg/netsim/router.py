"""Message router: per-channel FIFO delivery, port registry, drop rules, tracing."""

from __future__ import annotations

import threading
from collections import defaultdict, deque
from dataclasses import dataclass

from ..crypto import is_ciphertext
from ..storage.backends import BlobStore, LocationUnreachable
from ..trace import EventKind, PayloadClass, ProtocolTrace


class RoutingError(Exception):
    pass


class NoMessage(RoutingError):
    pass


class PortClosed(RoutingError):
    pass


@dataclass(frozen=True)
class MessageEnvelope:
    sender: str
    recipient: str
    channel: str
    payload: bytes
    payload_class: PayloadClass
    seq: int
    step: int | None = None
    label: str = ""


@dataclass(frozen=True)
class DropRule:
    """Drop messages sent by ``sender`` at protocol ``step`` (``None`` matches any)."""

    sender: str | None = None
    step: int | None = None
    channel_prefix: str | None = None

    def matches(self, sender: str, step: int | None, channel: str) -> bool:
        return (
            (self.sender is None or self.sender == sender)
            and (self.step is None or self.step == step)
            and (self.channel_prefix is None or channel.startswith(self.channel_prefix))
        )


def is_port(channel: str) -> bool:
    return channel.startswith("port:")


class Router:
    def __init__(self, trace: ProtocolTrace) -> None:
        self.trace = trace
        self._mailboxes: dict[tuple[str, str], deque[MessageEnvelope]] = defaultdict(deque)
        self._seq: dict[str, int] = defaultdict(int)
        self._ports: set[str] = set()
        self.drop_rules: list[DropRule] = []
        self._lock = threading.Lock()

    def open_port(self, port: str, owner: str) -> None:
        if not is_port(port):
            raise ValueError(f"port names start with 'port:', got {port!r}")
        with self._lock:
            self._ports.add(port)
        self.trace.record(EventKind.STEP, actor=owner, channel=port, detail={"event": "port-open"})

    def close_port(self, port: str, owner: str) -> None:
        with self._lock:
            self._ports.discard(port)
        self.trace.record(EventKind.STEP, actor=owner, channel=port, detail={"event": "port-close"})

    def send(
        self,
        sender: str,
        recipient: str,
        channel: str,
        payload: bytes,
        payload_class: PayloadClass,
        step: int | None = None,
        label: str = "",
    ) -> MessageEnvelope | None:
        """Queue a message; returns ``None`` when it was dropped."""
        payload_class = PayloadClass(payload_class)
        if payload_class is PayloadClass.CIPHERTEXT and not is_ciphertext(payload):
            raise RoutingError(f"{label or channel}: payload classified ciphertext is not one")
        with self._lock:
            self._seq[channel] += 1
            envelope = MessageEnvelope(
                sender, recipient, channel, bytes(payload), payload_class, self._seq[channel], step, label
            )
            dropped = None
            if is_port(channel) and channel not in self._ports:
                dropped = "port-closed"
            elif any(rule.matches(sender, step, channel) for rule in self.drop_rules):
                dropped = "fault"
            if dropped is None:
                self._mailboxes[(recipient, channel)].append(envelope)
        self.trace.record(
            EventKind.SEND,
            actor=sender,
            peer=recipient,
            step=step,
            channel=channel,
            payload_class=payload_class,
            payload=envelope.payload,
            detail={"label": label, "seq": envelope.seq},
        )
        if dropped is not None:
            self.trace.record(
                EventKind.DROP,
                actor=sender,
                peer=recipient,
                step=step,
                channel=channel,
                detail={"label": label, "seq": envelope.seq, "reason": dropped},
            )
            return None
        return envelope

    def receive(self, recipient: str, channel: str, sender: str | None = None) -> MessageEnvelope:
        """Pop the oldest message for ``recipient`` on ``channel`` (optionally from ``sender``)."""
        with self._lock:
            box = self._mailboxes[(recipient, channel)]
            for i, envelope in enumerate(box):
                if sender is None or envelope.sender == sender:
                    del box[i]
                    break
            else:
                closed = is_port(channel) and channel not in self._ports
                envelope = None
        if envelope is None:
            if closed:
                raise PortClosed(f"{channel} is closed")
            raise NoMessage(f"no message for {recipient} on {channel}")
        self.trace.record(
            EventKind.RECV,
            actor=recipient,
            peer=envelope.sender,
            step=envelope.step,
            channel=channel,
            detail={"label": envelope.label, "seq": envelope.seq},
        )
        return envelope


class RoutedNode:
    """Blob-store proxy whose requests and replies travel through the router.

    A dropped request or reply surfaces as :class:`LocationUnreachable`.
    """

    def __init__(
        self,
        router: Router,
        client: str,
        node: BlobStore,
        step: int | None = None,
        payload_class: PayloadClass = PayloadClass.CIPHERTEXT,
    ) -> None:
        self.router = router
        self.client = client
        self.node = node
        self.location_id = getattr(node, "location_id", "node")
        self.step = step
        self.payload_class = payload_class

    @property
    def address(self) -> str:
        return f"storage:{self.location_id}"

    def put(self, key: str, data: bytes) -> None:
        channel = f"storage:{self.location_id}"
        if self.router.send(self.client, self.address, channel, data, self.payload_class, self.step, f"put {key}") is None:
            raise LocationUnreachable(f"upload to {self.location_id} was lost", location=self.location_id)
        self.router.receive(self.address, channel, sender=self.client)
        self.node.put(key, data)

    def get(self, key: str) -> bytes:
        channel = f"storage:{self.location_id}"
        request = key.encode()
        if self.router.send(self.client, self.address, channel, request, PayloadClass.PLAINTEXT, self.step, f"get {key}") is None:
            raise LocationUnreachable(f"request to {self.location_id} was lost", location=self.location_id)
        self.router.receive(self.address, channel, sender=self.client)
        data = self.node.get(key)
        reply = self.router.send(self.address, self.client, channel, data, self.payload_class, self.step, f"reply {key}")
        if reply is None:
            raise LocationUnreachable(f"reply from {self.location_id} was lost", location=self.location_id)
        return self.router.receive(self.client, channel, sender=self.address).payload
