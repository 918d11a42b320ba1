"""In-process distributed ledger with per-node acceptance and threshold finalization.

A transaction is finalized when strictly more than ``delta * node_count``
nodes accept it. Finalized transactions get the next value of a logical
counter as their timestamp and are never mutated or removed. Transactions
that miss the threshold are dropped and reported as not finalized.
"""

from __future__ import annotations

import copy
import hashlib
import random
import threading
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType
from typing import Any

from . import canonical


class LedgerError(Exception):
    pass


class MalformedTransaction(LedgerError):
    pass


class LedgerRejection(LedgerError):
    """A transaction did not reach the finalization threshold."""

    def __init__(self, message: str, result: FinalizationResult | None = None) -> None:
        super().__init__(message)
        self.result = result


class TxKind(str, Enum):
    PROPAGATION = "propagation"
    UPDATE = "update"
    DELETION = "deletion"
    LOCATION = "location"
    COLLECTION = "collection"
    ENDORSEMENT = "endorsement"
    STORAGE = "storage"


REQUIRED_KEYS: dict[TxKind, frozenset[str]] = {
    TxKind.PROPAGATION: frozenset({"did", "auth", "assert"}),
    TxKind.UPDATE: frozenset({"did", "auth", "assert"}),
    TxKind.DELETION: frozenset({"did", "deleted"}),
    TxKind.LOCATION: frozenset({"locations", "encrypted"}),
    TxKind.COLLECTION: frozenset({"srcIds"}),
    TxKind.ENDORSEMENT: frozenset({"s", "c"}),
    TxKind.STORAGE: frozenset({"vc", "storage"}),
}


class _Absent:
    _instance = None

    def __new__(cls) -> _Absent:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABSENT"

    def __bool__(self) -> bool:
        return False


ABSENT = _Absent()


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    properties: Mapping[str, Any]
    submitter: str = ""
    timestamp: int | None = None
    tx_id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TxKind(self.kind))
        if not isinstance(self.properties, MappingProxyType):
            object.__setattr__(self, "properties", MappingProxyType(copy.deepcopy(dict(self.properties))))

    def __getitem__(self, name: str) -> Any:
        return self.properties[name]

    def get(self, name: str, default: Any = ABSENT) -> Any:
        return self.properties.get(name, default)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.tx_id,
            "kind": self.kind.value,
            "timestamp": self.timestamp,
            "submitter": self.submitter,
            "properties": dict(self.properties),
        }

    def canonical(self) -> bytes:
        return canonical.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Transaction:
        return cls(
            kind=TxKind(data["kind"]),
            properties=data["properties"],
            submitter=data.get("submitter", ""),
            timestamp=data.get("timestamp"),
            tx_id=data.get("id", ""),
        )


def get_property(tx: Transaction, name: str) -> Any:
    """Value of property ``name`` on ``tx``, or :data:`ABSENT`."""
    return tx.properties.get(name, ABSENT)


def validate(tx: Transaction) -> None:
    missing = REQUIRED_KEYS[tx.kind] - set(tx.properties)
    if missing:
        raise MalformedTransaction(f"{tx.kind.value} transaction missing {sorted(missing)}")
    if tx.kind is TxKind.DELETION and tx.properties["deleted"] is not True:
        raise MalformedTransaction("deletion transaction must carry deleted=True")


@dataclass(frozen=True)
class FinalizationResult:
    accepted_nodes: int
    finalized: bool
    transaction_id: str
    transaction: Transaction | None = field(default=None, compare=False, repr=False)

    def __bool__(self) -> bool:
        return self.finalized


# Node acceptance policies. "honest" accepts every well-formed transaction,
# "reject" refuses everything, "random" flips a seeded coin per transaction.
NODE_POLICIES = ("honest", "reject", "random")


@dataclass(frozen=True)
class LedgerConfig:
    node_count: int = 4
    delta: Fraction = Fraction(2, 3)
    node_policies: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta", Fraction(self.delta))
        if self.node_count < 2:
            raise ValueError("a ledger needs at least two nodes")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie strictly between 0 and 1")
        policies = tuple(self.node_policies) or ("honest",) * self.node_count
        if len(policies) != self.node_count:
            raise ValueError("one acceptance policy per node is required")
        unknown = set(policies) - set(NODE_POLICIES)
        if unknown:
            raise ValueError(f"unknown node policies {sorted(unknown)}")
        object.__setattr__(self, "node_policies", policies)

    @classmethod
    def byzantine(
        cls, node_count: int, delta: Fraction | str, k: int, mode: str = "reject", seed: int = 0
    ) -> LedgerConfig:
        """``k`` misbehaving nodes (``mode`` is "reject" or "random"), the rest honest."""
        if not 0 <= k <= node_count:
            raise ValueError("k must be within [0, node_count]")
        return cls(node_count, Fraction(delta), (mode,) * k + ("honest",) * (node_count - k), seed)

    def threshold_met(self, accepted: int) -> bool:
        return accepted > self.delta * self.node_count


class Ledger:
    """Finalized transaction log shared by every actor of a simulation."""

    def __init__(self, config: LedgerConfig | None = None) -> None:
        self.config = config or LedgerConfig()
        self._rng = random.Random(self.config.seed)
        self._lock = threading.Lock()
        self._finalized: list[Transaction] = []
        self._clock = 0
        self._submitted = 0
        self._listeners: list[Callable[[Transaction, FinalizationResult], None]] = []

    def subscribe(self, listener: Callable[[Transaction, FinalizationResult], None]) -> None:
        """Call ``listener(tx, result)`` after every submit, finalized or not."""
        self._listeners.append(listener)

    def _accepts(self, policy: str, tx: Transaction) -> bool:
        if policy == "honest":
            return True
        if policy == "reject":
            return False
        return self._rng.random() < 0.5

    def submit(self, tx: Transaction) -> FinalizationResult:
        validate(tx)
        with self._lock:
            self._submitted += 1
            digest = hashlib.sha256(
                canonical.dumps([self._submitted, tx.kind.value, tx.submitter, dict(tx.properties)])
            ).hexdigest()
            tx_id = f"tx-{digest[:16]}"
            accepted = sum(self._accepts(p, tx) for p in self.config.node_policies)
            finalized = self.config.threshold_met(accepted)
            stored = None
            if finalized:
                self._clock += 1
                stored = replace(tx, timestamp=self._clock, tx_id=tx_id)
                self._finalized.append(stored)
            result = FinalizationResult(accepted, finalized, tx_id, stored)
        for listener in self._listeners:
            listener(stored or replace(tx, tx_id=tx_id), result)
        return result

    def snapshot(self) -> tuple[Transaction, ...]:
        with self._lock:
            return tuple(self._finalized)

    def __len__(self) -> int:
        return len(self._finalized)

    def query(
        self,
        where: Mapping[str, Any] | None = None,
        *,
        kind: TxKind | Iterable[TxKind] | None = None,
        predicate: Callable[[Transaction], bool] | None = None,
    ) -> list[Transaction]:
        """Finalized transactions matching every condition, oldest first.

        ``where`` matches properties by equality; ``kind`` restricts the
        transaction type; ``predicate`` is an arbitrary extra filter.
        """
        kinds: set[TxKind] | None = None
        if kind is not None:
            kinds = {TxKind(kind)} if isinstance(kind, (TxKind, str)) else {TxKind(k) for k in kind}
        out = []
        for tx in self.snapshot():
            if kinds is not None and tx.kind not in kinds:
                continue
            if where and any(tx.properties.get(k, ABSENT) != v for k, v in where.items()):
                continue
            if predicate is not None and not predicate(tx):
                continue
            out.append(tx)
        return out

    def get(self, tx_id: str) -> Transaction | None:
        for tx in self.snapshot():
            if tx.tx_id == tx_id:
                return tx
        return None

    def export(self, path: str | Path) -> Path:
        """Write the finalized log, one canonical record per line."""
        path = Path(path)
        path.write_text("".join(tx.canonical().decode() + "\n" for tx in self.snapshot()))
        return path


def load_log(path: str | Path) -> list[Transaction]:
    return [
        Transaction.from_dict(canonical.loads(line))
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]


def count_by_kind(txs: Sequence[Transaction]) -> dict[TxKind, int]:
    counts: dict[TxKind, int] = {}
    for tx in txs:
        counts[tx.kind] = counts.get(tx.kind, 0) + 1
    return counts
