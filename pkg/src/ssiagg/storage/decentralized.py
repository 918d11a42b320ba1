"""The three storage layers wired together for one data source."""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass

from ..crypto import CryptoProvider, DecryptionFailure, SymmetricKey
from ..ledger import FinalizationResult, Ledger, Transaction
from .backends import BlobStore, StorageError
from .chain import parse_locations, record_locations
from .mapping import LocationTable, RoundRobinPolicy, assign_and_upload, fetch
from .partition import PartitionSet, assemble, partition


class CorruptPartition(StorageError):
    def __init__(self, index: int) -> None:
        super().__init__(f"partition {index} failed to decrypt")
        self.index = index


@dataclass
class DecentralizedStore:
    """Partition, optionally encrypt, scatter, and record the location set on chain.

    With ``key`` set each partition is encrypted before upload and the
    location transaction is encrypted too.
    """

    ledger: Ledger
    table: LocationTable
    nodes: Mapping[str, BlobStore]
    provider: CryptoProvider
    gamma: float = 0.0
    policy: RoundRobinPolicy | None = None
    key: SymmetricKey | None = None
    owner: str = ""
    submitter: str = ""
    parallel: bool = False
    submit: Callable[[Transaction], FinalizationResult] | None = None

    kind = "decentralized"

    def store(self, data: bytes) -> Transaction:
        parts = partition(data, self.gamma)
        if self.key is not None:
            parts = PartitionSet(
                tuple(self.provider.encrypt(p, self.key).to_bytes() for p in parts), parts.gamma
            )
        locations = assign_and_upload(parts, self.table, self.nodes, self.policy, self.owner)
        return record_locations(
            self.ledger, locations, self.key, self.provider, self.submitter, self.submit
        )

    def load(self, location_tx: Transaction) -> bytes:
        locations = parse_locations(location_tx, self.key, self.provider)
        parts = fetch(locations, self.nodes, parallel=self.parallel)
        if self.key is not None:
            plain = []
            for index, chunk in enumerate(parts):
                try:
                    plain.append(self.provider.decrypt(chunk, self.key))
                except DecryptionFailure:
                    raise CorruptPartition(index) from None
            parts = PartitionSet(tuple(plain), self.gamma)
        return assemble(parts)
