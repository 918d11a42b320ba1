"""Mapping layer: the location table, selection policies, upload and fetch."""

from __future__ import annotations

import hashlib
import threading
from collections.abc import Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .backends import BlobStore, LocationUnreachable, ObjectNotFound, StorageError
from .partition import PartitionSet


class InsufficientLocations(StorageError):
    pass


class UploadFailure(StorageError):
    def __init__(self, message: str, index: int) -> None:
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class LocationEntry:
    location_id: str
    available: bool = True
    reputation: float = 1.0
    cost: float = 1.0


class LocationTable:
    """Known storage locations; reads are lock-free snapshots, writes serialize."""

    def __init__(self, entries: Sequence[LocationEntry] = ()) -> None:
        self._entries = {e.location_id: e for e in entries}
        self._lock = threading.Lock()

    def entries(self) -> list[LocationEntry]:
        return sorted(self._entries.values(), key=lambda e: e.location_id)

    def available(self) -> list[LocationEntry]:
        return [e for e in self.entries() if e.available]

    def add(self, entry: LocationEntry) -> None:
        with self._lock:
            self._entries = {**self._entries, entry.location_id: entry}

    def set_available(self, location_id: str, available: bool) -> None:
        with self._lock:
            entry = self._entries[location_id]
            self._entries = {**self._entries, location_id: replace(entry, available=available)}

    def __len__(self) -> int:
        return len(self._entries)


class RoundRobinPolicy:
    """Available locations in id order; partition k goes to location k mod n."""

    name = "round-robin"
    allow_reuse = True

    def rank(self, available: Sequence[LocationEntry]) -> list[LocationEntry]:
        return sorted(available, key=lambda e: e.location_id)


class WeightedScorePolicy(RoundRobinPolicy):
    """Highest reputation first, then cheapest, then location id."""

    name = "weighted"

    def rank(self, available: Sequence[LocationEntry]) -> list[LocationEntry]:
        return sorted(available, key=lambda e: (-e.reputation, e.cost, e.location_id))


POLICIES = {p.name: p for p in (RoundRobinPolicy(), WeightedScorePolicy())}


@dataclass(frozen=True)
class LocationSet:
    """Ordered storage handles; handle k stores partition k."""

    locations: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.locations)

    def __iter__(self) -> Iterator[str]:
        return iter(self.locations)

    def __getitem__(self, index: int) -> str:
        return self.locations[index]


def make_handle(location_id: str, key: str) -> str:
    return f"loc://{location_id}/{key}"


def split_handle(handle: str) -> tuple[str, str]:
    if not handle.startswith("loc://"):
        raise ValueError(f"not a location handle: {handle!r}")
    location_id, _, key = handle[len("loc://"):].partition("/")
    return location_id, key


def assign_and_upload(
    parts: PartitionSet,
    table: LocationTable,
    nodes: Mapping[str, BlobStore],
    policy: RoundRobinPolicy | None = None,
    owner: str = "",
) -> LocationSet:
    """Choose a location per partition, upload it, and return the ordered handles.

    Partition k goes to the ``k mod n``-th ranked location. If that upload
    fails the location is marked unavailable and the next ranked location is
    tried; every candidate failing raises :class:`UploadFailure`.
    """
    policy = policy or RoundRobinPolicy()
    ranked = policy.rank(table.available())
    if not ranked:
        raise InsufficientLocations("no storage location is available")
    if not policy.allow_reuse and len(ranked) < len(parts):
        raise InsufficientLocations(f"{len(parts)} partitions but {len(ranked)} locations")
    handles = []
    for index, chunk in enumerate(parts.partitions):
        if chunk is None:
            raise ValueError(f"partition {index} is missing")
        key = f"{owner}/{index}-{hashlib.sha256(chunk).hexdigest()[:16]}"
        for attempt in range(len(ranked)):
            entry = ranked[(index + attempt) % len(ranked)]
            if not table_entry_available(table, entry.location_id):
                continue
            try:
                nodes[entry.location_id].put(key, chunk)
            except (LocationUnreachable, ObjectNotFound, KeyError):
                table.set_available(entry.location_id, False)
                continue
            handles.append(make_handle(entry.location_id, key))
            break
        else:
            raise UploadFailure(f"no location accepted partition {index}", index)
    return LocationSet(tuple(handles))


def table_entry_available(table: LocationTable, location_id: str) -> bool:
    return any(e.location_id == location_id for e in table.available())


def fetch(
    locations: LocationSet, nodes: Mapping[str, BlobStore], parallel: bool = False
) -> PartitionSet:
    """Download every partition named by ``locations``, keeping their order."""

    def one(item: tuple[int, str]) -> bytes:
        index, handle = item
        location_id, key = split_handle(handle)
        node = nodes.get(location_id)
        if node is None:
            raise LocationUnreachable(f"unknown location {location_id}", index, location_id)
        try:
            return node.get(key)
        except (LocationUnreachable, ObjectNotFound) as exc:
            raise LocationUnreachable(
                f"partition {index} at {location_id}: {exc}", index, location_id
            ) from None

    items = list(enumerate(locations.locations))
    if parallel and len(items) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(items))) as pool:
            chunks = list(pool.map(one, items))
    else:
        chunks = [one(item) for item in items]
    return PartitionSet(tuple(chunks))
