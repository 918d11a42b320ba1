"""Storage nodes, the public staging space and the self-hosted backend."""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .. import canonical


class StorageError(Exception):
    pass


class LocationUnreachable(StorageError):
    def __init__(self, message: str, index: int | None = None, location: str | None = None) -> None:
        super().__init__(message)
        self.index = index
        self.location = location


class StagingUnreachable(StorageError):
    pass


class ObjectNotFound(StorageError):
    pass


class BlobStore(Protocol):
    """Anything that stores opaque blobs under string keys."""

    def put(self, key: str, data: bytes) -> None: ...

    def get(self, key: str) -> bytes: ...


class StorageNode:
    """One storage location: an in-memory key/value store that can go offline."""

    def __init__(self, location_id: str, online: bool = True) -> None:
        self.location_id = location_id
        self.online = online
        self._blobs: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def _require_online(self) -> None:
        if not self.online:
            raise LocationUnreachable(f"{self.location_id} is offline", location=self.location_id)

    def put(self, key: str, data: bytes) -> None:
        self._require_online()
        with self._lock:
            self._blobs[key] = bytes(data)

    def get(self, key: str) -> bytes:
        self._require_online()
        with self._lock:
            if key not in self._blobs:
                raise ObjectNotFound(f"{self.location_id} has no object {key}")
            return self._blobs[key]

    def keys(self) -> list[str]:
        with self._lock:
            return sorted(self._blobs)

    def corrupt(self, key: str, flip_index: int = 0) -> None:
        """Flip one bit of a stored object (fault injection)."""
        with self._lock:
            blob = bytearray(self._blobs[key])
            if blob:
                blob[flip_index % len(blob)] ^= 0x01
            self._blobs[key] = bytes(blob)


class DirectoryNode:
    """Blob store on the local filesystem, for self-hosted data servers."""

    def __init__(self, root: str | Path, location_id: str = "selfhost") -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.location_id = location_id
        self.online = True

    def _path(self, key: str) -> Path:
        return self.root / hashlib.sha256(key.encode()).hexdigest()

    def put(self, key: str, data: bytes) -> None:
        if not self.online:
            raise LocationUnreachable(f"{self.location_id} is offline", location=self.location_id)
        self._path(key).write_bytes(data)

    def get(self, key: str) -> bytes:
        if not self.online:
            raise LocationUnreachable(f"{self.location_id} is offline", location=self.location_id)
        path = self._path(key)
        if not path.exists():
            raise ObjectNotFound(key)
        return path.read_bytes()


def content_address(data: bytes) -> str:
    return "cas://" + hashlib.sha256(data).hexdigest()


class StagingSpace:
    """Public content-addressed space where sources stage ciphertexts for consumers."""

    def __init__(self, node: BlobStore | None = None) -> None:
        self.node = node if node is not None else StorageNode("staging")

    def upload(self, data: bytes) -> str:
        address = content_address(data)
        try:
            self.node.put(address, data)
        except (LocationUnreachable, ObjectNotFound) as exc:
            raise StagingUnreachable(str(exc)) from None
        return address

    def download(self, address: str) -> bytes:
        try:
            data = self.node.get(address)
        except (LocationUnreachable, ObjectNotFound) as exc:
            raise StagingUnreachable(str(exc)) from None
        if content_address(data) != address:
            raise StagingUnreachable(f"content at {address} does not match its address")
        return data


@dataclass(frozen=True)
class StorageInfo:
    """Where a source staged its encrypted data and wrapped key (``m``)."""

    backend: str
    data_handle: str
    key_handle: str

    def to_dict(self) -> dict[str, str]:
        return {"backend": self.backend, "data": self.data_handle, "key": self.key_handle}

    def to_bytes(self) -> bytes:
        return canonical.dumps(self.to_dict())

    @classmethod
    def from_bytes(cls, data: bytes) -> StorageInfo:
        decoded = canonical.loads(data)
        return cls(decoded["backend"], decoded["data"], decoded["key"])


class SelfHostedStore:
    """A source's own database or data server: one node, opaque handles."""

    kind = "self-hosted"

    def __init__(self, node: BlobStore, owner: str = "") -> None:
        self.node = node
        self.owner = owner
        self._counter = 0

    def store(self, data: bytes) -> str:
        self._counter += 1
        location = getattr(self.node, "location_id", "selfhost")
        handle = f"self://{location}/{self.owner}/{self._counter}-{hashlib.sha256(data).hexdigest()[:16]}"
        self.node.put(handle, data)
        return handle

    def load(self, handle: str) -> bytes:
        return self.node.get(handle)
