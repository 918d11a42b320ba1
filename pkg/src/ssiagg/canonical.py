"""Canonical textual encoding shared by every signable or exported object.

Sorted keys, no insignificant whitespace, UTF-8. Byte strings are wrapped
as ``{"$b": "<base64>"}`` so they survive a roundtrip; sets are emitted as
sorted lists. Two semantically identical values always encode to the same
bytes, which is what signatures and digests are computed over.
"""

from __future__ import annotations

import base64
import json
from enum import Enum
from typing import Any

_BYTES_TAG = "$b"


def _prepare(value: Any) -> Any:
    if isinstance(value, (bytes, bytearray, memoryview)):
        return {_BYTES_TAG: base64.b64encode(bytes(value)).decode("ascii")}
    if isinstance(value, Enum):
        return _prepare(value.value)
    if isinstance(value, dict) or hasattr(value, "items"):
        if len(value) == 1 and _BYTES_TAG in value:
            raise TypeError(f"a mapping whose only key is {_BYTES_TAG!r} is reserved for bytes")
        out = {}
        for key, item in value.items():
            if not isinstance(key, str):
                raise TypeError(f"canonical mapping keys must be str, got {type(key).__name__}")
            out[key] = _prepare(item)
        return out
    if isinstance(value, (set, frozenset)):
        items = [_prepare(v) for v in value]
        return sorted(items, key=lambda v: json.dumps(v, sort_keys=True, separators=(",", ":")))
    if isinstance(value, (list, tuple)):
        return [_prepare(v) for v in value]
    if hasattr(value, "to_dict"):
        return _prepare(value.to_dict())
    if value is None or isinstance(value, (str, bool, int, float)):
        return value
    raise TypeError(f"cannot canonically encode {type(value).__name__}")


def _restore(value: Any) -> Any:
    if isinstance(value, dict):
        if len(value) == 1 and _BYTES_TAG in value:
            return base64.b64decode(value[_BYTES_TAG], validate=True)
        return {k: _restore(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_restore(v) for v in value]
    return value


def dumps(value: Any) -> bytes:
    """Encode ``value`` to canonical bytes."""
    return json.dumps(
        _prepare(value),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def dumps_text(value: Any) -> str:
    return dumps(value).decode("utf-8")


def loads(data: bytes | str) -> Any:
    """Decode canonical bytes; wrapped byte strings come back as ``bytes``."""
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8")
    return _restore(json.loads(data))


def to_plain(value: Any) -> Any:
    """JSON-compatible form of ``value`` (bytes wrapped), without serializing."""
    return _prepare(value)


def from_plain(value: Any) -> Any:
    return _restore(value)
