"""Partition layer: split data into an ordered chunk set and reassemble it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


class InvalidScatterDegree(ValueError):
    pass


class MissingPartition(LookupError):
    def __init__(self, index: int) -> None:
        super().__init__(f"partition {index} is missing")
        self.index = index


def partition_count(gamma: float | Fraction) -> int:
    """1 when ``gamma`` is 0, otherwise ``floor(1/gamma) + 1`` (chunks d_0..d_i, i = floor(1/gamma))."""
    if not 0 <= gamma < 1:
        raise InvalidScatterDegree(f"scatter degree must lie in [0, 1), got {gamma}")
    if gamma == 0:
        return 1
    return math.floor(1 / gamma) + 1


@dataclass(frozen=True)
class PartitionSet:
    """Ordered chunks; ``None`` marks a chunk that has not been retrieved."""

    partitions: tuple[bytes | None, ...]
    gamma: float = 0.0

    def __len__(self) -> int:
        return len(self.partitions)

    def __iter__(self):
        return iter(self.partitions)

    def __getitem__(self, index: int) -> bytes | None:
        return self.partitions[index]


def chunk_sizes(length: int, count: int) -> list[int]:
    """Near-equal split: the first ``length % count`` chunks are one byte longer."""
    base, extra = divmod(length, count)
    return [base + 1 if k < extra else base for k in range(count)]


def partition(d: bytes, gamma: float | Fraction) -> PartitionSet:
    """Split ``d`` into ``partition_count(gamma)`` near-equal ordered chunks.

    When there are more chunks than bytes, each leading chunk holds one byte
    and the trailing chunks are empty.
    """
    count = partition_count(gamma)
    if not d:
        raise ValueError("cannot partition empty data")
    chunks, offset = [], 0
    for size in chunk_sizes(len(d), count):
        chunks.append(bytes(d[offset:offset + size]))
        offset += size
    return PartitionSet(tuple(chunks), gamma)


def assemble(parts: PartitionSet) -> bytes:
    """Concatenate the chunks in their stored order."""
    for index, chunk in enumerate(parts.partitions):
        if chunk is None:
            raise MissingPartition(index)
    return b"".join(parts.partitions)
