"""Transformation specifications and the Processor that applies them.

A transformation is a per-source field mapping applied record by record,
followed by ordered concatenation of every source's records. A mapping runs
``select`` (keep only these dotted paths), then ``rename`` (move a path to a
new path), then ``nest`` (move fields under a group). The merged records are
validated against the declared output specification.
"""

from __future__ import annotations

import copy
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from ..storage.adapter import DataSpecification, Envelope, SchemaViolation, apply_adapter, validate


class UnknownFieldInPsi(KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown field"


_MISSING = object()


def _get(record: Mapping[str, Any], path: str) -> Any:
    node: Any = record
    for part in path.split("."):
        if not isinstance(node, Mapping) or part not in node:
            return _MISSING
        node = node[part]
    return node


def _pop(record: dict[str, Any], path: str) -> Any:
    *parents, leaf = path.split(".")
    node: Any = record
    for part in parents:
        node = node.get(part) if isinstance(node, dict) else None
    if not isinstance(node, dict) or leaf not in node:
        raise UnknownFieldInPsi(f"transformation references missing field {path!r}")
    value = node.pop(leaf)
    # drop groups emptied by the move
    if parents and not node:
        _prune(record, parents)
    return value


def _prune(record: dict[str, Any], parents: list[str]) -> None:
    for depth in range(len(parents), 0, -1):
        node: Any = record
        for part in parents[:depth - 1]:
            node = node[part]
        if node.get(parents[depth - 1]) == {}:
            del node[parents[depth - 1]]


def _set(record: dict[str, Any], path: str, value: Any) -> None:
    *parents, leaf = path.split(".")
    node = record
    for part in parents:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise SchemaViolation(f"cannot nest under non-record field {part!r}")
    node[leaf] = value


@dataclass(frozen=True)
class FieldMapping:
    select: tuple[str, ...] | None = None
    rename: Mapping[str, str] = field(default_factory=dict)
    nest: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def is_identity(self) -> bool:
        return self.select is None and not self.rename and not self.nest

    def apply(self, record: Mapping[str, Any]) -> dict[str, Any]:
        if self.select is not None:
            out: dict[str, Any] = {}
            for path in self.select:
                value = _get(record, path)
                if value is _MISSING:
                    raise UnknownFieldInPsi(f"transformation selects missing field {path!r}")
                _set(out, path, copy.deepcopy(value))
        else:
            out = copy.deepcopy(dict(record))
        for old, new in self.rename.items():
            _set(out, new, _pop(out, old))
        for group, paths in self.nest.items():
            for path in paths:
                _set(out, f"{group}.{path.split('.')[-1]}", _pop(out, path))
        return out

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if self.select is not None:
            out["select"] = list(self.select)
        if self.rename:
            out["rename"] = dict(self.rename)
        if self.nest:
            out["nest"] = {k: list(v) for k, v in self.nest.items()}
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> FieldMapping:
        select = data.get("select")
        return cls(
            select=tuple(select) if select is not None else None,
            rename=dict(data.get("rename") or {}),
            nest={k: tuple(v) for k, v in (data.get("nest") or {}).items()},
        )


@dataclass(frozen=True)
class TransformSpec:
    """Field mapping (default and per-source overrides) plus the output specification."""

    default: FieldMapping = field(default_factory=FieldMapping)
    per_source: Mapping[str, FieldMapping] = field(default_factory=dict)
    output_spec: DataSpecification | None = None

    def mapping_for(self, source_id: str | None) -> FieldMapping:
        if source_id is not None and source_id in self.per_source:
            return self.per_source[source_id]
        return self.default

    def to_dict(self) -> dict[str, Any]:
        out = self.default.to_dict()
        if self.per_source:
            out["sources"] = {k: v.to_dict() for k, v in self.per_source.items()}
        if self.output_spec is not None:
            out["output_spec"] = self.output_spec.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], source_ids: Mapping[str, str] | None = None) -> TransformSpec:
        """``source_ids`` translates per-source keys (e.g. actor names) to DIDs."""
        per_source = {}
        for key, mapping in (data.get("sources") or {}).items():
            per_source[(source_ids or {}).get(key, key)] = FieldMapping.from_dict(mapping)
        output = data.get("output_spec")
        return cls(
            default=FieldMapping.from_dict(data),
            per_source=per_source,
            output_spec=DataSpecification.from_dict(output) if output is not None else None,
        )


def process_transform(
    envelopes: Sequence[Envelope | tuple[str, Envelope]],
    psi: TransformSpec,
) -> Envelope:
    """Apply ``psi`` to each source envelope (in the given order) and merge.

    Items may be bare envelopes or ``(source_id, envelope)`` pairs; the id
    selects a per-source mapping.
    """
    records: list[Any] = []
    specs = []
    for item in envelopes:
        source_id, envelope = item if isinstance(item, tuple) else (None, item)
        specs.append(envelope.spec)
        mapping = psi.mapping_for(source_id)
        for record in apply_adapter(envelope.records(), envelope.spec):
            records.append(mapping.apply(record))
    output_spec = psi.output_spec
    if output_spec is None:
        identity = psi.default.is_identity and all(m.is_identity for m in psi.per_source.values())
        if not specs or not identity or any(s != specs[0] for s in specs):
            raise SchemaViolation("an output specification is required for this transformation")
        output_spec = specs[0]
    validate(records, output_spec)
    return Envelope(output_spec, records)
