"""Data specifications, the adapter that reshapes raw records, and data envelopes.

A specification maps field names to ``"string"``, ``"number"``, a named
record type, or an inline mapping. Two spellings are accepted:

* flat: ``{"firstName": "string", "age": "number"}`` is itself the record;
* type table: every top-level value is a mapping, e.g.
  ``{"Name": {...}, "Person": {"name": "Name", "age": "number"}}``. The root
  is the single type no other type references (or the explicit ``root``).
"""

from __future__ import annotations

import copy
import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

from .. import canonical

PRIMITIVES = ("string", "number")


class SchemaViolation(ValueError):
    pass


class InvalidSpecification(ValueError):
    pass


@dataclass(frozen=True)
class DataSpecification:
    schema: Mapping[str, Any]
    root: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "schema", copy.deepcopy(dict(self.schema)))
        if not self.schema:
            raise InvalidSpecification("empty specification")
        if self.root is None and self.is_type_table():
            referenced = {
                t for fields in self.schema.values() for t in _type_refs(fields)
            }
            roots = [name for name in self.schema if name not in referenced]
            if len(roots) != 1:
                raise InvalidSpecification(f"cannot infer root type, candidates {roots}")
            object.__setattr__(self, "root", roots[0])
        if self.root is not None and self.root not in self.schema:
            raise InvalidSpecification(f"root type {self.root!r} is not defined")
        self._check(self.root_fields(), ())

    def is_type_table(self) -> bool:
        return all(isinstance(v, Mapping) for v in self.schema.values())

    def types(self) -> Mapping[str, Any]:
        return self.schema if self.root is not None else {}

    def root_fields(self) -> Mapping[str, Any]:
        return self.schema[self.root] if self.root is not None else self.schema

    def resolve(self, type_ref: Any) -> Mapping[str, Any] | str:
        """Field mapping of a record type, or the primitive name."""
        if isinstance(type_ref, Mapping):
            return type_ref
        if type_ref in PRIMITIVES:
            return type_ref
        if type_ref in self.types():
            return self.types()[type_ref]
        raise InvalidSpecification(f"unknown type {type_ref!r}")

    def _check(self, fields: Mapping[str, Any], stack: tuple[str, ...]) -> None:
        for name, type_ref in fields.items():
            if not isinstance(name, str):
                raise InvalidSpecification("field names must be strings")
            if isinstance(type_ref, str) and type_ref not in PRIMITIVES:
                if type_ref in stack:
                    raise InvalidSpecification(f"cyclic type reference through {type_ref!r}")
                self._check(self.resolve(type_ref), stack + (type_ref,))
            elif isinstance(type_ref, Mapping):
                self._check(type_ref, stack)
            elif not isinstance(type_ref, str):
                raise InvalidSpecification(f"bad type for field {name!r}")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"schema": self.schema}
        if self.root is not None:
            out["root"] = self.root
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> DataSpecification:
        if "schema" in data and set(data) <= {"schema", "root"}:
            return cls(data["schema"], data.get("root"))
        return cls(data)


def _type_refs(fields: Mapping[str, Any]):
    for type_ref in fields.values():
        if isinstance(type_ref, Mapping):
            yield from _type_refs(type_ref)
        elif type_ref not in PRIMITIVES:
            yield type_ref


def _lookup(raw: Mapping[str, Any], name: str) -> tuple[bool, Any]:
    """Find ``name`` in ``raw``, searching nested mappings depth-first."""
    if name in raw:
        return True, raw[name]
    for value in raw.values():
        if isinstance(value, Mapping):
            found, hit = _lookup(value, name)
            if found:
                return True, hit
    return False, None


def _coerce(value: Any, primitive: str, path: str) -> Any:
    if primitive == "string":
        if isinstance(value, str):
            return value
        raise SchemaViolation(f"{path}: expected string, got {type(value).__name__}")
    if isinstance(value, bool):
        raise SchemaViolation(f"{path}: expected number, got bool")
    if isinstance(value, (int, float)):
        if isinstance(value, float) and not math.isfinite(value):
            raise SchemaViolation(f"{path}: non-finite number")
        return value
    if isinstance(value, str):
        for parse in (int, float):
            try:
                number = parse(value.strip())
            except ValueError:
                continue
            if isinstance(number, float) and not math.isfinite(number):
                break
            return number
    raise SchemaViolation(f"{path}: expected number, got {value!r}")


def _adapt_record(raw: Mapping[str, Any], fields: Mapping[str, Any], spec: DataSpecification, path: str) -> dict:
    out = {}
    for name, type_ref in fields.items():
        where = f"{path}.{name}" if path else name
        kind = spec.resolve(type_ref)
        found, value = _lookup(raw, name)
        if isinstance(kind, str):
            if not found:
                raise SchemaViolation(f"{where}: missing field")
            out[name] = _coerce(value, kind, where)
        elif found and isinstance(value, Mapping):
            out[name] = _adapt_record(value, kind, spec, where)
        elif found and not isinstance(value, Mapping) and name in raw:
            raise SchemaViolation(f"{where}: expected a record, got {type(value).__name__}")
        else:
            # flat raw data: the nested record's fields live beside this one
            out[name] = _adapt_record(raw, kind, spec, where)
    return out


def apply_adapter(raw: Any, spec: DataSpecification) -> Any:
    """Reshape ``raw`` (a record or list of records) to match ``spec`` exactly.

    Fields are located by name anywhere in the raw record, re-nested per the
    specification, numeric strings coerced to numbers, and unknown fields
    dropped. Missing or untypeable fields raise :class:`SchemaViolation`.
    """
    if isinstance(raw, (list, tuple)):
        return [apply_adapter(item, spec) for item in raw]
    if not isinstance(raw, Mapping):
        raise SchemaViolation(f"expected a record, got {type(raw).__name__}")
    return _adapt_record(raw, spec.root_fields(), spec, "")


def validate(value: Any, spec: DataSpecification) -> None:
    """Raise :class:`SchemaViolation` unless ``value`` conforms exactly (no extras, no coercion)."""
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _validate_record(item, spec.root_fields(), spec, f"[{i}]")
        return
    _validate_record(value, spec.root_fields(), spec, "")


def _validate_record(value: Any, fields: Mapping[str, Any], spec: DataSpecification, path: str) -> None:
    if not isinstance(value, Mapping):
        raise SchemaViolation(f"{path or 'value'}: expected a record")
    extra = set(value) - set(fields)
    if extra:
        raise SchemaViolation(f"{path or 'value'}: unexpected fields {sorted(extra)}")
    for name, type_ref in fields.items():
        where = f"{path}.{name}" if path else name
        if name not in value:
            raise SchemaViolation(f"{where}: missing field")
        kind = spec.resolve(type_ref)
        item = value[name]
        if kind == "string":
            if not isinstance(item, str):
                raise SchemaViolation(f"{where}: expected string")
        elif kind == "number":
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise SchemaViolation(f"{where}: expected number")
        else:
            _validate_record(item, kind, spec, where)


@dataclass(frozen=True)
class Envelope:
    """Data travelling with its specification: ``<spec, payload>``."""

    spec: DataSpecification
    payload: Any

    def to_dict(self) -> dict[str, Any]:
        return {"spec": self.spec.to_dict(), "payload": self.payload}

    def to_bytes(self) -> bytes:
        return canonical.dumps(self.to_dict())

    @classmethod
    def from_bytes(cls, data: bytes) -> Envelope:
        try:
            decoded = canonical.loads(data)
            return cls(DataSpecification.from_dict(decoded["spec"]), decoded["payload"])
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            raise SchemaViolation(f"not a data envelope: {exc}") from None

    def records(self) -> list[Any]:
        return list(self.payload) if isinstance(self.payload, list) else [self.payload]


def make_envelope(raw: Any, spec: DataSpecification | Mapping[str, Any]) -> Envelope:
    if not isinstance(spec, DataSpecification):
        spec = DataSpecification(spec)
    return Envelope(spec, apply_adapter(raw, spec))
