from __future__ import annotations

import pytest

from ssiagg.aggregator import FieldMapping, TransformSpec, UnknownFieldInPsi, process_transform
from ssiagg.storage import DataSpecification, SchemaViolation, make_envelope

PERSON = {"firstName": "string", "lastName": "string", "age": "number"}
RENAMED = {"given": "string", "lastName": "string", "age": "number"}


@pytest.fixture
def two_sources():
    a = make_envelope([{"firstName": "Ada", "lastName": "Lovelace", "age": 36}], PERSON)
    b = make_envelope([{"firstName": "Alan", "lastName": "Turing", "age": 41}, {"firstName": "Kurt", "lastName": "Goedel", "age": 71}], PERSON)
    return a, b


def test_identity_over_one_source(two_sources):
    a, _ = two_sources
    assert process_transform([a], TransformSpec()) == a


def test_rename_over_two_sources(two_sources):
    psi = TransformSpec(FieldMapping(rename={"firstName": "given"}), output_spec=DataSpecification(RENAMED))
    out = process_transform(list(two_sources), psi)
    assert out.payload == [
        {"given": "Ada", "lastName": "Lovelace", "age": 36},
        {"given": "Alan", "lastName": "Turing", "age": 41},
        {"given": "Kurt", "lastName": "Goedel", "age": 71},
    ]


def test_order_follows_input(two_sources):
    a, b = two_sources
    names = [r["firstName"] for r in process_transform([b, a], TransformSpec()).payload]
    assert names == ["Alan", "Kurt", "Ada"]


def test_missing_field(two_sources):
    psi = TransformSpec(FieldMapping(rename={"middleName": "m"}), output_spec=DataSpecification(PERSON))
    with pytest.raises(UnknownFieldInPsi):
        process_transform(list(two_sources), psi)
    with pytest.raises(UnknownFieldInPsi):
        FieldMapping(select=("nope",)).apply({"a": 1})


def test_select_and_nest(two_sources):
    psi = TransformSpec(
        FieldMapping(select=("firstName", "lastName"), nest={"name": ("firstName", "lastName")}),
        output_spec=DataSpecification({"Name": {"firstName": "string", "lastName": "string"}, "Row": {"name": "Name"}}),
    )
    assert process_transform([two_sources[0]], psi).payload == [{"name": {"firstName": "Ada", "lastName": "Lovelace"}}]


def test_rename_out_of_nested_group():
    env = make_envelope([{"name": {"first": "A", "last": "B"}, "age": 1}], {"N": {"first": "string", "last": "string"}, "P": {"name": "N", "age": "number"}})
    psi = TransformSpec(FieldMapping(rename={"name.first": "given", "name.last": "family"}), output_spec=DataSpecification({"given": "string", "family": "string", "age": "number"}))
    assert process_transform([env], psi).payload == [{"given": "A", "family": "B", "age": 1}]


def test_per_source_mapping(two_sources):
    a, b = two_sources
    psi = TransformSpec(
        FieldMapping(rename={"firstName": "given"}),
        per_source={"b": FieldMapping(rename={"firstName": "given", "age": "years"}, select=("firstName", "lastName", "age"))},
        output_spec=DataSpecification(RENAMED),
    )
    with pytest.raises(SchemaViolation):
        process_transform([("a", a), ("b", b)], psi)


def test_output_spec_required_for_reshaping(two_sources):
    with pytest.raises(SchemaViolation):
        process_transform(list(two_sources), TransformSpec(FieldMapping(rename={"firstName": "given"})))


def test_output_must_validate(two_sources):
    with pytest.raises(SchemaViolation):
        process_transform(list(two_sources), TransformSpec(output_spec=DataSpecification(RENAMED)))


def test_config_roundtrip():
    data = {
        "select": ["a", "b"],
        "rename": {"a": "x"},
        "sources": {"alice": {"nest": {"g": ["b"]}}},
        "output_spec": {"schema": {"x": "string"}},
    }
    spec = TransformSpec.from_dict(data, {"alice": "did:agg:alice"})
    assert "did:agg:alice" in spec.per_source
    assert TransformSpec.from_dict(spec.to_dict()) == spec
