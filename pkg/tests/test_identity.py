from __future__ import annotations

import base64
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ed25519_recover, fold_registry, json_canonical
from ssiagg import canonical
from ssiagg.crypto import DeterministicProvider
from ssiagg.identity import (
    OWN_CLAIM_MISMATCH,
    OWN_PROOF_INVALID,
    OWN_SUBJECT_MISMATCH,
    DIDDocument,
    DuplicateDid,
    Proof,
    Registry,
    UnknownDid,
    UnknownProperty,
    UnresolvableIssuer,
    VerifiableCredential,
    issue_vc,
    remove_property,
    verify_ownership,
)
from ssiagg.ledger import Ledger, LedgerConfig, LedgerRejection
from ssiagg.netsim import AuthorityActor, SourceActor


class TestDocuments:
    def test_auth_and_assert_differ(self):
        with pytest.raises(ValueError):
            DIDDocument("did:agg:x", "key:aa", "key:aa")

    def test_requires_did(self):
        with pytest.raises(ValueError):
            DIDDocument("agg:x", "key:aa", "key:bb")

    def test_dict_uses_assert_key(self):
        doc = DIDDocument("did:agg:x", "key:aa", "key:bb")
        assert doc.to_dict() == {"id": "did:agg:x", "auth": "key:aa", "assert": "key:bb"}
        assert DIDDocument.from_dict(doc.to_dict()) == doc


class TestRegistry:
    def test_propagate_and_resolve(self, registry, make_actor):
        actor = make_actor("alice")
        assert registry.resolve(actor.did) == actor.document()
        assert registry.resolve("did:agg:nobody") is None

    def test_duplicate(self, registry, make_actor):
        actor = make_actor("alice")
        with pytest.raises(DuplicateDid):
            registry.propagate(actor.document())

    def test_update_keeps_unchanged_key(self, registry, make_actor, provider):
        actor = make_actor("alice")
        new_auth = provider.gen_keypair(seed="alice/auth2").identifier
        registry.update(actor.did, new_auth=new_auth)
        doc = registry.resolve(actor.did)
        assert (doc.auth, doc.assert_) == (new_auth, actor.assertion.identifier)
        assert registry.auth_key(actor.did).identifier == new_auth

    def test_delete_then_repropagate(self, registry, make_actor):
        actor = make_actor("alice")
        registry.delete(actor.did)
        assert registry.resolve(actor.did) is None
        with pytest.raises(UnknownDid):
            registry.delete(actor.did)
        with pytest.raises(UnknownDid):
            registry.update(actor.did, new_auth="key:00")
        registry.propagate(actor.document())
        assert registry.resolve(actor.did) == actor.document()

    def test_rejection_when_not_finalized(self, provider):
        registry = Registry(Ledger(LedgerConfig.byzantine(4, Fraction(1, 2), 2)), provider)
        actor = SourceActor.create(provider, "x")
        with pytest.raises(LedgerRejection) as info:
            registry.propagate(actor.document())
        assert info.value.result.accepted_nodes == 2
        assert registry.resolve(actor.did) is None


class TestCredentials:
    @pytest.fixture
    def issued(self, provider, registry, make_actor):
        authority = make_actor("authority", AuthorityActor)
        source = make_actor("source", SourceActor)
        data = b'{"payload":[1,2,3]}'
        vc = issue_vc(provider, registry, authority.did, authority.assertion, source.did, bytes(provider.hash(data)))
        return vc, source, authority, data

    def test_proof_is_signature_over_credential_without_proof(self, issued):
        vc, _, authority, _ = issued
        unsigned = {k: v for k, v in vc.to_dict().items() if k != "proof"}
        assert vc.proof.key == authority.assertion.identifier
        assert ed25519_recover(vc.proof.value, authority.assertion.pk.sign_key) == json_canonical(
            {**unsigned, "credentialSubject": {"id": unsigned["credentialSubject"]["id"], "claim": {"$b": _b64(unsigned["credentialSubject"]["claim"])}}}
        )

    def test_honest_ownership(self, provider, registry, issued):
        vc, source, _, data = issued
        assert verify_ownership(provider, vc, source.did, data, registry)
        assert verify_ownership(provider, vc, source.did, data)

    def test_subject_mismatch(self, provider, issued):
        vc, _, authority, data = issued
        assert verify_ownership(provider, vc, authority.did, data).reasons == (OWN_SUBJECT_MISMATCH,)

    def test_claim_mismatch_and_skip(self, provider, issued):
        vc, source, _, data = issued
        assert verify_ownership(provider, vc, source.did, data + b" ").reasons == (OWN_CLAIM_MISMATCH,)
        assert verify_ownership(provider, vc, source.did, None)

    def test_tampered_field_breaks_proof(self, provider, issued):
        vc, source, _, data = issued
        tampered = replace(vc, id=vc.id + "x")
        assert verify_ownership(provider, tampered, source.did, data).reasons == (OWN_PROOF_INVALID,)

    def test_self_signed_credential_rejected_with_registry(self, provider, registry, issued):
        # the source signs its own credential but names the authority as issuer
        vc, source, _, data = issued
        forged_value = provider.sign_recover(remove_property_bytes(vc), source.assertion.sk).to_bytes()
        forged = replace(vc, proof=Proof(source.assertion.identifier, forged_value))
        assert verify_ownership(provider, forged, source.did, data)  # internally consistent
        assert verify_ownership(provider, forged, source.did, data, registry).reasons == (OWN_PROOF_INVALID,)

    def test_missing_proof(self, provider, issued):
        vc, source, _, data = issued
        assert not verify_ownership(provider, replace(vc, proof=None), source.did, data)

    def test_roundtrip(self, issued):
        vc = issued[0]
        assert VerifiableCredential.from_bytes(vc.canonical()) == vc
        with pytest.raises(ValueError):
            VerifiableCredential.from_dict({**vc.to_dict(), "extra": 1})

    def test_remove_property(self, issued):
        vc = issued[0]
        assert "proof" not in remove_property(vc, "proof")
        with pytest.raises(UnknownProperty):
            remove_property(vc, "evidence")

    def test_issuer_must_resolve_and_own_key(self, provider, registry, issued):
        _, source, authority, _ = issued
        with pytest.raises(UnresolvableIssuer):
            issue_vc(provider, registry, "did:agg:ghost", authority.assertion, source.did, b"x")
        with pytest.raises(UnresolvableIssuer):
            issue_vc(provider, registry, authority.did, authority.auth, source.did, b"x")


def remove_property_bytes(vc: VerifiableCredential) -> bytes:
    return canonical.dumps(remove_property(vc, "proof"))


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode()


OPS = st.lists(st.tuples(st.sampled_from(["propagate", "update-auth", "update-assert", "delete"]), st.integers(0, 7), st.integers(0, 3)), max_size=30)


@settings(max_examples=60, deadline=None)
@given(OPS)
def test_resolve_matches_fold_on_every_prefix(ops):
    provider = DeterministicProvider(0)
    ledger = Ledger(LedgerConfig(4, Fraction(2, 3)))
    registry = Registry(ledger, provider)
    actors = [SourceActor.create(provider, f"e{i}") for i in range(8)]
    for op, who, variant in ops:
        actor = actors[who]
        try:
            if op == "propagate":
                registry.propagate(actor.document())
            elif op == "update-auth":
                registry.update(actor.did, new_auth=provider.gen_keypair(seed=f"{who}/a{variant}").identifier)
            elif op == "update-assert":
                registry.update(actor.did, new_assert=provider.gen_keypair(seed=f"{who}/s{variant}").identifier)
            else:
                registry.delete(actor.did)
        except (DuplicateDid, UnknownDid, ValueError):
            pass
        expected = fold_registry(ledger.snapshot())
        for a in actors:
            doc = registry.resolve(a.did)
            assert (None if doc is None else (doc.auth, doc.assert_)) == expected.get(a.did)
