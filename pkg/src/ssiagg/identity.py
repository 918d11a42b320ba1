"""DIDs, the ledger-backed registry, verifiable credentials and ownership checks.

The registry keeps no state of its own: every resolution is a fold over the
finalized propagation/update/deletion transactions for one DID, taking the
one with the greatest timestamp.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

from . import canonical
from .crypto import (
    AsymmetricKeyPair,
    CryptoProvider,
    RecoveryFailure,
    parse_key_id,
)
from .ledger import FinalizationResult, Ledger, LedgerRejection, Transaction, TxKind

DID_METHOD = "agg"
VC_PROPERTIES = ("id", "issuer", "credentialSubject", "proof")

OWN_SUBJECT_MISMATCH = "OWN_SUBJECT_MISMATCH"
OWN_CLAIM_MISMATCH = "OWN_CLAIM_MISMATCH"
OWN_PROOF_INVALID = "OWN_PROOF_INVALID"


class IdentityError(Exception):
    pass


class DuplicateDid(IdentityError):
    pass


class UnknownDid(IdentityError):
    pass


class UnknownProperty(IdentityError):
    pass


class UnresolvableIssuer(IdentityError):
    pass


def make_did(provider: CryptoProvider, auth: AsymmetricKeyPair) -> str:
    return f"did:{DID_METHOD}:{provider.wallet_address(auth.public_part)}"


@dataclass(frozen=True)
class DIDDocument:
    id: str
    auth: str
    assert_: str

    def __post_init__(self) -> None:
        if not self.id.startswith("did:"):
            raise ValueError(f"not a DID: {self.id!r}")
        if self.auth == self.assert_:
            raise ValueError("auth and assert must name different key pairs")

    def to_dict(self) -> dict[str, str]:
        return {"id": self.id, "auth": self.auth, "assert": self.assert_}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> DIDDocument:
        return cls(data["id"], data["auth"], data["assert"])

    def canonical(self) -> bytes:
        return canonical.dumps(self.to_dict())


@dataclass(frozen=True)
class CredentialSubject:
    id: str
    claim: Any

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "claim": self.claim}


@dataclass(frozen=True)
class Proof:
    key: str
    value: bytes

    def to_dict(self) -> dict[str, Any]:
        return {"key": self.key, "value": self.value}


@dataclass(frozen=True)
class VerifiableCredential:
    id: str
    issuer: str
    credential_subject: CredentialSubject
    proof: Proof | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "issuer": self.issuer,
            "credentialSubject": self.credential_subject.to_dict(),
        }
        if self.proof is not None:
            out["proof"] = self.proof.to_dict()
        return out

    def canonical(self) -> bytes:
        return canonical.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> VerifiableCredential:
        extra = set(data) - set(VC_PROPERTIES)
        if extra:
            raise ValueError(f"unexpected credential properties {sorted(extra)}")
        subject = data["credentialSubject"]
        proof = data.get("proof")
        return cls(
            id=data["id"],
            issuer=data["issuer"],
            credential_subject=CredentialSubject(subject["id"], subject["claim"]),
            proof=Proof(proof["key"], bytes(proof["value"])) if proof is not None else None,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> VerifiableCredential:
        return cls.from_dict(canonical.loads(data))


def remove_property(vc: VerifiableCredential | Mapping[str, Any], name: str) -> dict[str, Any]:
    """The credential without property ``name``; the proof payload is ``canonical(vc ⊖ proof)``."""
    data = vc.to_dict() if isinstance(vc, VerifiableCredential) else dict(vc)
    if name not in data:
        raise UnknownProperty(name)
    del data[name]
    return data


def signing_payload(vc: VerifiableCredential) -> bytes:
    return canonical.dumps(remove_property(vc, "proof")) if vc.proof is not None else vc.canonical()


class Registry:
    """DID propagate/update/delete/resolve on top of a :class:`Ledger`."""

    def __init__(self, ledger: Ledger, provider: CryptoProvider) -> None:
        self.ledger = ledger
        self.provider = provider

    def _submit(self, kind: TxKind, props: dict[str, Any], submitter: str) -> FinalizationResult:
        result = self.ledger.submit(Transaction(kind, props, submitter=submitter))
        if not result.finalized:
            raise LedgerRejection(
                f"{kind.value} for {props.get('did')} accepted by {result.accepted_nodes} nodes",
                result,
            )
        return result

    def _latest(self, did: str) -> Transaction | None:
        history = self.ledger.query(
            {"did": did}, kind=(TxKind.PROPAGATION, TxKind.UPDATE, TxKind.DELETION)
        )
        return max(history, key=lambda tx: tx.timestamp) if history else None

    def resolve(self, did: str) -> DIDDocument | None:
        """The DID document, or ``None`` when unknown or deleted."""
        latest = self._latest(did)
        if latest is None or latest.get("deleted") is True:
            return None
        return DIDDocument(did, latest["auth"], latest["assert"])

    def propagate(self, doc: DIDDocument, submitter: str = "") -> FinalizationResult:
        if self.resolve(doc.id) is not None:
            raise DuplicateDid(doc.id)
        props = {"did": doc.id, "auth": doc.auth, "assert": doc.assert_, "deleted": False}
        return self._submit(TxKind.PROPAGATION, props, submitter)

    def update(
        self,
        did: str,
        new_auth: str | None = None,
        new_assert: str | None = None,
        submitter: str = "",
    ) -> FinalizationResult:
        """Replace the auth and/or assert key; ``None`` keeps the current one."""
        current = self.resolve(did)
        if current is None:
            raise UnknownDid(did)
        doc = DIDDocument(did, new_auth or current.auth, new_assert or current.assert_)
        props = {"did": did, "auth": doc.auth, "assert": doc.assert_, "deleted": False}
        return self._submit(TxKind.UPDATE, props, submitter)

    def delete(self, did: str, submitter: str = "") -> FinalizationResult:
        if self.resolve(did) is None:
            raise UnknownDid(did)
        return self._submit(TxKind.DELETION, {"did": did, "deleted": True}, submitter)

    def auth_key(self, did: str):
        doc = self.resolve(did)
        if doc is None:
            raise UnknownDid(did)
        return parse_key_id(doc.auth)


def issue_vc(
    provider: CryptoProvider,
    registry: Registry,
    issuer_did: str,
    issuer_assert: AsymmetricKeyPair,
    subject: str,
    claim: Any,
    vc_id: str | None = None,
) -> VerifiableCredential:
    """Issue a credential signed with the issuer's assertion key."""
    issuer_doc = registry.resolve(issuer_did)
    if issuer_doc is None:
        raise UnresolvableIssuer(issuer_did)
    if issuer_doc.assert_ != issuer_assert.identifier:
        raise UnresolvableIssuer(f"{issuer_did} does not list the given key for assertions")
    if vc_id is None:
        vc_id = "urn:vc:" + provider.random_bytes(16).hex()
    unsigned = VerifiableCredential(vc_id, issuer_did, CredentialSubject(subject, claim))
    value = provider.sign_recover(unsigned.canonical(), issuer_assert.secret_part).to_bytes()
    return VerifiableCredential(
        vc_id, issuer_did, unsigned.credential_subject, Proof(issuer_assert.identifier, value)
    )


@dataclass(frozen=True)
class OwnershipResult:
    ok: bool
    reasons: tuple[str, ...] = field(default=())

    def __bool__(self) -> bool:
        return self.ok

    @property
    def reason(self) -> str | None:
        return self.reasons[0] if self.reasons else None


def verify_ownership(
    provider: CryptoProvider,
    vc: VerifiableCredential,
    source_did: str,
    data: bytes | None,
    registry: Registry | None = None,
) -> OwnershipResult:
    """Check that ``vc`` proves ``source_did`` owns ``data``.

    Clauses: the subject is the source, the claim is ``hash(data)``, and the
    proof recovers the credential minus its proof. With a ``registry`` the
    proof key must also be the issuer's current assertion key. Passing
    ``data=None`` skips the claim clause (used before the data is fetched).
    """
    reasons = []
    if vc.credential_subject.id != source_did:
        reasons.append(OWN_SUBJECT_MISMATCH)
    if data is not None and vc.credential_subject.claim != bytes(provider.hash(data)):
        reasons.append(OWN_CLAIM_MISMATCH)
    if not _proof_holds(provider, vc, registry):
        reasons.append(OWN_PROOF_INVALID)
    return OwnershipResult(not reasons, tuple(reasons))


def _proof_holds(provider: CryptoProvider, vc: VerifiableCredential, registry: Registry | None) -> bool:
    if vc.proof is None or not isinstance(vc.proof.value, (bytes, bytearray)):
        return False
    try:
        recovered = provider.verify_recover(vc.proof.value, vc.proof.key)
    except RecoveryFailure:
        return False
    if recovered != signing_payload(vc):
        return False
    if registry is not None:
        issuer_doc = registry.resolve(vc.issuer)
        if issuer_doc is None or issuer_doc.assert_ != vc.proof.key:
            return False
    return True
