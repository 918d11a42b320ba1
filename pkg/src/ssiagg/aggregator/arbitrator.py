"""Arbitrator: authentication, ownership and authority-approval checks.

Verdicts are pure functions of the evidence and the finalized ledger, so
they can be evaluated concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..crypto import CryptoProvider, RecoveryFailure, encode_nonce, parse_key_id
from ..identity import Registry, VerifiableCredential, verify_ownership
from ..ledger import Ledger, TxKind

AUTH_FAIL = "AUTH_FAIL"
APPROVAL_FAIL = "APPROVAL_FAIL"
NONCE_MISMATCH = "NONCE_MISMATCH"


class Mode(str, Enum):
    ONCHAIN = "onchain"
    OFFCHAIN = "offchain"


@dataclass(frozen=True)
class Evidence:
    """What the consumer holds for one source when it reaches the Arbitrator.

    ``signed_vc`` is the source-signed credential after the consumer removed
    its own encryption layer. Off-chain runs add ``omega`` and ``nonce``.
    ``data`` is optional: when present the ownership claim is checked too.
    """

    mode: Mode
    source: str
    consumer: str
    signed_vc: bytes
    omega: bytes | None = None
    nonce: int | None = None
    data: bytes | None = None


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reasons: tuple[str, ...] = field(default=())
    vc: VerifiableCredential | None = None

    def __bool__(self) -> bool:
        return self.ok

    @property
    def reason(self) -> str | None:
        return self.reasons[0] if self.reasons else None


def authenticate(
    provider: CryptoProvider, registry: Registry, source: str, signed_vc: bytes
) -> VerifiableCredential | None:
    """Recover the credential with the source's auth key; ``None`` if it does not verify."""
    doc = registry.resolve(source)
    if doc is None:
        return None
    try:
        raw = provider.verify_recover(signed_vc, doc.auth)
        vc = VerifiableCredential.from_bytes(raw)
    except (RecoveryFailure, ValueError, KeyError, TypeError):
        return None
    if vc.credential_subject.id != source:
        return None
    return vc


def approved_onchain(
    provider: CryptoProvider, registry: Registry, ledger: Ledger, vc: VerifiableCredential, source: str, consumer: str
) -> bool:
    """An endorsement transaction for (source, consumer) submitted by the credential's issuer."""
    issuer_doc = registry.resolve(vc.issuer)
    if issuer_doc is None:
        return False
    issuer_wallet = provider.wallet_address(parse_key_id(issuer_doc.auth))
    endorsements = ledger.query({"s": source, "c": consumer}, kind=TxKind.ENDORSEMENT)
    return any(tx.submitter == issuer_wallet for tx in endorsements)


def approved_offchain(
    provider: CryptoProvider,
    registry: Registry,
    vc: VerifiableCredential,
    source: str,
    omega: bytes | None,
    nonce: int | None,
) -> str | None:
    """Reason code if the doubly signed nonce does not check out, else ``None``."""
    issuer_doc = registry.resolve(vc.issuer)
    source_doc = registry.resolve(source)
    if omega is None or nonce is None or issuer_doc is None or source_doc is None:
        return APPROVAL_FAIL
    try:
        inner = provider.verify_recover(omega, issuer_doc.auth)
        recovered = provider.verify_recover(inner, source_doc.auth)
    except RecoveryFailure:
        return APPROVAL_FAIL
    if recovered != encode_nonce(nonce):
        return NONCE_MISMATCH
    return None


def arbitrate(
    evidence: Evidence,
    provider: CryptoProvider,
    registry: Registry,
    ledger: Ledger | None = None,
) -> Verdict:
    """Run authentication, ownership and approval checks; reasons are in check order."""
    vc = authenticate(provider, registry, evidence.source, evidence.signed_vc)
    if vc is None:
        return Verdict(False, (AUTH_FAIL,))
    reasons = list(verify_ownership(provider, vc, evidence.source, evidence.data, registry).reasons)
    if evidence.mode is Mode.ONCHAIN:
        if ledger is None:
            raise ValueError("on-chain arbitration needs the ledger")
        if not approved_onchain(provider, registry, ledger, vc, evidence.source, evidence.consumer):
            reasons.append(APPROVAL_FAIL)
    else:
        failure = approved_offchain(provider, registry, vc, evidence.source, evidence.omega, evidence.nonce)
        if failure is not None:
            reasons.append(failure)
    return Verdict(not reasons, tuple(reasons), vc)
