"""Data endorsement and the on-chain / off-chain acquisition protocols.

Each protocol run is driven by the consumer's Controller. Sources proceed
through their numbered steps as independent tasks on the simulation
scheduler; the run joins them and hands verified envelopes to the Processor
in request order. A source that is rejected or fails verification is
excluded with a reason code; ``strict=True`` instead terminates the whole run
on the first exclusion.
"""

from __future__ import annotations

from collections.abc import Generator
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any

from .. import canonical
from ..crypto import (
    DecryptionFailure,
    SymmetricKey,
    encode_nonce,
    parse_key_id,
)
from ..identity import VerifiableCredential, issue_vc, verify_ownership
from ..ledger import LedgerRejection, TxKind
from ..storage import CorruptPartition, Envelope, SchemaViolation, StorageError, StorageInfo, validate
from ..storage.backends import StagingUnreachable
from ..netsim.router import RoutingError
from ..trace import EventKind, PayloadClass
from .arbitrator import Evidence, Mode, arbitrate
from .transform import TransformSpec, UnknownFieldInPsi, process_transform

if TYPE_CHECKING:
    from ..netsim.actors import AuthorityActor, ConsumerActor, SourceActor
    from ..netsim.world import World

# reason codes besides the Arbitrator's
AUTHORITY_REJECTED = "AUTHORITY_REJECTED"
LEDGER_REJECTION = "LEDGER_REJECTION"
STAGING_UNREACHABLE = "STAGING_UNREACHABLE"
PORT_CLOSED = "PORT_CLOSED"
MESSAGE_LOST = "MESSAGE_LOST"
SOURCE_DATA_UNAVAILABLE = "SOURCE_DATA_UNAVAILABLE"
DECRYPTION_FAILED = "DECRYPTION_FAILED"
SCHEMA_VIOLATION = "SCHEMA_VIOLATION"
NO_COLLECTION = "NO_COLLECTION"
NO_STORAGE_TX = "NO_STORAGE_TX"
TERMINATED = "TERMINATED"


class ProtocolError(Exception):
    def __init__(self, message: str, result: RunResult | None = None) -> None:
        super().__init__(message)
        self.result = result


class InvalidRequest(ProtocolError):
    pass


class AllSourcesRejected(ProtocolError):
    pass


class VerificationFailure(ProtocolError):
    pass


class EndorsementRejected(Exception):
    pass


class UnresolvableDid(Exception):
    pass


class Status(str, Enum):
    PENDING = "pending"
    AUTHORIZED = "authorized"
    REJECTED = "rejected"
    DELIVERED = "delivered"
    VERIFIED = "verified"
    FAILED = "failed"


@dataclass
class SourceState:
    status: Status = Status.PENDING
    reason: str | None = None
    reasons: tuple[str, ...] = ()
    step: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status.value, "reason": self.reason, "reasons": list(self.reasons), "step": self.step}


@dataclass(frozen=True)
class AggregationRequest:
    consumer: str
    sources: tuple[str, ...]
    transform: TransformSpec
    nonce: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sources", tuple(self.sources))


@dataclass(frozen=True)
class EndorsementRecord:
    source: str
    authority: str
    vc: VerifiableCredential


@dataclass
class ProtocolRun:
    run_id: str
    mode: Mode
    request: AggregationRequest
    strict: bool = False
    phase: int = 0
    sources: dict[str, SourceState] = field(default_factory=dict)
    tx_ids: list[str] = field(default_factory=list)
    terminated: bool = False
    port: str | None = None


@dataclass
class RunResult:
    run: ProtocolRun
    output: Envelope | None
    ledger_growth: int = 0

    @property
    def output_bytes(self) -> bytes | None:
        return self.output.to_bytes() if self.output is not None else None

    def report(self, world: World | None = None) -> dict[str, Any]:
        names = {}
        if world is not None:
            names = {did: world.by_did(did).name for did in self.run.sources}
        output = self.output_bytes
        return {
            "run_id": self.run.run_id,
            "mode": self.run.mode.value,
            "consumer": self.run.request.consumer,
            "strict": self.run.strict,
            "terminated": self.run.terminated,
            "sources": {
                did: {**state.to_dict(), **({"name": names[did]} if did in names else {})}
                for did, state in self.run.sources.items()
            },
            "ledger_tx_ids": list(self.run.tx_ids),
            "ledger_growth": self.ledger_growth,
            "output_sha256": (world.provider.hash(output).hex() if world and output is not None else None),
        }


def endorse_data(world: World, source: SourceActor, authority: AuthorityActor, data: bytes) -> EndorsementRecord:
    """The source asks ``authority`` to endorse ``data``; on approval it receives an ownership VC."""
    registry, provider, router = world.registry, world.provider, world.router
    source_doc, authority_doc = registry.resolve(source.did), registry.resolve(authority.did)
    if source_doc is None or authority_doc is None:
        raise UnresolvableDid(source.did if source_doc is None else authority.did)
    sealed = provider.encrypt(data, parse_key_id(authority_doc.auth)).to_bytes()
    if router.send(source.did, authority.did, "endorse", sealed, PayloadClass.CIPHERTEXT, label="endorse-request") is None:
        raise EndorsementRejected("endorsement request was lost")
    received = provider.decrypt(router.receive(authority.did, "endorse", sender=source.did).payload, authority.auth.secret_part)
    if not authority.approves_endorsement(source.did):
        router.send(authority.did, source.did, "endorse", b'{"approved":false}', PayloadClass.PLAINTEXT, label="endorse-reply")
        router.receive(source.did, "endorse", sender=authority.did)
        raise EndorsementRejected(f"{authority.did} declined to endorse data of {source.did}")
    vc = issue_vc(provider, registry, authority.did, authority.assertion, source.did, bytes(provider.hash(received)))
    authority.endorsed.add(source.did)
    router.send(authority.did, source.did, "endorse", vc.canonical(), PayloadClass.PLAINTEXT, label="endorse-reply")
    vc = VerifiableCredential.from_bytes(router.receive(source.did, "endorse", sender=authority.did).payload)
    record = EndorsementRecord(source.did, authority.did, vc)
    source.endorsement = record
    return record


class _Session:
    """One source's view of a run; ``onchain``/``offchain`` are its step generators."""

    def __init__(self, world: World, run: ProtocolRun, source: SourceActor, consumer: ConsumerActor) -> None:
        self.world = world
        self.run = run
        self.source = source
        self.consumer = consumer
        self.authority: AuthorityActor = world.by_did(source.authority)  # type: ignore[assignment]
        self.state = run.sources[source.did]
        self.provider = world.provider
        self.router = world.router
        self.authz = f"authz:{run.run_id}"

    # bookkeeping

    def _mark(self, status: Status, step: int, reasons: tuple[str, ...] = ()) -> None:
        self.state.status = status
        self.state.step = step
        if reasons:
            self.state.reasons = reasons
            self.state.reason = reasons[0]
        self.world.trace.record(
            EventKind.STATUS,
            actor=self.source.did,
            step=step,
            detail={"run": self.run.run_id, "status": status.value, "reasons": list(reasons)},
        )
        if status in (Status.REJECTED, Status.FAILED) and self.run.strict and not self.run.terminated:
            self.run.terminated = True

    def _fail(self, step: int, *reasons: str) -> None:
        self._mark(Status.FAILED, step, tuple(reasons))

    def _halted(self, step: int) -> bool:
        if self.run.terminated and self.state.status not in (Status.FAILED, Status.REJECTED):
            self._fail(step, TERMINATED)
        return self.run.terminated

    def _send(self, sender: str, recipient: str, channel: str, payload: bytes, cls: PayloadClass, step: int, label: str) -> bool:
        return self.router.send(sender, recipient, channel, payload, cls, step, label) is not None

    def _consumer_pk(self):
        return parse_key_id(self.world.registry.resolve(self.consumer.did).auth)

    # shared steps

    def _prepare_data(self, step: int) -> tuple[bytes, bytes] | None:
        """Load, re-encrypt under a fresh key and wrap that key for the consumer."""
        corrupt = self.source.script("corrupt-partition")
        if corrupt is not None and self.source.did not in self.world.corrupted:
            self.world.corrupt(self.source, int(corrupt.params.get("flip", -1)))
        try:
            data = self.world.load(self.source, step)
        except (CorruptPartition, DecryptionFailure, StorageError, LookupError):
            self._fail(step, SOURCE_DATA_UNAVAILABLE)
            return None
        forge = self.source.script("forge-claim")
        if forge is not None:
            data = _forged(data, forge.params)
        kappa = self.provider.gen_symmetric()
        data_ct = self.provider.encrypt(data, kappa).to_bytes()
        key_ct = self.provider.encrypt(kappa.key_bytes, self._consumer_pk()).to_bytes()
        return data_ct, key_ct

    def _stage(self, step: int, data_ct: bytes, key_ct: bytes) -> StorageInfo | None:
        staging = self.world.staging(self.source.did, step)
        try:
            return StorageInfo("staging", staging.upload(data_ct), staging.upload(key_ct))
        except StagingUnreachable:
            self._fail(step, STAGING_UNREACHABLE)
            return None

    def _seal_credential(self) -> bytes:
        """``E_e(E_e(V_s, sk_auth_s), pk_auth_c)`` as bytes."""
        vc = self.source.endorsement.vc
        tamper = self.source.script("tamper-vc")
        if tamper is not None:
            vc = _tampered(vc, tamper.params)
        signer = self.source.auth.secret_part
        if self.source.script("impersonate-did") is not None:
            signer = self.provider.gen_keypair(seed=f"impostor/{self.source.name}").secret_part
        signed = self.provider.sign_recover(vc.canonical(), signer).to_bytes()
        return self.provider.encrypt(signed, self._consumer_pk()).to_bytes()

    def _collect(self, step: int, sealed_storage: bytes, claim_check: VerifiableCredential) -> Envelope | None:
        """Consumer side: open ``m``, fetch both ciphertexts, decrypt, check the claim."""
        sk = self.consumer.auth.secret_part
        try:
            info = StorageInfo.from_bytes(self.provider.decrypt(sealed_storage, sk))
        except (DecryptionFailure, ValueError, KeyError):
            self._fail(step, DECRYPTION_FAILED)
            return None
        staging = self.world.staging(self.consumer.did, step)
        try:
            data_ct = staging.download(info.data_handle)
            key_ct = staging.download(info.key_handle)
        except StagingUnreachable:
            self._fail(step, STAGING_UNREACHABLE)
            return None
        try:
            kappa = SymmetricKey(self.provider.decrypt(key_ct, sk), "kappa:received")
            data = self.provider.decrypt(data_ct, kappa)
        except (DecryptionFailure, ValueError):
            self._fail(step + 1, DECRYPTION_FAILED)
            return None
        ownership = verify_ownership(self.provider, claim_check, self.source.did, data, self.world.registry)
        self.world.trace.record(
            EventKind.VERDICT,
            actor=self.consumer.did,
            peer=self.source.did,
            step=step + 1,
            detail={"check": "ownership-claim", "ok": ownership.ok, "reasons": list(ownership.reasons)},
        )
        if not ownership:
            self._fail(step + 1, *ownership.reasons)
            return None
        try:
            envelope = Envelope.from_bytes(data)
            validate(envelope.payload, envelope.spec)
        except SchemaViolation:
            self._fail(step + 1, SCHEMA_VIOLATION)
            return None
        return envelope

    def _arbitrate(self, step: int, evidence: Evidence):
        verdict = arbitrate(evidence, self.provider, self.world.registry, self.world.ledger)
        self.world.trace.record(
            EventKind.VERDICT,
            actor=self.consumer.did,
            peer=self.source.did,
            step=step,
            detail={"check": "arbitrator", "ok": verdict.ok, "reasons": list(verdict.reasons)},
        )
        return verdict

    # on-chain

    def onchain(self) -> Generator[int, None, Envelope | None]:
        s, c, o = self.source.did, self.consumer.did, self.authority.did
        yield 3
        if self._halted(3):
            return None
        if self.source.script("skip-authorization") is None:
            # step 3: the source finds a collection transaction naming it and asks its authority
            collection = self.world.ledger.query(
                kind=TxKind.COLLECTION, predicate=lambda x: s in x["srcIds"] and x.get("consumer") == c
            )
            if not collection:
                self._fail(3, NO_COLLECTION)
                return None
            request = canonical.dumps({"collection": collection[-1].tx_id, "source": s, "consumer": c})
            if not self._send(s, o, self.authz, request, PayloadClass.PLAINTEXT, 3, "authz-request"):
                self._fail(3, MESSAGE_LOST)
                return None
            yield 4
            received = canonical.loads(self.router.receive(o, self.authz, sender=s).payload)
            # step 4: the authority checks the collection transaction on the ledger
            on_ledger = self.world.ledger.query(
                kind=TxKind.COLLECTION,
                predicate=lambda x: x.tx_id == received["collection"] and received["source"] in x["srcIds"],
            )
            approve = bool(on_ledger) and self.authority.approves_access(received["source"], received["consumer"])
            yield 5
            if not approve:
                if self._send(o, s, self.authz, b'{"approved":false}', PayloadClass.PLAINTEXT, 5, "authz-reply"):
                    self.router.receive(s, self.authz, sender=o)
                self._mark(Status.REJECTED, 5, (AUTHORITY_REJECTED,))
                return None
            yield 6
            if self._halted(6):
                return None
            result = self.world.submit(self.authority, TxKind.ENDORSEMENT, {"s": s, "c": c}, step=6)
            if not result.finalized:
                self._fail(6, LEDGER_REJECTION)
                return None
            self.run.tx_ids.append(result.transaction_id)
            if not self._send(o, s, self.authz, b'{"approved":true}', PayloadClass.PLAINTEXT, 6, "authz-reply"):
                self._fail(6, MESSAGE_LOST)
                return None
            self.router.receive(s, self.authz, sender=o)
        self._mark(Status.AUTHORIZED, 6)
        yield 7
        if self._halted(7):
            return None
        prepared = self._prepare_data(7)
        if prepared is None:
            return None
        yield 8
        info = self._stage(8, *prepared)
        if info is None:
            return None
        yield 9
        sealed_vc = self._seal_credential()
        sealed_storage = self.provider.encrypt(info.to_bytes(), self._consumer_pk()).to_bytes()
        result = self.world.submit(
            self.source, TxKind.STORAGE, {"s": s, "c": c, "vc": sealed_vc, "storage": sealed_storage}, step=9
        )
        if not result.finalized:
            self._fail(9, LEDGER_REJECTION)
            return None
        self.run.tx_ids.append(result.transaction_id)
        self._mark(Status.DELIVERED, 9)
        yield 10
        if self._halted(10):
            return None
        # step 10: the consumer's Connector parses the storage transaction
        stored = self.world.ledger.query({"s": s, "c": c}, kind=TxKind.STORAGE)
        if not stored:
            self._fail(10, NO_STORAGE_TX)
            return None
        tx = stored[-1]
        try:
            signed_vc = self.provider.decrypt(tx["vc"], self.consumer.auth.secret_part)
        except DecryptionFailure:
            self._fail(10, DECRYPTION_FAILED)
            return None
        yield 11
        verdict = self._arbitrate(11, Evidence(Mode.ONCHAIN, s, c, signed_vc))
        yield 12
        if not verdict:
            self._fail(12, *verdict.reasons)
            return None
        yield 13
        if self._halted(13):
            return None
        envelope = self._collect(13, tx["storage"], verdict.vc)
        if envelope is not None:
            self._mark(Status.VERIFIED, 14)
        return envelope

    # off-chain

    def offchain(self) -> Generator[int, None, Envelope | None]:
        s, c, o = self.source.did, self.consumer.did, self.authority.did
        port = self.run.port
        yield 2
        try:
            notice = canonical.loads(self.router.receive(s, f"notify:{self.run.run_id}", sender=c).payload)
        except RoutingError:
            self._fail(2, MESSAGE_LOST)
            return None
        r = int(notice["nonce"])
        yield 3
        if self._halted(3):
            return None
        sk_s = self.source.auth.secret_part
        if self.source.script("skip-authorization") is not None:
            # no authority involved: the source countersigns its own request
            omega = self.provider.sign_recover(self.provider.sign_recover(encode_nonce(r), sk_s).to_bytes(), sk_s).to_bytes()
        else:
            replay = self.source.script("replay-omega")
            cached = self.source.omega_cache.get(c)
            if replay is not None and cached is not None and cached[0] != r:
                omega = cached[1]
            else:
                asked = r if replay is None else r + 1 + int(replay.params.get("offset", 0))
                request = self.provider.sign_recover(encode_nonce(asked), sk_s).to_bytes()
                meta = canonical.dumps({"source": s, "consumer": c})
                sent = self._send(s, o, self.authz, meta, PayloadClass.PLAINTEXT, 3, "authz-request")
                sent = sent and self._send(s, o, self.authz, request, PayloadClass.CIPHERTEXT, 3, "authz-nonce")
                if not sent:
                    self._fail(3, MESSAGE_LOST)
                    return None
                yield 4
                received_meta = canonical.loads(self.router.receive(o, self.authz, sender=s).payload)
                signed_nonce = self.router.receive(o, self.authz, sender=s).payload
                # step 4: the authority checks the request really comes from the source
                try:
                    self.provider.verify_recover(signed_nonce, self.world.registry.resolve(received_meta["source"]).auth)
                    authentic = True
                except DecryptionFailure:
                    authentic = False
                if not (authentic and self.authority.approves_access(received_meta["source"], received_meta["consumer"])):
                    if self._send(o, s, self.authz, b'{"approved":false}', PayloadClass.PLAINTEXT, 4, "authz-reply"):
                        self.router.receive(s, self.authz, sender=o)
                    self._mark(Status.REJECTED, 4, (AUTHORITY_REJECTED,))
                    return None
                yield 5
                # step 5: the authority countersigns the source's signed nonce
                omega_ct = self.provider.sign_recover(signed_nonce, self.authority.auth.secret_part).to_bytes()
                if not self._send(o, s, self.authz, omega_ct, PayloadClass.CIPHERTEXT, 5, "omega"):
                    self._fail(5, MESSAGE_LOST)
                    return None
                omega = self.router.receive(s, self.authz, sender=o).payload
            self.source.omega_cache[c] = (r, omega)
        self._mark(Status.AUTHORIZED, 5)
        yield 6
        if self._halted(6):
            return None
        prepared = self._prepare_data(6)
        if prepared is None:
            return None
        yield 7
        info = self._stage(7, *prepared)
        if info is None:
            return None
        yield 8
        sealed_vc = self._seal_credential()
        sealed_storage = self.provider.encrypt(info.to_bytes(), self._consumer_pk()).to_bytes()
        for label, payload in (("vc", sealed_vc), ("storage", sealed_storage), ("omega", omega)):
            self._send(s, c, port, payload, PayloadClass.CIPHERTEXT, 8, label)
        self._mark(Status.DELIVERED, 8)
        yield 9
        if self._halted(9):
            return None
        # step 9: the consumer's Connector reads the three items from its port
        try:
            got = {env.label: env.payload for env in (self.router.receive(c, port, sender=s) for _ in range(3))}
        except RoutingError:
            self._fail(9, PORT_CLOSED)
            return None
        if set(got) != {"vc", "storage", "omega"}:
            self._fail(9, PORT_CLOSED)
            return None
        try:
            signed_vc = self.provider.decrypt(got["vc"], self.consumer.auth.secret_part)
        except DecryptionFailure:
            self._fail(9, DECRYPTION_FAILED)
            return None
        yield 10
        verdict = self._arbitrate(10, Evidence(Mode.OFFCHAIN, s, c, signed_vc, omega=got["omega"], nonce=r))
        yield 11
        if not verdict:
            self._fail(11, *verdict.reasons)
            return None
        yield 12
        if self._halted(12):
            return None
        envelope = self._collect(12, got["storage"], verdict.vc)
        if envelope is not None:
            self._mark(Status.VERIFIED, 13)
        return envelope


def _tampered(vc: VerifiableCredential, params: dict) -> VerifiableCredential:
    from dataclasses import replace

    target = params.get("field", "id")
    if target == "claim":
        claim = bytes(vc.credential_subject.claim)
        subject = replace(vc.credential_subject, claim=bytes([claim[0] ^ 1]) + claim[1:])
        return replace(vc, credential_subject=subject)
    if target == "issuer":
        return replace(vc, issuer=params.get("value", vc.issuer + "x"))
    return replace(vc, id=vc.id + ":tampered")


def _forged(data: bytes, params: dict) -> bytes:
    try:
        envelope = Envelope.from_bytes(data)
    except SchemaViolation:
        return data + b" "
    records = envelope.records()
    if records and isinstance(records[0], dict):
        first = dict(records[0])
        for key, value in first.items():
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                first[key] = value + int(params.get("delta", 1000))
                break
            if isinstance(value, str):
                first[key] = value + "*"
                break
        records = [first, *records[1:]]
    return Envelope(envelope.spec, records).to_bytes()


def _validate_request(world: World, request: AggregationRequest) -> None:
    if len(request.sources) < 2:
        raise InvalidRequest("an aggregation request needs more than one source")
    if len(set(request.sources)) != len(request.sources):
        raise InvalidRequest("duplicate source in request")
    for did in (request.consumer, *request.sources):
        if world.registry.resolve(did) is None:
            raise InvalidRequest(f"{did} is not propagated")
    for did in request.sources:
        source = world.by_did(did)
        if getattr(source, "endorsement", None) is None or not source.authority:
            raise InvalidRequest(f"{did} has no authority endorsement")


def _finish(world: World, run: ProtocolRun, envelopes: dict[str, Envelope | None], ledger_before: int) -> RunResult:
    delivered = [(did, envelopes[did]) for did in run.request.sources if envelopes.get(did) is not None]
    result = RunResult(run, None, len(world.ledger) - ledger_before)
    world.trace.record(
        EventKind.STEP,
        actor=run.request.consumer,
        step=15 if run.mode is Mode.ONCHAIN else 14,
        detail={"run": run.run_id, "event": "join", "verified": [d for d, _ in delivered], "terminated": run.terminated},
    )
    if run.terminated:
        raise VerificationFailure(f"{run.run_id} terminated by a source exclusion", result)
    if not delivered:
        raise AllSourcesRejected(f"{run.run_id}: no source passed verification", result)
    try:
        result.output = process_transform(delivered, run.request.transform)
    except (SchemaViolation, UnknownFieldInPsi) as exc:
        raise ProtocolError(f"transformation failed: {exc}", result) from exc
    return result


def _start(world: World, request: AggregationRequest, mode: Mode, strict: bool) -> ProtocolRun:
    _validate_request(world, request)
    run_id = f"run-{len([e for e in world.trace.events if e.detail.get('event') == 'request']) + 1}"
    run = ProtocolRun(run_id, mode, request, strict, sources={did: SourceState() for did in request.sources})
    world.trace.record(
        EventKind.STEP,
        actor=request.consumer,
        step=1,
        detail={"run": run_id, "event": "request", "mode": mode.value, "sources": list(request.sources)},
    )
    return run


def run_onchain(world: World, request: AggregationRequest, strict: bool = False) -> RunResult:
    """Execute the on-chain acquisition protocol (collection, endorsement and storage transactions)."""
    ledger_before = len(world.ledger)
    run = _start(world, request, Mode.ONCHAIN, strict)
    consumer = world.by_did(request.consumer)
    result = world.submit(consumer, TxKind.COLLECTION, {"srcIds": sorted(request.sources), "consumer": consumer.did}, step=2)
    if not result.finalized:
        raise LedgerRejection(f"collection transaction accepted by {result.accepted_nodes} nodes", result)
    run.tx_ids.append(result.transaction_id)
    sessions = {did: _Session(world, run, world.by_did(did), consumer) for did in request.sources}
    envelopes = world.scheduler().run({did: session.onchain() for did, session in sessions.items()})
    return _finish(world, run, envelopes, ledger_before)


def run_offchain(world: World, request: AggregationRequest, strict: bool = False) -> RunResult:
    """Execute the off-chain acquisition protocol (nonce, port, doubly signed approval)."""
    ledger_before = len(world.ledger)
    if request.nonce is None:
        request = AggregationRequest(request.consumer, request.sources, request.transform, world.rng.randrange(2**63))
    run = _start(world, request, Mode.OFFCHAIN, strict)
    consumer = world.by_did(request.consumer)
    run.port = f"port:{run.run_id}:{consumer.name}"
    world.router.open_port(run.port, consumer.did)
    for did in request.sources:
        notice = canonical.dumps({"nonce": request.nonce, "port": run.port, "consumer": consumer.did})
        world.router.send(consumer.did, did, f"notify:{run.run_id}", notice, PayloadClass.PLAINTEXT, 2, "notify")
    sessions = {did: _Session(world, run, world.by_did(did), consumer) for did in request.sources}
    try:
        envelopes = world.scheduler().run({did: session.offchain() for did, session in sessions.items()})
    finally:
        world.router.close_port(run.port, consumer.did)
    return _finish(world, run, envelopes, ledger_before)


def run_protocol(world: World, request: AggregationRequest, mode: Mode | str, strict: bool = False) -> RunResult:
    mode = Mode(mode)
    return (run_onchain if mode is Mode.ONCHAIN else run_offchain)(world, request, strict)
