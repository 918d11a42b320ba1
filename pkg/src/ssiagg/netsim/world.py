"""Shared simulation state: ledger, registry, router, trace, storage and actors."""

from __future__ import annotations

import random
from collections.abc import Mapping
from typing import Any

from .. import canonical
from ..crypto import CryptoProvider, SymmetricKey
from ..identity import Registry
from ..ledger import FinalizationResult, Ledger, Transaction, TxKind
from ..storage import (
    DecentralizedStore,
    LocationEntry,
    LocationTable,
    RoundRobinPolicy,
    SelfHostedStore,
    StagingSpace,
    StorageNode,
)
from ..trace import EventKind, PayloadClass, ProtocolTrace
from .actors import EntityActor, SourceActor
from .adversary import AdversaryScript
from .router import DropRule, RoutedNode, Router
from .scheduler import Scheduler


class World:
    def __init__(
        self,
        provider: CryptoProvider,
        ledger: Ledger,
        seed: int = 0,
        threaded: bool = False,
        policy: RoundRobinPolicy | None = None,
    ) -> None:
        self.provider = provider
        self.ledger = ledger
        self.registry = Registry(ledger, provider)
        self.trace = ProtocolTrace()
        self.router = Router(self.trace)
        self.seed = seed
        self.rng = random.Random(seed)
        self.threaded = threaded
        self.policy = policy or RoundRobinPolicy()
        self.actors: dict[str, EntityActor] = {}
        self._by_did: dict[str, EntityActor] = {}
        self.staging_node = StorageNode("staging")
        self.location_table = LocationTable()
        self.location_nodes: dict[str, StorageNode] = {}
        self.host_nodes: dict[str, StorageNode] = {}
        self.phase = ""
        self.corrupted: set[str] = set()

    # actors

    def add(self, actor: EntityActor) -> EntityActor:
        if actor.name in self.actors:
            raise ValueError(f"duplicate actor name {actor.name!r}")
        self.actors[actor.name] = actor
        self._by_did[actor.did] = actor
        return actor

    def actor(self, name: str) -> EntityActor:
        return self.actors[name]

    def by_did(self, did: str) -> EntityActor:
        return self._by_did[did]

    def secret_material(self) -> list[bytes]:
        return [m for a in self.actors.values() for m in a.secret_material()]

    def attach(self, script: AdversaryScript) -> None:
        actor = self.actor(script.actor)
        actor.scripts.append(script)
        if script.action == "drop-message":
            self.router.drop_rules.append(DropRule(sender=actor.did, step=script.trigger))
        self.trace.record(EventKind.FAULT, actor=actor.did, step=script.trigger, detail=script.to_dict())

    # storage

    def add_location(self, location_id: str, reputation: float = 1.0, cost: float = 1.0) -> StorageNode:
        node = StorageNode(location_id)
        self.location_nodes[location_id] = node
        self.location_table.add(LocationEntry(location_id, True, reputation, cost))
        return node

    def add_host(self, host_id: str) -> StorageNode:
        node = StorageNode(host_id)
        self.host_nodes[host_id] = node
        return node

    def staging(self, client: str, step: int | None) -> StagingSpace:
        return StagingSpace(RoutedNode(self.router, client, self.staging_node, step))

    def routed_locations(self, client: str, step: int | None) -> dict[str, RoutedNode]:
        return {lid: RoutedNode(self.router, client, node, step) for lid, node in self.location_nodes.items()}

    # ledger

    def set_phase(self, phase: str) -> None:
        self.phase = phase
        self.trace.record(EventKind.PHASE, detail={"phase": phase})

    def log_ledger(self, actor: EntityActor, result: FinalizationResult, tx: Transaction, step: int | None) -> None:
        stored = result.transaction or tx
        self.trace.record(
            EventKind.LEDGER,
            actor=actor.did,
            step=step,
            payload_class=PayloadClass.PLAINTEXT,
            payload=canonical.dumps(dict(stored.properties)),
            detail={
                "tx_kind": stored.kind.value,
                "tx_id": result.transaction_id,
                "finalized": result.finalized,
                "accepted": result.accepted_nodes,
            },
        )

    def submit(self, actor: EntityActor, kind: TxKind, props: Mapping[str, Any], step: int | None = None) -> FinalizationResult:
        return self._submit_tx(actor, Transaction(kind, props, submitter=actor.wallet(self.provider)), step)

    def _submit_tx(self, actor: EntityActor, tx: Transaction, step: int | None) -> FinalizationResult:
        result = self.ledger.submit(tx)
        self.log_ledger(actor, result, tx, step)
        return result

    def propagate(self, actor: EntityActor) -> FinalizationResult:
        result = self.registry.propagate(actor.document(), submitter=actor.wallet(self.provider))
        self.log_ledger(actor, result, result.transaction, None)
        return result

    def scheduler(self) -> Scheduler:
        return Scheduler(self.rng.randrange(2**32), threaded=self.threaded)

    # persistence

    def persist(self, source: SourceActor, data: bytes, encrypt_at_rest: bool = True) -> None:
        """Store ``data`` for ``source`` in its configured backend.

        With ``encrypt_at_rest`` a fresh symmetric key encrypts the data (per
        partition for decentralized storage) and is kept wrapped under the
        source's own public key.
        """
        key = self.provider.gen_symmetric() if encrypt_at_rest else None
        if key is not None:
            source.wrapped_key = self.provider.encrypt(key.key_bytes, source.auth.public_part).to_bytes()
        if source.backend == "decentralized":
            source.stored_ref = self._decentralized(source, key, step=None).store(data)
        elif source.backend == "self-hosted":
            node = RoutedNode(self.router, source.did, self.host_nodes[source.host], None)
            blob = self.provider.encrypt(data, key).to_bytes() if key is not None else data
            if key is None:
                node.payload_class = PayloadClass.PLAINTEXT
            source.stored_ref = SelfHostedStore(node, owner=source.name).store(blob)
        else:
            raise ValueError(f"unknown storage backend {source.backend!r}")

    def load(self, source: SourceActor, step: int | None) -> bytes:
        key = self._rest_key(source)
        if source.backend == "decentralized":
            return self._decentralized(source, key, step).load(source.stored_ref)
        node = RoutedNode(self.router, source.did, self.host_nodes[source.host], step)
        if key is None:
            node.payload_class = PayloadClass.PLAINTEXT
        blob = SelfHostedStore(node, owner=source.name).load(source.stored_ref)
        return self.provider.decrypt(blob, key) if key is not None else blob

    def _rest_key(self, source: SourceActor) -> SymmetricKey | None:
        if source.wrapped_key is None:
            return None
        raw = self.provider.decrypt(source.wrapped_key, source.auth.secret_part)
        return SymmetricKey(raw, "kappa:at-rest")

    def _decentralized(self, source: SourceActor, key: SymmetricKey | None, step: int | None) -> DecentralizedStore:
        nodes = self.routed_locations(source.did, step)
        if key is None:
            for node in nodes.values():
                node.payload_class = PayloadClass.PLAINTEXT
        return DecentralizedStore(
            ledger=self.ledger,
            table=self.location_table,
            nodes=nodes,
            provider=self.provider,
            gamma=source.gamma,
            policy=self.policy,
            key=key,
            owner=source.name,
            submitter=source.wallet(self.provider),
            submit=lambda tx: self._submit_tx(source, tx, step),
        )

    def corrupt(self, source: SourceActor, flip_index: int = -1) -> None:
        """Flip a bit in the first stored object belonging to ``source``."""
        self.corrupted.add(source.did)
        if source.backend == "decentralized":
            from ..storage import parse_locations
            from ..storage.mapping import split_handle

            locations = parse_locations(source.stored_ref, self._rest_key(source), self.provider)
            location_id, key = split_handle(locations[0])
            self.location_nodes[location_id].corrupt(key, flip_index)
        else:
            self.host_nodes[source.host].corrupt(source.stored_ref, flip_index)

