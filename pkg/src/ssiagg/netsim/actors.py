"""Role entities taking part in a simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..crypto import AsymmetricKeyPair, CryptoProvider, WalletAddress
from ..identity import DIDDocument, make_did
from .adversary import AdversaryScript


class Role(str, Enum):
    AUTHORITY = "authority"
    CONSUMER = "consumer"
    SOURCE = "source"
    STORAGE = "storage-location"


@dataclass(eq=False)
class EntityActor:
    name: str
    auth: AsymmetricKeyPair
    assertion: AsymmetricKeyPair
    did: str = ""
    scripts: list[AdversaryScript] = field(default_factory=list)
    role: Role = Role.CONSUMER

    @classmethod
    def create(cls, provider: CryptoProvider, name: str, key_seed: str | int | None = None, **kwargs: Any):
        seed = name if key_seed is None else key_seed
        auth = provider.gen_keypair(seed=f"{seed}/auth")
        assertion = provider.gen_keypair(seed=f"{seed}/assert")
        return cls(name=name, auth=auth, assertion=assertion, did=make_did(provider, auth), **kwargs)

    def document(self) -> DIDDocument:
        return DIDDocument(self.did, self.auth.identifier, self.assertion.identifier)

    def wallet(self, provider: CryptoProvider) -> WalletAddress:
        return provider.wallet_address(self.auth.public_part)

    def script(self, action: str, step: int | None = None) -> AdversaryScript | None:
        for script in self.scripts:
            if script.action == action and (step is None or script.trigger == step):
                return script
        return None

    @property
    def honest(self) -> bool:
        return not self.scripts

    def secret_material(self) -> list[bytes]:
        return [*self.auth.secret_part.secret_material(), *self.assertion.secret_part.secret_material()]


@dataclass(eq=False)
class AuthorityActor(EntityActor):
    role: Role = Role.AUTHORITY
    endorsed: set[str] = field(default_factory=set)
    reject_sources: set[str] = field(default_factory=set)
    reject_consumers: set[str] = field(default_factory=set)
    deny_access: set[str] = field(default_factory=set)

    def approves_endorsement(self, source_did: str) -> bool:
        return source_did not in self.reject_sources

    def approves_access(self, source_did: str, consumer_did: str) -> bool:
        return (
            source_did in self.endorsed
            and source_did not in self.deny_access
            and consumer_did not in self.reject_consumers
        )


@dataclass(eq=False)
class ConsumerActor(EntityActor):
    role: Role = Role.CONSUMER


@dataclass(eq=False)
class SourceActor(EntityActor):
    """A data source; ``stored_ref`` locates its persisted data envelope."""

    role: Role = Role.SOURCE
    authority: str = ""
    backend: str = "decentralized"
    host: str = ""
    gamma: float = 0.0
    stored_ref: Any = None
    wrapped_key: bytes | None = None
    endorsement: Any = None
    omega_cache: dict[str, tuple[int, bytes]] = field(default_factory=dict)
