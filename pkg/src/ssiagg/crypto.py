"""Pluggable cryptography provider.

Every entity owns asymmetric key pairs that can both sign and receive
encrypted payloads, so a pair bundles an Ed25519 signing key and an X25519
agreement key derived from one 32-byte secret seed.

Three ciphertext schemes share one envelope:

* ``SYMMETRIC``: AES-256-GCM under a :class:`SymmetricKey`.
* ``PUBLIC_KEY``: ephemeral X25519 + HKDF + AES-256-GCM (hybrid, any length).
* ``PRIVATE_KEY_TRANSFORM``: "encryption with a private key", modelled as a
  signature with message recovery. The payload carries the object and an
  Ed25519 signature; "decrypting" with the public key verifies and returns
  the object.

Two providers exist. :class:`RealProvider` draws randomness from the OS.
:class:`DeterministicProvider` draws it from a seeded generator so whole
simulations replay byte-for-byte. Both run the same algorithms.
"""

from __future__ import annotations

import hashlib
import os
import random
import secrets
import threading
from dataclasses import dataclass, field
from enum import Enum

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

PROVIDER_ENV_VAR = "SSIAGG_CRYPTO_PROVIDER"

KEY_LENGTH = 32
DIGEST_LENGTH = 32
NONCE_LENGTH = 12
SIGNATURE_LENGTH = 64
ADDRESS_LENGTH = 42  # "0x" + 20 bytes hex
KEY_ID_PREFIX = "key:"

_MAGIC = b"\xa7"
_SIGN_DOMAIN = b"ssiagg/sign-recover/v1\x00"
_HYBRID_INFO = b"ssiagg/hybrid/v1"
_RAW = serialization.Encoding.Raw
_RAW_PUB = serialization.PublicFormat.Raw
_RAW_PRIV = serialization.PrivateFormat.Raw


class CryptoError(Exception):
    pass


class DecryptionFailure(CryptoError):
    """Wrong key, tampered payload, or scheme mismatch."""


class RecoveryFailure(DecryptionFailure):
    """A signature did not verify, so no object can be recovered."""


class Scheme(Enum):
    SYMMETRIC = 1
    PUBLIC_KEY = 2
    PRIVATE_KEY_TRANSFORM = 3


class Digest(bytes):
    """Fixed-length hash output."""

    def __new__(cls, value: bytes) -> Digest:
        if len(value) != DIGEST_LENGTH:
            raise ValueError(f"digest must be {DIGEST_LENGTH} bytes, got {len(value)}")
        return super().__new__(cls, value)


class WalletAddress(str):
    """Ledger address derived from a public key."""


@dataclass(frozen=True)
class SymmetricKey:
    key_bytes: bytes = field(repr=False)
    key_id: str

    def __post_init__(self) -> None:
        if len(self.key_bytes) != KEY_LENGTH:
            raise ValueError(f"symmetric key must be {KEY_LENGTH} bytes")


@dataclass(frozen=True)
class PublicKey:
    sign_key: bytes
    enc_key: bytes

    @property
    def raw(self) -> bytes:
        return self.sign_key + self.enc_key

    @property
    def identifier(self) -> str:
        return KEY_ID_PREFIX + self.raw.hex()

    @classmethod
    def from_raw(cls, raw: bytes) -> PublicKey:
        if len(raw) != 2 * KEY_LENGTH:
            raise ValueError("public key must be 64 bytes")
        return cls(raw[:KEY_LENGTH], raw[KEY_LENGTH:])


@dataclass(frozen=True)
class SecretKey:
    seed: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.seed) != KEY_LENGTH:
            raise ValueError(f"secret seed must be {KEY_LENGTH} bytes")

    def _signer(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.seed)

    def _agreement(self) -> X25519PrivateKey:
        return X25519PrivateKey.from_private_bytes(
            hashlib.sha256(b"ssiagg/x25519\x00" + self.seed).digest()
        )

    def public_key(self) -> PublicKey:
        return PublicKey(
            self._signer().public_key().public_bytes(_RAW, _RAW_PUB),
            self._agreement().public_key().public_bytes(_RAW, _RAW_PUB),
        )

    def secret_material(self) -> tuple[bytes, ...]:
        """Every private byte string this key holds (for leak checks)."""
        return (self.seed, self._agreement().private_bytes(_RAW, _RAW_PRIV, serialization.NoEncryption()))


@dataclass(frozen=True)
class AsymmetricKeyPair:
    public_part: PublicKey
    secret_part: SecretKey = field(repr=False)

    @property
    def identifier(self) -> str:
        return self.public_part.identifier

    @property
    def pk(self) -> PublicKey:
        return self.public_part

    @property
    def sk(self) -> SecretKey:
        return self.secret_part


@dataclass(frozen=True)
class Ciphertext:
    scheme: Scheme
    payload: bytes

    def to_bytes(self) -> bytes:
        return _MAGIC + bytes([self.scheme.value]) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> Ciphertext:
        if len(data) < 2 or data[:1] != _MAGIC:
            raise DecryptionFailure("not a ciphertext envelope")
        try:
            scheme = Scheme(data[1])
        except ValueError:
            raise DecryptionFailure(f"unknown scheme tag {data[1]}") from None
        return cls(scheme, bytes(data[2:]))

    def __len__(self) -> int:
        return len(self.payload) + 2


def is_ciphertext(data: bytes) -> bool:
    try:
        Ciphertext.from_bytes(data)
    except DecryptionFailure:
        return False
    return True


def parse_key_id(identifier: str) -> PublicKey:
    """Resolve a key identifier to its public key.

    Identifiers are self-certifying (the lowercase hex of the public key), so
    resolution is a pure decode. Non-canonical spellings are rejected.
    """
    if not isinstance(identifier, str) or not identifier.startswith(KEY_ID_PREFIX):
        raise RecoveryFailure(f"malformed key identifier {identifier!r}")
    body = identifier[len(KEY_ID_PREFIX):]
    try:
        raw = bytes.fromhex(body)
    except ValueError:
        raise RecoveryFailure("malformed key identifier") from None
    if raw.hex() != body or len(raw) != 2 * KEY_LENGTH:
        raise RecoveryFailure("non-canonical key identifier")
    return PublicKey.from_raw(raw)


def _as_public(key: PublicKey | AsymmetricKeyPair | str) -> PublicKey:
    if isinstance(key, PublicKey):
        return key
    if isinstance(key, AsymmetricKeyPair):
        return key.public_part
    if isinstance(key, str):
        return parse_key_id(key)
    raise TypeError(f"expected a public key or key identifier, got {type(key).__name__}")


def _as_secret(key: SecretKey | AsymmetricKeyPair) -> SecretKey:
    if isinstance(key, AsymmetricKeyPair):
        return key.secret_part
    return key


class CryptoProvider:
    """Algorithms shared by both providers; subclasses supply randomness."""

    name = "abstract"
    key_length = KEY_LENGTH
    digest_length = DIGEST_LENGTH
    address_length = ADDRESS_LENGTH

    def random_bytes(self, n: int) -> bytes:
        raise NotImplementedError

    def random_int(self, bits: int = 64) -> int:
        return int.from_bytes(self.random_bytes((bits + 7) // 8), "big") >> ((-bits) % 8)

    # key generation

    @staticmethod
    def _seed_bytes(seed: int | str | bytes, label: bytes) -> bytes:
        if isinstance(seed, int):
            seed = str(seed).encode()
        elif isinstance(seed, str):
            seed = seed.encode()
        return hashlib.sha256(label + b"\x00" + seed).digest()

    def gen_symmetric(self, seed: int | str | bytes | None = None) -> SymmetricKey:
        if seed is None:
            material = self.random_bytes(KEY_LENGTH)
        else:
            material = self._seed_bytes(seed, b"ssiagg/symmetric")
        key_id = "kappa:" + hashlib.sha256(b"kappa-id" + material).hexdigest()[:16]
        return SymmetricKey(material, key_id)

    def gen_keypair(self, seed: int | str | bytes | None = None) -> AsymmetricKeyPair:
        if seed is None:
            material = self.random_bytes(KEY_LENGTH)
        else:
            material = self._seed_bytes(seed, b"ssiagg/keypair")
        sk = SecretKey(material)
        return AsymmetricKeyPair(sk.public_key(), sk)

    def wallet_address(self, pk: PublicKey | AsymmetricKeyPair | str) -> WalletAddress:
        pk = _as_public(pk)
        return WalletAddress("0x" + hashlib.sha256(b"ssiagg/wallet" + pk.raw).digest()[:20].hex())

    def hash(self, obj: bytes) -> Digest:
        return Digest(hashlib.sha256(obj).digest())

    # signature with message recovery

    def sign_recover(self, obj: bytes, sk: SecretKey | AsymmetricKeyPair) -> Ciphertext:
        signature = _as_secret(sk)._signer().sign(_SIGN_DOMAIN + obj)
        return Ciphertext(Scheme.PRIVATE_KEY_TRANSFORM, bytes(obj) + signature)

    def verify_recover(
        self, sig: Ciphertext | bytes, pk: PublicKey | AsymmetricKeyPair | str
    ) -> bytes:
        if not isinstance(sig, Ciphertext):
            try:
                sig = Ciphertext.from_bytes(sig)
            except DecryptionFailure as exc:
                raise RecoveryFailure(str(exc)) from None
        if sig.scheme is not Scheme.PRIVATE_KEY_TRANSFORM:
            raise RecoveryFailure(f"expected a signature, got {sig.scheme.name}")
        if len(sig.payload) < SIGNATURE_LENGTH:
            raise RecoveryFailure("signature payload truncated")
        obj, signature = sig.payload[:-SIGNATURE_LENGTH], sig.payload[-SIGNATURE_LENGTH:]
        public = _as_public(pk)
        try:
            Ed25519PublicKey.from_public_bytes(public.sign_key).verify(signature, _SIGN_DOMAIN + obj)
        except (InvalidSignature, ValueError):
            raise RecoveryFailure("signature does not verify under the given key") from None
        return obj

    # encryption

    def encrypt(self, obj: bytes, key) -> Ciphertext:
        """Encrypt under a symmetric key, a public key / identifier, or a secret key."""
        if isinstance(key, SymmetricKey):
            nonce = self.random_bytes(NONCE_LENGTH)
            aad = bytes([Scheme.SYMMETRIC.value])
            return Ciphertext(Scheme.SYMMETRIC, nonce + AESGCM(key.key_bytes).encrypt(nonce, obj, aad))
        if isinstance(key, SecretKey):
            return self.sign_recover(obj, key)
        recipient = _as_public(key)
        ephemeral = X25519PrivateKey.from_private_bytes(self.random_bytes(KEY_LENGTH))
        eph_pub = ephemeral.public_key().public_bytes(_RAW, _RAW_PUB)
        shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(recipient.enc_key))
        wrap_key = self._derive(shared, eph_pub, recipient.enc_key)
        nonce = self.random_bytes(NONCE_LENGTH)
        aad = bytes([Scheme.PUBLIC_KEY.value]) + eph_pub
        return Ciphertext(Scheme.PUBLIC_KEY, eph_pub + nonce + AESGCM(wrap_key).encrypt(nonce, obj, aad))

    def decrypt(self, ct: Ciphertext | bytes, key) -> bytes:
        if not isinstance(ct, Ciphertext):
            ct = Ciphertext.from_bytes(ct)
        if isinstance(key, SymmetricKey):
            if ct.scheme is not Scheme.SYMMETRIC:
                raise DecryptionFailure(f"symmetric key cannot open {ct.scheme.name} ciphertext")
            nonce, body = ct.payload[:NONCE_LENGTH], ct.payload[NONCE_LENGTH:]
            try:
                return AESGCM(key.key_bytes).decrypt(nonce, body, bytes([Scheme.SYMMETRIC.value]))
            except (InvalidTag, ValueError):
                raise DecryptionFailure("symmetric decryption failed") from None
        if isinstance(key, (SecretKey, AsymmetricKeyPair)):
            if ct.scheme is not Scheme.PUBLIC_KEY:
                raise DecryptionFailure(f"secret key cannot open {ct.scheme.name} ciphertext")
            secret = _as_secret(key)
            eph_pub = ct.payload[:KEY_LENGTH]
            nonce = ct.payload[KEY_LENGTH:KEY_LENGTH + NONCE_LENGTH]
            body = ct.payload[KEY_LENGTH + NONCE_LENGTH:]
            if len(eph_pub) != KEY_LENGTH or len(nonce) != NONCE_LENGTH:
                raise DecryptionFailure("hybrid ciphertext truncated")
            agreement = secret._agreement()
            own_pub = agreement.public_key().public_bytes(_RAW, _RAW_PUB)
            try:
                shared = agreement.exchange(X25519PublicKey.from_public_bytes(eph_pub))
                wrap_key = self._derive(shared, eph_pub, own_pub)
                return AESGCM(wrap_key).decrypt(
                    nonce, body, bytes([Scheme.PUBLIC_KEY.value]) + eph_pub
                )
            except (InvalidTag, ValueError):
                raise DecryptionFailure("hybrid decryption failed") from None
        if isinstance(key, (PublicKey, str)):
            if ct.scheme is not Scheme.PRIVATE_KEY_TRANSFORM:
                raise DecryptionFailure(f"public key cannot open {ct.scheme.name} ciphertext")
            return self.verify_recover(ct, key)
        raise TypeError(f"unsupported key type {type(key).__name__}")

    @staticmethod
    def _derive(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> bytes:
        return HKDF(
            algorithm=hashes.SHA256(),
            length=KEY_LENGTH,
            salt=None,
            info=_HYBRID_INFO + eph_pub + recipient_pub,
        ).derive(shared)


class RealProvider(CryptoProvider):
    name = "real"

    def random_bytes(self, n: int) -> bytes:
        return secrets.token_bytes(n)


class DeterministicProvider(CryptoProvider):
    """Seeded randomness; identical call sequences yield identical bytes."""

    name = "deterministic"

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self._rng = random.Random(seed)
        self._lock = threading.Lock()

    def random_bytes(self, n: int) -> bytes:
        with self._lock:
            return self._rng.randbytes(n)


def get_provider(name: str | None = None, seed: int = 0) -> CryptoProvider:
    """Build a provider by name, falling back to ``$SSIAGG_CRYPTO_PROVIDER``."""
    name = name or os.environ.get(PROVIDER_ENV_VAR) or "deterministic"
    if name == "real":
        return RealProvider()
    if name == "deterministic":
        return DeterministicProvider(seed)
    raise ValueError(f"unknown crypto provider {name!r}")


def encode_nonce(r: int) -> bytes:
    """Byte form of a protocol nonce, as signed by sources and authorities."""
    if r < 0:
        raise ValueError("nonce must be a natural number")
    return b"nonce:" + str(r).encode("ascii")

