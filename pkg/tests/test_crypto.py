from __future__ import annotations

import hashlib

import pytest
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ed25519_recover, wallet
from ssiagg import canonical
from ssiagg.crypto import (
    Ciphertext,
    DecryptionFailure,
    DeterministicProvider,
    RealProvider,
    RecoveryFailure,
    Scheme,
    encode_nonce,
    get_provider,
    is_ciphertext,
    parse_key_id,
)
from ssiagg.identity import make_did


@pytest.fixture
def pair(provider):
    return provider.gen_keypair(seed="alice")


class TestKeys:
    def test_seeded_keypair_is_reproducible(self):
        a = DeterministicProvider(1).gen_keypair(seed="x")
        b = DeterministicProvider(99).gen_keypair(seed="x")
        assert a.identifier == b.identifier

    def test_unseeded_keypairs_follow_provider_seed(self):
        assert DeterministicProvider(3).gen_keypair().identifier == DeterministicProvider(3).gen_keypair().identifier
        assert DeterministicProvider(3).gen_keypair().identifier != DeterministicProvider(4).gen_keypair().identifier

    def test_identifier_is_self_certifying(self, pair):
        assert pair.identifier == "key:" + pair.pk.raw.hex()
        assert parse_key_id(pair.identifier) == pair.pk

    @pytest.mark.parametrize("bad", ["pk:00", "key:zz", "key:" + "AB" * 64, "key:" + "ab" * 63, 17])
    def test_malformed_identifiers_rejected(self, bad):
        with pytest.raises(RecoveryFailure):
            parse_key_id(bad)

    def test_wallet_matches_reference(self, provider, pair):
        address = provider.wallet_address(pair.pk)
        assert address == wallet(pair.pk.raw)
        assert len(address) == 42

    def test_did_derives_from_auth_wallet(self, provider, pair):
        assert make_did(provider, pair) == "did:agg:" + wallet(pair.pk.raw)

    def test_hash_is_sha256(self, provider):
        assert bytes(provider.hash(b"abc")) == hashlib.sha256(b"abc").digest()

    def test_secret_material_lists_private_bytes(self, pair):
        assert pair.sk.seed in pair.sk.secret_material()


class TestSymmetric:
    def test_roundtrip(self, provider):
        key = provider.gen_symmetric()
        assert provider.decrypt(provider.encrypt(b"payload", key), key) == b"payload"

    def test_matches_raw_aes_gcm(self, provider):
        key = provider.gen_symmetric(seed="k")
        ct = provider.encrypt(b"hello world", key)
        assert ct.scheme is Scheme.SYMMETRIC
        nonce, body = ct.payload[:12], ct.payload[12:]
        assert AESGCM(key.key_bytes).decrypt(nonce, body, bytes([Scheme.SYMMETRIC.value])) == b"hello world"

    def test_wrong_key_fails(self, provider):
        ct = provider.encrypt(b"x", provider.gen_symmetric(seed=1))
        with pytest.raises(DecryptionFailure):
            provider.decrypt(ct, provider.gen_symmetric(seed=2))

    def test_bit_flip_detected(self, provider):
        key = provider.gen_symmetric()
        raw = bytearray(provider.encrypt(b"data", key).to_bytes())
        raw[-1] ^= 1
        with pytest.raises(DecryptionFailure):
            provider.decrypt(bytes(raw), key)


class TestHybrid:
    def test_roundtrip_via_identifier(self, provider, pair):
        ct = provider.encrypt(b"secret", pair.identifier)
        assert ct.scheme is Scheme.PUBLIC_KEY
        assert provider.decrypt(ct, pair.sk) == b"secret"

    def test_other_recipient_cannot_open(self, provider, pair):
        ct = provider.encrypt(b"secret", pair.pk)
        with pytest.raises(DecryptionFailure):
            provider.decrypt(ct, provider.gen_keypair(seed="mallory").sk)

    def test_scheme_mismatch(self, provider, pair):
        with pytest.raises(DecryptionFailure):
            provider.decrypt(provider.encrypt(b"x", provider.gen_symmetric()), pair.sk)


class TestSignRecover:
    def test_recover_and_raw_verification(self, provider, pair):
        ct = provider.sign_recover(b"claim", pair.sk)
        assert provider.verify_recover(ct, pair.pk) == b"claim"
        assert ed25519_recover(ct.to_bytes(), pair.pk.sign_key) == b"claim"

    def test_encrypt_with_secret_key_is_signing(self, provider, pair):
        ct = provider.encrypt(b"claim", pair.sk)
        assert provider.decrypt(ct, pair.identifier) == b"claim"

    def test_wrong_public_key(self, provider, pair):
        ct = provider.sign_recover(b"claim", pair.sk)
        with pytest.raises(RecoveryFailure):
            provider.verify_recover(ct, provider.gen_keypair(seed="bob").pk)

    def test_tampered_message(self, provider, pair):
        raw = bytearray(provider.sign_recover(b"claim", pair.sk).to_bytes())
        raw[2] ^= 1
        with pytest.raises(RecoveryFailure):
            provider.verify_recover(bytes(raw), pair.pk)

    def test_truncated(self, provider, pair):
        with pytest.raises(RecoveryFailure):
            provider.verify_recover(Ciphertext(Scheme.PRIVATE_KEY_TRANSFORM, b"short"), pair.pk)

    def test_non_envelope(self, provider, pair):
        with pytest.raises(RecoveryFailure):
            provider.verify_recover(b"plain bytes", pair.pk)


class TestEnvelope:
    def test_is_ciphertext(self, provider):
        assert is_ciphertext(provider.encrypt(b"x", provider.gen_symmetric()).to_bytes())
        assert not is_ciphertext(b'{"a":1}')
        assert not is_ciphertext(b"\xa7\xff")

    def test_nonce_encoding(self):
        assert encode_nonce(42) == b"nonce:42"
        with pytest.raises(ValueError):
            encode_nonce(-1)


class TestProviders:
    def test_env_selects_provider(self, monkeypatch):
        monkeypatch.setenv("SSIAGG_CRYPTO_PROVIDER", "real")
        assert isinstance(get_provider(), RealProvider)
        monkeypatch.setenv("SSIAGG_CRYPTO_PROVIDER", "deterministic")
        assert isinstance(get_provider(), DeterministicProvider)

    def test_unknown_provider(self):
        with pytest.raises(ValueError):
            get_provider("quantum")

    def test_real_provider_randomness(self):
        p = RealProvider()
        assert p.random_bytes(16) != p.random_bytes(16)


@settings(max_examples=40, deadline=None)
@given(st.binary(max_size=512))
def test_all_schemes_roundtrip(data):
    p = DeterministicProvider(0)
    key, pair = p.gen_symmetric(seed="s"), p.gen_keypair(seed="p")
    assert p.decrypt(p.encrypt(data, key), key) == data
    assert p.decrypt(p.encrypt(data, pair.pk), pair.sk) == data
    assert p.verify_recover(p.sign_recover(data, pair.sk), pair.pk) == data


class TestCanonical:
    def test_sorted_and_compact(self):
        assert canonical.dumps({"b": 1, "a": [1, 2]}) == b'{"a":[1,2],"b":1}'

    def test_bytes_and_sets(self):
        encoded = canonical.dumps({"x": b"\x00\x01", "s": {3, 1, 2}})
        assert canonical.loads(encoded) == {"x": b"\x00\x01", "s": [1, 2, 3]}

    def test_rejects_non_string_keys(self):
        with pytest.raises(TypeError):
            canonical.dumps({1: 2})

    def test_reserved_bytes_tag(self):
        with pytest.raises(TypeError):
            canonical.dumps({"$b": ""})

    @given(st.recursive(
        st.none() | st.booleans() | st.integers() | st.text() | st.binary(),
        lambda inner: st.lists(inner, max_size=4)
        | st.dictionaries(st.text(max_size=5).filter(lambda k: k != "$b"), inner, max_size=4),
        max_leaves=12,
    ))
    def test_roundtrip(self, value):
        assert canonical.loads(canonical.dumps(value)) == value
