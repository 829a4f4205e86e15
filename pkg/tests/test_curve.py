from __future__ import annotations

import hashlib
import random

import pytest
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import encode_dss_signature
from hypothesis import given, settings
from hypothesis import strategies as st

from scms.curve import (
    INFINITY,
    G,
    N,
    EcdsaSignature,
    EciesCiphertext,
    Point,
    aes_block,
    count_ops,
    ecdsa_sign,
    ecdsa_verify,
    ecies_decrypt,
    ecies_encrypt,
    keygen,
    point_add,
    scalar_from_bytes,
    scalar_mul,
    scalar_to_bytes,
    sha256,
)
from scms.errors import MalformedEphemeralPoint, MalformedInput, TagMismatch
from tests import oracles

scalars = st.integers(min_value=1, max_value=N - 1)


# -- scalar multiplication ----------------------------------------------------


def test_zero_and_one():
    assert scalar_mul(0, G) == INFINITY
    assert scalar_mul(N, G) == INFINITY
    assert scalar_mul(1, G) == G
    assert scalar_mul(5, INFINITY) == INFINITY


def test_frozen_base_vectors(vectors):
    for case in vectors["scalar_mult_G"]:
        got = scalar_mul(int(case["k"], 16), G)
        assert (got.x, got.y) == (int(case["x"], 16), int(case["y"], 16))


def test_frozen_variable_base_vectors(vectors):
    bx, by = (int(v, 16) for v in vectors["scalar_mult_var"]["base"])
    base = Point(bx, by)
    for case in vectors["scalar_mult_var"]["cases"]:
        got = scalar_mul(int(case["k"], 16), base)
        assert (got.x, got.y) == (int(case["x"], 16), int(case["y"], 16))


@settings(max_examples=25, deadline=None)
@given(scalars)
def test_matches_double_and_add_oracle(k):
    got = scalar_mul(k, G)
    assert (got.x, got.y) == oracles.affine_mul(k)


@settings(max_examples=15, deadline=None)
@given(scalars, scalars)
def test_variable_base_matches_oracle(k, m):
    base = scalar_mul(m, G)
    got = scalar_mul(k, base)
    assert (got.x, got.y) == oracles.affine_mul(k, (base.x, base.y))


def test_group_law():
    p = scalar_mul(12345, G)
    assert point_add(p, INFINITY) == p
    assert point_add(INFINITY, p) == p
    assert point_add(p, -p) == INFINITY
    assert point_add(scalar_mul(2, G), scalar_mul(3, G)) == scalar_mul(5, G)
    assert point_add(p, p) == scalar_mul(24690, G)
    assert p + p == 2 * p


@settings(max_examples=20, deadline=None)
@given(scalars, scalars)
def test_distributive(a, b):
    assert scalar_mul(a, G) + scalar_mul(b, G) == scalar_mul((a + b) % N, G)


# -- encodings ------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(scalars)
def test_point_compression_roundtrip(k):
    p = scalar_mul(k, G)
    enc = p.encode()
    assert len(enc) == 33 and enc[0] in (2, 3)
    assert Point.decode(enc) == p


def test_point_decode_rejects_junk():
    with pytest.raises(MalformedInput):
        Point.decode(b"\x04" + bytes(32))
    with pytest.raises(MalformedInput):
        Point.decode(b"\x02" + bytes(31))
    p = oracles.P
    # an x whose right-hand side is a non-residue has no point on the curve
    bad = next(x for x in range(1, 100) if pow((x**3 - 3 * x + oracles.B) % p, (p - 1) // 2, p) == p - 1)
    with pytest.raises(MalformedInput):
        Point.decode(b"\x02" + bad.to_bytes(32, "big"))


def test_scalar_encoding():
    assert scalar_to_bytes(1) == bytes(31) + b"\x01"
    assert scalar_from_bytes(scalar_to_bytes(N - 1)) == N - 1
    with pytest.raises(MalformedInput):
        scalar_from_bytes(N.to_bytes(32, "big"))
    with pytest.raises(MalformedInput):
        scalar_from_bytes(b"\x01")


# -- keys -----------------------------------------------------------------------


def test_keygen_determinism():
    a = keygen(random.Random(5))
    b = keygen(random.Random(5))
    c = keygen(random.Random(6))
    assert a == b
    assert a.private != c.private
    assert scalar_mul(a.private, G) == a.public
    assert a.public.on_curve()


# -- hashing and AES ------------------------------------------------------------


def test_sha256_vectors(vectors):
    assert sha256(b"").hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    assert sha256(b"").hex() == vectors["sha256"][""]
    assert sha256(b"abc").hex() == vectors["sha256"]["abc"]
    assert sha256(b"abc") == oracles.sha256_alt(b"abc")
    assert sha256(b"abd") != sha256(b"abc")


def test_aes_fips197_vector():
    key = bytes(range(16))
    pt = bytes.fromhex("00112233445566778899aabbccddeeff")
    assert aes_block(key, pt).hex() == "69c4e0d86a7b0430d8cdb78070b4c55a"
    assert aes_block(key, pt) == aes_block(key, pt)
    assert aes_block(key, pt) != aes_block(key, bytes(16))


def test_aes_counts_blocks():
    with count_ops() as ctr:
        aes_block(bytes(16), bytes(16))
        aes_block(bytes(16), bytes(16))
    assert ctr.aes_blocks == 2


# -- ECDSA ----------------------------------------------------------------------


def test_ecdsa_roundtrip_and_flips():
    kp = keygen(random.Random(1))
    msg = b"message body"
    sig = ecdsa_sign(kp.private, msg, random.Random(2))
    assert ecdsa_verify(kp.public, msg, sig)
    for bit in range(0, len(msg) * 8, 7):
        flipped = bytearray(msg)
        flipped[bit // 8] ^= 1 << (bit % 8)
        assert not ecdsa_verify(kp.public, bytes(flipped), sig)
    assert not ecdsa_verify(keygen(random.Random(3)).public, msg, sig)


def test_ecdsa_range_checks():
    kp = keygen(random.Random(1))
    sig = ecdsa_sign(kp.private, b"x")
    assert not ecdsa_verify(kp.public, b"x", EcdsaSignature(0, sig.s))
    assert not ecdsa_verify(kp.public, b"x", EcdsaSignature(sig.r, 0))
    assert not ecdsa_verify(kp.public, b"x", EcdsaSignature(N, sig.s))
    assert not ecdsa_verify(INFINITY, b"x", sig)


def test_ecdsa_deterministic_matches_reference(vectors):
    v = vectors["ecdsa"]
    priv, msg = int(v["priv"], 16), bytes.fromhex(v["msg"])
    sig = ecdsa_sign(priv, msg)
    assert sig == ecdsa_sign(priv, msg)
    assert (sig.r, sig.s) == (int(v["r"], 16), int(v["s"], 16))
    assert (sig.r, sig.s) == oracles.ecdsa_deterministic(priv, msg)


@settings(max_examples=10, deadline=None)
@given(scalars, st.binary(max_size=64))
def test_ecdsa_verifies_under_cryptography(priv, msg):
    sig = ecdsa_sign(priv, msg)
    pub = ec.derive_private_key(priv, ec.SECP256R1()).public_key()
    pub.verify(encode_dss_signature(sig.r, sig.s), msg, ec.ECDSA(hashes.SHA256()))


def test_ecdsa_accepts_cryptography_signatures():
    from cryptography.hazmat.primitives.asymmetric.utils import decode_dss_signature

    sk = ec.generate_private_key(ec.SECP256R1())
    nums = sk.public_key().public_numbers()
    r, s = decode_dss_signature(sk.sign(b"hello", ec.ECDSA(hashes.SHA256())))
    assert ecdsa_verify(Point(nums.x, nums.y), b"hello", EcdsaSignature(r, s))


def test_ecdsa_op_counts():
    kp = keygen(random.Random(9))
    with count_ops() as signing:
        sig = ecdsa_sign(kp.private, b"m", random.Random(1))
    with count_ops() as verifying:
        ecdsa_verify(kp.public, b"m", sig)
    assert (signing.scalar_mults, signing.ecdsa_signs) == (1, 1)
    assert (verifying.scalar_mults, verifying.ecdsa_verifies) == (2, 1)


def test_counter_scopes_nest():
    with count_ops() as outer:
        scalar_mul(3, G)
        with count_ops() as inner:
            scalar_mul(4, G)
    assert (outer.scalar_mults, inner.scalar_mults) == (2, 1)


def test_signature_encoding():
    sig = EcdsaSignature(1, N - 1)
    assert EcdsaSignature.decode(sig.encode()) == sig
    with pytest.raises(MalformedInput):
        EcdsaSignature.decode(bytes(63))


# -- ECIES ----------------------------------------------------------------------


def test_ecies_roundtrip_and_tamper():
    rng = random.Random(4)
    kp = keygen(rng)
    secret = scalar_to_bytes(0xC0FFEE)
    ct = ecies_encrypt(kp.public, secret, rng)
    assert ecies_decrypt(kp.private, ct) == secret
    body = bytearray(ct.body)
    body[3] ^= 0x10
    with pytest.raises(TagMismatch):
        ecies_decrypt(kp.private, EciesCiphertext(ct.ephemeral_public, bytes(body), ct.tag))
    with pytest.raises(TagMismatch):
        ecies_decrypt(keygen(rng).private, ct)


def test_ecies_fresh_ephemeral():
    rng = random.Random(4)
    kp = keygen(rng)
    a = ecies_encrypt(kp.public, b"same", rng)
    b = ecies_encrypt(kp.public, b"same", rng)
    assert a.ephemeral_public != b.ephemeral_public and a.body != b.body


def test_ecies_off_curve_ephemeral():
    kp = keygen(random.Random(4))
    ct = ecies_encrypt(kp.public, b"x" * 32, random.Random(5))
    bogus = Point(ct.ephemeral_public.x, (ct.ephemeral_public.y + 1) % oracles.P)
    with pytest.raises(MalformedEphemeralPoint):
        ecies_decrypt(kp.private, EciesCiphertext(bogus, ct.body, ct.tag))


def test_ecies_key_derivation_is_sha256_of_x():
    # the encryption key is recomputable from the shared x alone
    rng = random.Random(8)
    kp = keygen(rng)
    ct = ecies_encrypt(kp.public, b"\x00" * 16, rng)
    shared = scalar_mul(kp.private, ct.ephemeral_public)
    enc_key = hashlib.sha256(scalar_to_bytes(shared.x) + b"scms-ecies-enc").digest()[:16]
    # CTR over zeros yields the raw keystream: first block is AES(enc_key, 0)
    assert ct.body == aes_block(enc_key, bytes(16))
