"""NIST P-256 group arithmetic, ECDSA, ECIES, AES-128 and SHA-256.

Scalars are plain ``int`` values in ``[0, N)``; points are :class:`Point`.
Scalar multiplication runs on the backend chosen by :mod:`scms._kernel`.

None of this is constant time. It is a research artifact and must not
guard real keys.
"""

from __future__ import annotations

import contextlib
import hashlib
import hmac
import secrets
from contextvars import ContextVar
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Optional

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from scms import _kernel
from scms._p256_py import B, GX, GY, N, P
from scms.errors import MalformedEphemeralPoint, MalformedInput, TagMismatch

SCALAR_LEN = 32
POINT_LEN = 33
KEY_LEN = 16
TAG_LEN = 16


# ---------------------------------------------------------------------------
# instrumentation
# ---------------------------------------------------------------------------


@dataclass
class OpCounter:
    """Operation tallies for one measurement scope."""

    scalar_mults: int = 0
    point_adds: int = 0
    aes_blocks: int = 0
    ecdsa_signs: int = 0
    ecdsa_verifies: int = 0
    events: Counter = field(default_factory=Counter)

    def as_dict(self) -> dict:
        out = {
            "scalar_mults": self.scalar_mults,
            "point_adds": self.point_adds,
            "aes_blocks": self.aes_blocks,
            "ecdsa_signs": self.ecdsa_signs,
            "ecdsa_verifies": self.ecdsa_verifies,
        }
        out.update(sorted(self.events.items()))
        return out


_active: ContextVar[tuple] = ContextVar("scms_op_counters", default=())


@contextlib.contextmanager
def count_ops() -> Iterator[OpCounter]:
    """Collect operation counts for the enclosed block. Scopes nest."""
    ctr = OpCounter()
    token = _active.set(_active.get() + (ctr,))
    try:
        yield ctr
    finally:
        _active.reset(token)


def _bump(attr: str) -> None:
    for ctr in _active.get():
        setattr(ctr, attr, getattr(ctr, attr) + 1)


def record(event: str, n: int = 1) -> None:
    """Count a named higher-level event in every active scope."""
    for ctr in _active.get():
        ctr.events[event] += n


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Point:
    """Affine P-256 point; ``x is None`` marks the identity."""

    x: Optional[int]
    y: Optional[int]

    @property
    def is_identity(self) -> bool:
        return self.x is None

    def on_curve(self) -> bool:
        if self.x is None:
            return True
        x, y = self.x, self.y
        if not (0 <= x < P and 0 <= y < P):
            return False
        return (y * y - (x * x * x - 3 * x + B)) % P == 0

    def encode(self) -> bytes:
        """33-octet compressed form. The identity has no encoding."""
        if self.x is None:
            raise ValueError("the identity point is never serialized")
        return bytes([2 | (self.y & 1)]) + self.x.to_bytes(SCALAR_LEN, "big")

    @classmethod
    def decode(cls, data: bytes) -> "Point":
        if len(data) != POINT_LEN or data[0] not in (2, 3):
            raise MalformedInput("bad compressed point encoding")
        x = int.from_bytes(data[1:], "big")
        if x >= P:
            raise MalformedInput("point x-coordinate out of range")
        rhs = (x * x * x - 3 * x + B) % P
        y = pow(rhs, (P + 1) // 4, P)
        if y * y % P != rhs:
            raise MalformedInput("x-coordinate not on curve")
        if (y & 1) != (data[0] & 1):
            y = P - y
        return cls(x, y)

    def __add__(self, other: "Point") -> "Point":
        return point_add(self, other)

    def __neg__(self) -> "Point":
        if self.x is None:
            return self
        return Point(self.x, (-self.y) % P)

    def __rmul__(self, k: int) -> "Point":
        return scalar_mul(k, self)

    def __repr__(self) -> str:
        if self.x is None:
            return "Point(identity)"
        return f"Point({self.encode().hex()})"


INFINITY = Point(None, None)
G = Point(GX, GY)


def scalar_mul(k: int, pt: Point) -> Point:
    _bump("scalar_mults")
    if pt.x is None:
        return INFINITY
    if pt == G:
        res = _kernel.mul_base(k)
    else:
        res = _kernel.mul(k, pt.x, pt.y)
    return INFINITY if res is None else Point(*res)


def point_add(p1: Point, p2: Point) -> Point:
    _bump("point_adds")
    if p1.x is None:
        return p2
    if p2.x is None:
        return p1
    if p1.x == p2.x:
        if (p1.y + p2.y) % P == 0:
            return INFINITY
        lam = 3 * (p1.x * p1.x - 1) * pow(2 * p1.y, -1, P) % P
    else:
        lam = (p2.y - p1.y) * pow(p2.x - p1.x, -1, P) % P
    x3 = (lam * lam - p1.x - p2.x) % P
    return Point(x3, (lam * (p1.x - x3) - p1.y) % P)


def scalar_to_bytes(k: int) -> bytes:
    return k.to_bytes(SCALAR_LEN, "big")


def scalar_from_bytes(data: bytes) -> int:
    if len(data) != SCALAR_LEN:
        raise MalformedInput("scalar must be 32 octets")
    k = int.from_bytes(data, "big")
    if k >= N:
        raise MalformedInput("scalar not reduced mod n")
    return k


# ---------------------------------------------------------------------------
# keys
# ---------------------------------------------------------------------------


def default_rng():
    return secrets.SystemRandom()


@dataclass(frozen=True)
class KeyPair:
    private: int
    public: Point

    @classmethod
    def from_private(cls, d: int) -> "KeyPair":
        return cls(d, scalar_mul(d, G))


def keygen(rng=None) -> KeyPair:
    rng = rng or default_rng()
    return KeyPair.from_private(rng.randrange(1, N))


def random_scalar(rng=None) -> int:
    return (rng or default_rng()).randrange(1, N)


def random_key(rng=None) -> bytes:
    return (rng or default_rng()).randbytes(KEY_LEN)


# ---------------------------------------------------------------------------
# hashing and AES
# ---------------------------------------------------------------------------


def sha256(msg: bytes) -> bytes:
    return hashlib.sha256(msg).digest()


def aes_block(key: bytes, block: bytes) -> bytes:
    """AES-128 encryption of a single 16-octet block."""
    if len(key) != KEY_LEN or len(block) != 16:
        raise ValueError("aes_block needs a 16-octet key and block")
    _bump("aes_blocks")
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


# ---------------------------------------------------------------------------
# ECDSA
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EcdsaSignature:
    r: int
    s: int

    def encode(self) -> bytes:
        return scalar_to_bytes(self.r) + scalar_to_bytes(self.s)

    @classmethod
    def decode(cls, data: bytes) -> "EcdsaSignature":
        if len(data) != 2 * SCALAR_LEN:
            raise MalformedInput("signature must be 64 octets")
        # r/s range is checked by ecdsa_verify, not here
        return cls(int.from_bytes(data[:32], "big"), int.from_bytes(data[32:], "big"))


def _rfc6979_nonces(priv: int, h1: bytes) -> Iterator[int]:
    x = scalar_to_bytes(priv)
    h = scalar_to_bytes(int.from_bytes(h1, "big") % N)
    v = b"\x01" * 32
    k = b"\x00" * 32
    k = hmac.new(k, v + b"\x00" + x + h, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    k = hmac.new(k, v + b"\x01" + x + h, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    while True:
        v = hmac.new(k, v, hashlib.sha256).digest()
        cand = int.from_bytes(v, "big")
        if 1 <= cand < N:
            yield cand
        k = hmac.new(k, v + b"\x00", hashlib.sha256).digest()
        v = hmac.new(k, v, hashlib.sha256).digest()


def ecdsa_sign(priv: int, msg: bytes, rng=None) -> EcdsaSignature:
    """Sign ``sha256(msg)``.

    With ``rng=None`` the nonce is derived deterministically from the key and
    message hash (RFC 6979), so repeated calls give identical signatures.
    """
    if not 0 < priv < N:
        raise ValueError("private key out of range")
    h1 = sha256(msg)
    e = int.from_bytes(h1, "big")
    nonces = _rfc6979_nonces(priv, h1) if rng is None else iter(lambda: rng.randrange(1, N), None)
    _bump("ecdsa_signs")
    for k in nonces:
        # retries on r == 0 / s == 0 are vanishingly rare; count only the one that lands
        res = _kernel.mul_base(k)
        r = res[0] % N
        if r == 0:
            continue
        s = pow(k, -1, N) * (e + r * priv) % N
        if s == 0:
            continue
        _bump("scalar_mults")
        return EcdsaSignature(r, s)
    raise AssertionError("unreachable")


def ecdsa_verify(pub: Point, msg: bytes, sig: EcdsaSignature) -> bool:
    _bump("ecdsa_verifies")
    if not (0 < sig.r < N and 0 < sig.s < N):
        return False
    if pub.x is None or not pub.on_curve():
        return False
    e = int.from_bytes(sha256(msg), "big")
    w = pow(sig.s, -1, N)
    pt = point_add(scalar_mul(e * w % N, G), scalar_mul(sig.r * w % N, pub))
    return pt.x is not None and pt.x % N == sig.r


# ---------------------------------------------------------------------------
# ECIES
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EciesCiphertext:
    ephemeral_public: Point
    body: bytes
    tag: bytes


def _ecies_keys(shared: Point) -> tuple[bytes, bytes]:
    xb = scalar_to_bytes(shared.x)
    return sha256(xb + b"scms-ecies-enc")[:KEY_LEN], sha256(xb + b"scms-ecies-mac")


def _ecies_tag(mac_key: bytes, eph: Point, body: bytes) -> bytes:
    return hmac.new(mac_key, eph.encode() + body, hashlib.sha256).digest()[:TAG_LEN]


def _ctr(key: bytes, data: bytes) -> bytes:
    # single-use key per message, so a zero initial counter is safe
    enc = Cipher(algorithms.AES(key), modes.CTR(bytes(16))).encryptor()
    return enc.update(data) + enc.finalize()


def ecies_encrypt(recipient_pub: Point, plaintext: bytes, rng=None) -> EciesCiphertext:
    if recipient_pub.x is None or not recipient_pub.on_curve():
        raise ValueError("recipient key must be a non-identity curve point")
    eph = keygen(rng)
    enc_key, mac_key = _ecies_keys(scalar_mul(eph.private, recipient_pub))
    body = _ctr(enc_key, plaintext)
    return EciesCiphertext(eph.public, body, _ecies_tag(mac_key, eph.public, body))


def ecies_decrypt(recipient_priv: int, ct: EciesCiphertext) -> bytes:
    eph = ct.ephemeral_public
    if eph.x is None or not eph.on_curve():
        raise MalformedEphemeralPoint("ephemeral public key is not a curve point")
    shared = scalar_mul(recipient_priv, eph)
    if shared.x is None:
        raise TagMismatch("degenerate shared secret")
    enc_key, mac_key = _ecies_keys(shared)
    if not hmac.compare_digest(_ecies_tag(mac_key, eph, ct.body), ct.tag):
        raise TagMismatch("ECIES tag does not verify")
    return _ctr(enc_key, ct.body)
