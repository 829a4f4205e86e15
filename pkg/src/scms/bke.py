"""Butterfly key expansion.

Caterpillar keys ``(a, A)`` and ``(p, P)`` plus two AES keys ``ck``/``ek`` are
expanded into per-index cocoon keys; the authorization CA then adds a fresh
random ``c`` to the signing cocoon and encrypts ``c`` to the encryption
cocoon, so only the end entity can form the butterfly private key.

Expansion value for index ``(time_period, j)``::

    x   = time_period(32) || j(32) || tag(32) || 0(32)      tag: f1=1, f2=2
    out = (AES_k(x+1) ^ (x+1)) || (AES_k(x+2) ^ (x+2)) || (AES_k(x+3) ^ (x+3))
    f   = int(out) mod n
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from scms.curve import (
    G,
    N,
    EciesCiphertext,
    Point,
    aes_block,
    ecies_decrypt,
    ecies_encrypt,
    random_key,
    random_scalar,
    record,
    scalar_from_bytes,
    scalar_mul,
    scalar_to_bytes,
)
from scms.errors import KeyMismatch, MalformedInput

F1_TAG = 1
F2_TAG = 2
_MASK128 = (1 << 128) - 1


@dataclass(frozen=True, order=True)
class CocoonIndex:
    time_period: int
    j: int

    def __post_init__(self):
        for v in (self.time_period, self.j):
            if not 0 <= v < 1 << 32:
                raise ValueError("cocoon index fields are unsigned 32-bit")

    def encode(self) -> bytes:
        return self.time_period.to_bytes(4, "big") + self.j.to_bytes(4, "big")

    @classmethod
    def decode(cls, data: bytes) -> "CocoonIndex":
        if len(data) != 8:
            raise MalformedInput("cocoon index must be 8 octets")
        return cls(int.from_bytes(data[:4], "big"), int.from_bytes(data[4:], "big"))


@dataclass(frozen=True)
class CaterpillarKeySet:
    a: int
    A: Point
    p: int
    P: Point
    ck: bytes
    ek: bytes


@dataclass(frozen=True)
class CocoonPublicPair:
    B: Point
    Q: Point
    index: CocoonIndex


@dataclass(frozen=True)
class AcaContribution:
    butterfly_public: Point
    c_ciphertext: EciesCiphertext
    index: CocoonIndex


@dataclass(frozen=True)
class ButterflyKeyPair:
    private: int
    public: Point
    index: CocoonIndex


def gen_caterpillar(rng=None, signing=None) -> CaterpillarKeySet:
    """Fresh caterpillar material. ``signing`` reuses an existing (a, A) pair,
    e.g. the enrollment key."""
    if signing is None:
        a = random_scalar(rng)
        A = scalar_mul(a, G)
    else:
        a, A = signing.private, signing.public
    p = random_scalar(rng)
    return CaterpillarKeySet(a, A, p, scalar_mul(p, G), random_key(rng), random_key(rng))


def _expand(key: bytes, i: CocoonIndex, tag: int) -> int:
    record("expansions")
    x = (i.time_period << 96) | (i.j << 64) | (tag << 32)
    out = 0
    for t in (1, 2, 3):
        xt = (x + t) & _MASK128
        y = int.from_bytes(aes_block(key, xt.to_bytes(16, "big")), "big") ^ xt
        out = (out << 128) | y
    return out % N


def expand_f1(ck: bytes, i: CocoonIndex) -> int:
    return _expand(ck, i, F1_TAG)


def expand_f2(ek: bytes, i: CocoonIndex) -> int:
    return _expand(ek, i, F2_TAG)


Expander = Callable[[bytes, CocoonIndex], int]


def cocoon_publics(
    A: Point,
    P: Point,
    ck: bytes,
    ek: bytes,
    indices: Sequence[CocoonIndex],
    *,
    f1: Expander = expand_f1,
    f2: Expander = expand_f2,
) -> list[CocoonPublicPair]:
    """``B_i = A + f1(ck, i)G`` and ``Q_i = P + f2(ek, i)G`` for each index."""
    pairs = []
    for i in indices:
        B = A + scalar_mul(f1(ck, i), G)
        Q = P + scalar_mul(f2(ek, i), G)
        pairs.append(CocoonPublicPair(B, Q, i))
    return pairs


def cocoon_privates(
    a: int,
    p: int,
    ck: bytes,
    ek: bytes,
    i: CocoonIndex,
    *,
    f1: Expander = expand_f1,
    f2: Expander = expand_f2,
) -> tuple[int, int]:
    return (a + f1(ck, i)) % N, (p + f2(ek, i)) % N


def aca_respond(cocoon: CocoonPublicPair, rng=None) -> AcaContribution:
    """Authorization-CA side: add a fresh ``c`` and encrypt it to ``Q``."""
    c = random_scalar(rng)  # never zero, so butterfly_public != B
    butterfly = cocoon.B + scalar_mul(c, G)
    ct = ecies_encrypt(cocoon.Q, scalar_to_bytes(c), rng)
    return AcaContribution(butterfly, ct, cocoon.index)


def recover_butterfly(b: int, q: int, contrib: AcaContribution) -> ButterflyKeyPair:
    """Decrypt ``c`` with ``q`` and form ``(b + c) mod n``.

    Raises TagMismatch when ``q`` is wrong and KeyMismatch when the derived
    private key does not match the advertised butterfly public key.
    """
    c = scalar_from_bytes(ecies_decrypt(q, contrib.c_ciphertext))
    priv = (b + c) % N
    if scalar_mul(priv, G) != contrib.butterfly_public:
        raise KeyMismatch("butterfly private key does not match the certificate key")
    record("butterfly_recoveries")
    return ButterflyKeyPair(priv, contrib.butterfly_public, contrib.index)
