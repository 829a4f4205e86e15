"""Explicit-key certificates, chain validation and the certificate trust list.

Issuance follows a fixed hierarchy::

    RCA -> ICA -> {ECA, ACA, RA}
    ECA -> EC
    ACA -> AC

Roots and electors are self-signed. A chain is trusted only when it ends in
a root whose digest appears on an elector-signed trust list.
"""

from __future__ import annotations

import datetime as _dt
import enum
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from scms import tlv
from scms.curve import EcdsaSignature, KeyPair, Point, ecdsa_sign, ecdsa_verify, sha256
from scms.errors import (
    InsufficientElectors,
    MalformedInput,
    MissingIssuer,
    RoleViolation,
    ValidityViolation,
)

EPOCH = _dt.datetime(2004, 1, 1, tzinfo=_dt.timezone.utc)
SECOND = 1_000_000
HOUR = 3600 * SECOND
DAY = 24 * HOUR
WEEK = 7 * DAY
YEAR = 365 * DAY

MAX_CHAIN_DEPTH = 8


def time64(when: Optional[_dt.datetime] = None) -> int:
    """Microseconds since 2004-01-01T00:00:00Z (now if ``when`` is None)."""
    when = when or _dt.datetime.now(_dt.timezone.utc)
    delta = when - EPOCH
    return (delta.days * 86400 + delta.seconds) * SECOND + delta.microseconds


def time64_to_datetime(t: int) -> _dt.datetime:
    return EPOCH + _dt.timedelta(microseconds=t)


class Role(enum.IntEnum):
    RCA = 1
    ICA = 2
    ECA = 3
    ACA = 4
    RA = 5
    EC = 6
    AC = 7
    ELECTOR = 8


SELF_SIGNED_ROLES = frozenset({Role.RCA, Role.ELECTOR})

# issuer role -> subject roles it may certify
ISSUES = {
    Role.RCA: frozenset({Role.ICA}),
    Role.ICA: frozenset({Role.ECA, Role.ACA, Role.RA}),
    Role.ECA: frozenset({Role.EC}),
    Role.ACA: frozenset({Role.AC}),
}


@tlv.message(0x10)
@dataclass(frozen=True)
class Certificate:
    subject_name: str = tlv.f(tlv.Text())
    role: Role = tlv.f(tlv.Enum(Role))
    validity_start: int = tlv.f(tlv.UInt())
    validity_end: int = tlv.f(tlv.UInt())
    psids: list = tlv.f(tlv.ListOf(tlv.UInt(4)))
    verify_key: Point = tlv.f(tlv.PointCodec())
    # None marks a self-signed certificate
    issuer: Optional[bytes] = tlv.f(tlv.Octets(8), default=None)
    signature: Optional[EcdsaSignature] = tlv.f(tlv.SignatureCodec(), signature=True, default=None)

    def valid_at(self, at: int) -> bool:
        return self.validity_start <= at < self.validity_end

    @property
    def self_signed(self) -> bool:
        return self.issuer is None


def cert_digest(cert: Certificate) -> bytes:
    """HashedId8: the low-order 8 octets of SHA-256 over the encoding."""
    return sha256(tlv.encode(cert))[-8:]


def issue_cert(
    issuer: Optional[Certificate],
    issuer_key: KeyPair,
    *,
    subject_name: str,
    role: Role,
    validity: tuple[int, int],
    psids: Iterable[int] = (),
    verify_key: Point,
    rng=None,
) -> Certificate:
    """Sign a new certificate. ``issuer=None`` produces a self-signed root."""
    start, end = validity
    if start >= end:
        raise ValidityViolation("validity start must precede end")
    if issuer is None:
        if role not in SELF_SIGNED_ROLES:
            raise RoleViolation(f"{role.name} cannot be self-signed")
        if verify_key != issuer_key.public:
            raise RoleViolation("self-signed certificate must carry the signing key")
        issuer_digest = None
    else:
        if role not in ISSUES.get(issuer.role, ()):
            raise RoleViolation(f"{issuer.role.name} may not issue {role.name}")
        if not (issuer.validity_start <= start and end <= issuer.validity_end):
            raise ValidityViolation("subject validity exceeds issuer validity")
        if issuer.verify_key != issuer_key.public:
            raise RoleViolation("issuer key does not match issuer certificate")
        issuer_digest = cert_digest(issuer)
    cert = Certificate(
        subject_name=subject_name,
        role=role,
        validity_start=start,
        validity_end=end,
        psids=list(psids),
        verify_key=verify_key,
        issuer=issuer_digest,
    )
    return replace(cert, signature=ecdsa_sign(issuer_key.private, tlv.tbs_bytes(cert), rng))


def cert_signature_ok(cert: Certificate, signer_key: Point) -> bool:
    return cert.signature is not None and ecdsa_verify(signer_key, tlv.tbs_bytes(cert), cert.signature)


# ---------------------------------------------------------------------------
# certificate trust list
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ElectorSignature:
    elector: bytes = tlv.f(tlv.Octets(8))
    signature: EcdsaSignature = tlv.f(tlv.SignatureCodec())


@tlv.message(0x11)
@dataclass(frozen=True)
class CertificateTrustList:
    version: int = tlv.f(tlv.UInt())
    root_digests: list = tlv.f(tlv.ListOf(tlv.Octets(8)))
    elector_signatures: list = tlv.f(tlv.ListOf(tlv.Struct(ElectorSignature)), signature=True, default=None)


def build_ctl(
    roots: Iterable[Certificate],
    electors: list[tuple[KeyPair, Certificate]],
    quorum: int = 2,
    version: int = 1,
    rng=None,
) -> CertificateTrustList:
    if len(electors) < quorum:
        raise InsufficientElectors(f"{len(electors)} electors for quorum {quorum}")
    ctl = CertificateTrustList(version=version, root_digests=[cert_digest(r) for r in roots])
    body = tlv.tbs_bytes(ctl)
    sigs = [ElectorSignature(cert_digest(cert), ecdsa_sign(key.private, body, rng)) for key, cert in electors]
    return replace(ctl, elector_signatures=sigs)


def verify_ctl(ctl: CertificateTrustList, electors: Iterable[Certificate], quorum: int = 2) -> bool:
    """True when at least ``quorum`` distinct known electors signed ``ctl``."""
    known = {cert_digest(c): c for c in electors if c.role is Role.ELECTOR}
    body = tlv.tbs_bytes(ctl)
    good = set()
    for es in ctl.elector_signatures or ():
        cert = known.get(es.elector)
        if cert is not None and es.elector not in good and ecdsa_verify(cert.verify_key, body, es.signature):
            good.add(es.elector)
    return len(good) >= quorum


@dataclass
class TrustStore:
    """Trust anchor (the CTL) plus certificates cached by HashedId8."""

    ctl: CertificateTrustList
    certs: dict = field(default_factory=dict)

    def add(self, cert: Certificate) -> bytes:
        digest = cert_digest(cert)
        have = self.certs.get(digest)
        if have is not None and have != cert:
            raise MalformedInput(f"HashedId8 collision on {digest.hex()}")
        self.certs[digest] = cert
        return digest

    def get(self, digest: bytes) -> Optional[Certificate]:
        return self.certs.get(digest)

    def __contains__(self, digest: bytes) -> bool:
        return digest in self.certs

    def copy(self) -> "TrustStore":
        return TrustStore(self.ctl, dict(self.certs))

    def save(self, directory: Path) -> None:
        """One ``<HashedId8 hex>.cert`` file per certificate plus ``ctl.tlv``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "ctl.tlv").write_bytes(tlv.encode(self.ctl))
        for digest, cert in self.certs.items():
            (directory / f"{digest.hex()}.cert").write_bytes(tlv.encode(cert))

    @classmethod
    def load(cls, directory: Path) -> "TrustStore":
        directory = Path(directory)
        store = cls(tlv.decode((directory / "ctl.tlv").read_bytes(), CertificateTrustList))
        for path in sorted(directory.glob("*.cert")):
            store.add(tlv.decode(path.read_bytes(), Certificate))
        return store


def verify_chain(cert: Certificate, store: TrustStore, at: int) -> bool:
    """Walk issuer links up to a CTL-listed root.

    Returns False on any cryptographic, role or validity failure and raises
    MissingIssuer when an issuer digest cannot be resolved from ``store``.
    """
    current = cert
    for _ in range(MAX_CHAIN_DEPTH):
        if current.signature is None or not current.valid_at(at):
            return False
        if current.self_signed:
            return (
                current.role is Role.RCA
                and cert_signature_ok(current, current.verify_key)
                and cert_digest(current) in set(store.ctl.root_digests)
            )
        parent = store.get(current.issuer)
        if parent is None:
            raise MissingIssuer(f"issuer {current.issuer.hex()} not in trust store")
        if current.role not in ISSUES.get(parent.role, ()):
            return False
        if not cert_signature_ok(current, parent.verify_key):
            return False
        current = parent
    return False
