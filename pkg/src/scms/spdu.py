"""Signed protocol data units carrying opaque BSM / SPaT payloads.

Header rules: BSM-class messages carry a generation time only; SPaT-class
messages must also carry a generation location. The signer is identified
either by the full authorization certificate or by its HashedId8 digest,
which a receiver can resolve only after it has cached the full certificate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from scms import tlv
from scms.bke import ButterflyKeyPair
from scms.certs import Certificate, Role, TrustStore, cert_digest, verify_chain
from scms.curve import EcdsaSignature, ecdsa_sign, ecdsa_verify
from scms.errors import HeaderRuleViolation, KeyCertMismatch, MalformedInput, UnknownSigner

PSID_BSM = 0x20
PSID_SPAT = 0x82


class MessageClass(enum.Enum):
    BSM = "bsm"
    SPAT = "spat"


PSID_CLASS = {PSID_BSM: MessageClass.BSM, PSID_SPAT: MessageClass.SPAT}
CLASS_PSID = {v: k for k, v in PSID_CLASS.items()}


class SignerMode(enum.Enum):
    CERTIFICATE = "certificate"
    DIGEST = "digest"


@dataclass(frozen=True)
class Location:
    latitude: int = tlv.f(tlv.SInt(4))  # 1e-7 degree
    longitude: int = tlv.f(tlv.SInt(4))  # 1e-7 degree
    elevation: int = tlv.f(tlv.SInt(4))  # 0.1 m


@dataclass(frozen=True)
class HeaderInfo:
    psid: int = tlv.f(tlv.UInt(4))
    generation_time: int = tlv.f(tlv.UInt())
    generation_location: Optional[Location] = tlv.f(tlv.Struct(Location), default=None)


@tlv.message(0x31)
@dataclass(frozen=True)
class ToBeSignedData:
    header: HeaderInfo = tlv.f(tlv.Struct(HeaderInfo))
    payload: bytes = tlv.f(tlv.Octets())


@dataclass(frozen=True)
class SignerIdentifier:
    certificate: Optional[Certificate] = tlv.f(tlv.Struct(Certificate), default=None)
    digest: Optional[bytes] = tlv.f(tlv.Octets(8), default=None)

    def __post_init__(self):
        if (self.certificate is None) == (self.digest is None):
            raise ValueError("signer identifier needs exactly one of certificate / digest")


@tlv.message(0x30)
@dataclass(frozen=True)
class Spdu:
    tbs: ToBeSignedData = tlv.f(tlv.Struct(ToBeSignedData))
    signer: SignerIdentifier = tlv.f(tlv.Struct(SignerIdentifier))
    signature: EcdsaSignature = tlv.f(tlv.SignatureCodec(), signature=True)


def payload_from_hex(text: str) -> bytes:
    """Decode a hex payload; an odd trailing nibble is padded with 0 to the octet boundary."""
    text = "".join(text.split())
    if len(text) % 2:
        text += "0"
    return bytes.fromhex(text)


def fixture_hex(name: str) -> str:
    """Verbatim hex string of a bundled payload fixture (``bsm`` or ``spat``)."""
    return resources.files("scms").joinpath("fixtures", f"{name}.hex").read_text().strip()


def make_tbs(
    payload: bytes,
    msg_class: MessageClass,
    generation_time: int,
    location: Optional[Location] = None,
    psid: Optional[int] = None,
) -> ToBeSignedData:
    psid = CLASS_PSID[msg_class] if psid is None else psid
    return ToBeSignedData(HeaderInfo(psid, generation_time, location), payload)


def check_header(header: HeaderInfo, msg_class: Optional[MessageClass] = None) -> None:
    msg_class = msg_class or PSID_CLASS.get(header.psid)
    if msg_class is MessageClass.SPAT and header.generation_location is None:
        raise HeaderRuleViolation("SPaT-class SPDU requires generation_location")
    if msg_class is MessageClass.BSM and header.generation_location is not None:
        raise HeaderRuleViolation("BSM-class SPDU must not carry generation_location")


def build_spdu(
    tbs: ToBeSignedData,
    signer_mode: SignerMode,
    ac: Certificate,
    key: ButterflyKeyPair,
    *,
    msg_class: Optional[MessageClass] = None,
    rng=None,
) -> Spdu:
    if not tbs.payload:
        raise ValueError("SPDU payload must be non-empty")
    check_header(tbs.header, msg_class)
    if key.public != ac.verify_key:
        raise KeyCertMismatch("signing key does not match the certificate")
    if signer_mode is SignerMode.CERTIFICATE:
        signer = SignerIdentifier(certificate=ac)
    else:
        signer = SignerIdentifier(digest=cert_digest(ac))
    return Spdu(tbs, signer, ecdsa_sign(key.private, tlv.encode(tbs), rng))


def verify_spdu(spdu: Spdu, store: TrustStore, at: int, *, replay_window: Optional[int] = None) -> bool:
    """Resolve the signer, check the certificate and the signature.

    A full certificate is chain-validated and then cached in ``store`` so
    later digest-mode SPDUs from the same signer resolve. An unknown digest
    raises UnknownSigner. ``replay_window`` (microseconds) is off by default.
    """
    if spdu.signer.certificate is not None:
        cert = spdu.signer.certificate
        if cert.role is not Role.AC or not verify_chain(cert, store, at):
            return False
        store.add(cert)
    else:
        cert = store.get(spdu.signer.digest)
        if cert is None:
            raise UnknownSigner(f"no certificate cached for {spdu.signer.digest.hex()}")
        if cert.role is not Role.AC or not cert.valid_at(at):
            return False
    header = spdu.tbs.header
    if cert.psids and header.psid not in cert.psids:
        return False
    if replay_window is not None and abs(header.generation_time - at) > replay_window:
        return False
    try:
        check_header(header)
    except HeaderRuleViolation:
        return False
    return ecdsa_verify(cert.verify_key, tlv.encode(spdu.tbs), spdu.signature)


def extract_payload(spdu: Spdu) -> bytes:
    return spdu.tbs.payload


def decode_spdu(data: bytes) -> Spdu:
    try:
        return tlv.decode(data, Spdu)
    except ValueError as exc:
        raise MalformedInput(str(exc)) from None
