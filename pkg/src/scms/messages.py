"""Wire messages of the enrollment and authorization flows, plus the Zip bundle.

Type tags (first octet of every encoded message):

====  =====================
0x10  Certificate
0x11  CertificateTrustList
0x20  EeEcaCertRequest
0x21  EcaEeCertResponse
0x22  EeRaCertRequest
0x23  RaEeCertAck
0x24  EeRaDownloadRequest
0x25  RaAcaCertRequest
0x26  AcaRaCertResponse
0x27  RaEeCertInfo
0x2F  ErrorResponse
0x30  Spdu
====  =====================
"""

from __future__ import annotations

import enum
import io
import re
import zipfile
from dataclasses import dataclass
from typing import Optional

from scms import tlv
from scms.bke import CocoonIndex
from scms.certs import Certificate
from scms.curve import EcdsaSignature, EciesCiphertext, Point, sha256
from scms.errors import BadArchive, CountMismatch, MalformedInput, MissingEntry, ScmsError, error_for_code

_SIG = tlv.SignatureCodec
_CERT = tlv.Struct(Certificate)


class IndexCodec:
    def encode(self, v: CocoonIndex) -> bytes:
        return v.encode()

    def decode(self, data: bytes, off: int) -> CocoonIndex:
        try:
            return CocoonIndex.decode(data)
        except MalformedInput as exc:
            raise MalformedInput(str(exc), off) from None


class AckStatus(enum.IntEnum):
    ACCEPTED = 0
    REJECTED = 1


@tlv.message(0x20)
@dataclass(frozen=True)
class EeEcaCertRequest:
    ee_id: str = tlv.f(tlv.Text())
    enrollment_public: Point = tlv.f(tlv.PointCodec())
    validity_start: int = tlv.f(tlv.UInt())
    validity_end: int = tlv.f(tlv.UInt())
    psids: list = tlv.f(tlv.ListOf(tlv.UInt(4)))
    canonical_signature: Optional[EcdsaSignature] = tlv.f(_SIG(), signature=True, default=None)


@tlv.message(0x21)
@dataclass(frozen=True)
class EcaEeCertResponse:
    enrollment_cert: Certificate = tlv.f(_CERT)
    eca_signature: Optional[EcdsaSignature] = tlv.f(_SIG(), signature=True, default=None)


@tlv.message(0x22)
@dataclass(frozen=True)
class EeRaCertRequest:
    enrollment_cert: Certificate = tlv.f(_CERT)
    A: Point = tlv.f(tlv.PointCodec())
    P: Point = tlv.f(tlv.PointCodec())
    ck: bytes = tlv.f(tlv.Octets(16))
    ek: bytes = tlv.f(tlv.Octets(16))
    psid: int = tlv.f(tlv.UInt(4))
    batch_size: int = tlv.f(tlv.UInt(4))
    time_period: int = tlv.f(tlv.UInt(4))
    enrollment_signature: Optional[EcdsaSignature] = tlv.f(_SIG(), signature=True, default=None)


@tlv.message(0x23)
@dataclass(frozen=True)
class RaEeCertAck:
    request_hash: bytes = tlv.f(tlv.Octets(32))
    status: AckStatus = tlv.f(tlv.Enum(AckStatus))
    download_ready_hint: int = tlv.f(tlv.UInt())
    reason: Optional[str] = tlv.f(tlv.Text(), default=None)
    ra_signature: Optional[EcdsaSignature] = tlv.f(_SIG(), signature=True, default=None)


@tlv.message(0x24)
@dataclass(frozen=True)
class EeRaDownloadRequest:
    request_hash: bytes = tlv.f(tlv.Octets(32))
    # HashedId8 of the downloader's enrollment certificate
    requester: bytes = tlv.f(tlv.Octets(8))
    enrollment_signature: Optional[EcdsaSignature] = tlv.f(_SIG(), signature=True, default=None)


@tlv.message(0x25)
@dataclass(frozen=True)
class RaAcaCertRequest:
    B: Point = tlv.f(tlv.PointCodec())
    Q: Point = tlv.f(tlv.PointCodec())
    index: CocoonIndex = tlv.f(IndexCodec())
    psid: int = tlv.f(tlv.UInt(4))
    validity_start: int = tlv.f(tlv.UInt())
    validity_end: int = tlv.f(tlv.UInt())
    ra_signature: Optional[EcdsaSignature] = tlv.f(_SIG(), signature=True, default=None)


@tlv.message(0x26)
@dataclass(frozen=True)
class AcaRaCertResponse:
    authorization_cert: Certificate = tlv.f(_CERT)
    c_ciphertext: EciesCiphertext = tlv.f(tlv.EciesCodec())
    index: CocoonIndex = tlv.f(IndexCodec())
    aca_signature: Optional[EcdsaSignature] = tlv.f(_SIG(), signature=True, default=None)


@tlv.message(0x27)
@dataclass(frozen=True)
class RaEeCertInfo:
    request_hash: bytes = tlv.f(tlv.Octets(32))
    batch_size: int = tlv.f(tlv.UInt(4))
    time_period: int = tlv.f(tlv.UInt(4))
    issued_at: int = tlv.f(tlv.UInt())
    ra_signature: Optional[EcdsaSignature] = tlv.f(_SIG(), signature=True, default=None)


@tlv.message(0x2F)
@dataclass(frozen=True)
class ErrorResponse:
    code: int = tlv.f(tlv.UInt(2))
    detail: str = tlv.f(tlv.Text())
    signer: bytes = tlv.f(tlv.Octets(8))
    signature: Optional[EcdsaSignature] = tlv.f(_SIG(), signature=True, default=None)

    def exception(self) -> ScmsError:
        return error_for_code(self.code)(self.detail)


def request_hash(req: EeRaCertRequest) -> bytes:
    """SHA-256 over the full signed request encoding."""
    return sha256(tlv.encode(req))


# ---------------------------------------------------------------------------
# Zip bundle
# ---------------------------------------------------------------------------

INFO_ENTRY = "info.tlv"
_RESP_RE = re.compile(r"acaresp_(0|[1-9][0-9]*)\.tlv")


def _entry(name: str) -> zipfile.ZipInfo:
    zi = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    zi.compress_type = zipfile.ZIP_STORED
    zi.create_system = 3
    zi.external_attr = 0o644 << 16
    return zi


def pack_bundle(info: RaEeCertInfo, responses: list[AcaRaCertResponse]) -> bytes:
    """Stored (uncompressed) Zip with ``info.tlv`` and ``acaresp_<k>.tlv``."""
    if not responses:
        raise ValueError("bundle needs at least one response")
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        zf.writestr(_entry(INFO_ENTRY), tlv.encode(info))
        for k, resp in enumerate(responses):
            zf.writestr(_entry(f"acaresp_{k}.tlv"), tlv.encode(resp))
    return buf.getvalue()


def unpack_bundle(data: bytes) -> tuple[RaEeCertInfo, list[AcaRaCertResponse]]:
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
        names = zf.namelist()
    except (zipfile.BadZipFile, ValueError, EOFError) as exc:
        raise BadArchive(f"not a readable Zip archive: {exc}") from None
    with zf:
        if INFO_ENTRY not in names:
            raise MissingEntry(INFO_ENTRY)
        present = set()
        for name in names:
            m = _RESP_RE.fullmatch(name)
            if m:
                present.add(int(m.group(1)))
            elif name != INFO_ENTRY:
                raise BadArchive(f"unexpected entry {name!r}")
        if len(names) != len(set(names)):
            raise BadArchive("duplicate entries")
        try:
            info = tlv.decode(zf.read(INFO_ENTRY), RaEeCertInfo)
            gap = next((k for k in range(len(present)) if k not in present), None)
            if gap is None and info.batch_size > len(present):
                gap = len(present)
            if gap is not None and gap < info.batch_size:
                raise MissingEntry(f"acaresp_{gap}.tlv")
            if len(present) != info.batch_size:
                raise CountMismatch(f"info says {info.batch_size}, archive holds {len(present)}")
            responses = [tlv.decode(zf.read(f"acaresp_{k}.tlv"), AcaRaCertResponse) for k in range(len(present))]
        except (zipfile.BadZipFile, zipfile.LargeZipFile) as exc:
            raise BadArchive(str(exc)) from None
    return info, responses
