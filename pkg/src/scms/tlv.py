"""Canonical tag-length-value encoding.

Every element is ``tag(1) || length(varint) || value``. The length is an
unsigned base-128 varint, least-significant group first, with no redundant
trailing groups. A struct value is its fields concatenated in declaration
order, field tags numbered from 1; ``None`` optional fields are omitted.
Top-level messages are wrapped in a type tag so ``decode`` can dispatch.

The decoder is strict: out-of-order or unknown tags, non-minimal varints or
integers, wrong fixed sizes and trailing octets all raise MalformedInput.
That strictness is what makes the encoding canonical.
"""

from __future__ import annotations

import dataclasses
import enum
from typing import Any

from scms.curve import EcdsaSignature, EciesCiphertext, Point, scalar_from_bytes, scalar_to_bytes
from scms.errors import MalformedInput

# ---------------------------------------------------------------------------
# varint
# ---------------------------------------------------------------------------


def encode_varint(n: int) -> bytes:
    if n < 0:
        raise ValueError("varint must be unsigned")
    out = bytearray()
    while True:
        low = n & 0x7F
        n >>= 7
        if n:
            out.append(low | 0x80)
        else:
            out.append(low)
            return bytes(out)


def decode_varint(buf: bytes, pos: int) -> tuple[int, int]:
    shift = 0
    value = 0
    start = pos
    while True:
        if pos >= len(buf):
            raise MalformedInput("truncated varint", start)
        byte = buf[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            if byte == 0 and pos - start > 1:
                raise MalformedInput("non-minimal varint", start)
            return value, pos
        shift += 7
        if shift > 63:
            raise MalformedInput("varint too long", start)


def tlv(tag: int, value: bytes) -> bytes:
    return bytes([tag]) + encode_varint(len(value)) + value


def read_tlvs(buf: bytes, base: int = 0) -> list[tuple[int, bytes, int]]:
    """Split ``buf`` into (tag, value, absolute offset) triples."""
    out = []
    pos = 0
    while pos < len(buf):
        start = pos
        tag = buf[pos]
        try:
            length, pos = decode_varint(buf, pos + 1)
        except MalformedInput as exc:
            raise MalformedInput("bad length", base + start) from exc
        if pos + length > len(buf):
            raise MalformedInput(f"truncated value for tag {tag}", base + start)
        out.append((tag, buf[pos : pos + length], base + pos))
        pos += length
    return out


# ---------------------------------------------------------------------------
# value codecs
# ---------------------------------------------------------------------------


class UInt:
    def __init__(self, max_octets: int = 8):
        self.max_octets = max_octets

    def encode(self, v: int) -> bytes:
        if v < 0 or v.bit_length() > 8 * self.max_octets:
            raise ValueError(f"unsigned value out of range: {v}")
        return v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")

    def decode(self, data: bytes, off: int) -> int:
        if not data or len(data) > self.max_octets:
            raise MalformedInput("bad integer length", off)
        if len(data) > 1 and data[0] == 0:
            raise MalformedInput("non-minimal integer", off)
        return int.from_bytes(data, "big")


class SInt:
    """Minimal two's-complement big-endian."""

    def __init__(self, max_octets: int = 8):
        self.max_octets = max_octets

    def encode(self, v: int) -> bytes:
        n = (v if v >= 0 else ~v).bit_length() // 8 + 1
        if n > self.max_octets:
            raise ValueError(f"signed value out of range: {v}")
        return v.to_bytes(n, "big", signed=True)

    def decode(self, data: bytes, off: int) -> int:
        if not data or len(data) > self.max_octets:
            raise MalformedInput("bad integer length", off)
        v = int.from_bytes(data, "big", signed=True)
        if self.encode(v) != data:
            raise MalformedInput("non-minimal integer", off)
        return v


class Enum:
    def __init__(self, cls: type[enum.IntEnum]):
        self.cls = cls

    def encode(self, v) -> bytes:
        return bytes([int(v)])

    def decode(self, data: bytes, off: int):
        if len(data) != 1:
            raise MalformedInput("bad enum length", off)
        try:
            return self.cls(data[0])
        except ValueError:
            raise MalformedInput(f"unknown {self.cls.__name__} value {data[0]}", off) from None


class Octets:
    def __init__(self, size: int | None = None):
        self.size = size

    def encode(self, v: bytes) -> bytes:
        if self.size is not None and len(v) != self.size:
            raise ValueError(f"expected {self.size} octets, got {len(v)}")
        return bytes(v)

    def decode(self, data: bytes, off: int) -> bytes:
        if self.size is not None and len(data) != self.size:
            raise MalformedInput(f"expected {self.size} octets", off)
        return bytes(data)


class Text:
    def encode(self, v: str) -> bytes:
        return v.encode("utf-8")

    def decode(self, data: bytes, off: int) -> str:
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedInput("invalid UTF-8", off) from None


class PointCodec:
    def encode(self, v: Point) -> bytes:
        return v.encode()

    def decode(self, data: bytes, off: int) -> Point:
        try:
            return Point.decode(data)
        except MalformedInput as exc:
            raise MalformedInput(str(exc), off) from None


class ScalarCodec:
    def encode(self, v: int) -> bytes:
        return scalar_to_bytes(v)

    def decode(self, data: bytes, off: int) -> int:
        try:
            return scalar_from_bytes(data)
        except MalformedInput as exc:
            raise MalformedInput(str(exc), off) from None


class SignatureCodec:
    def encode(self, v: EcdsaSignature) -> bytes:
        return v.encode()

    def decode(self, data: bytes, off: int) -> EcdsaSignature:
        try:
            return EcdsaSignature.decode(data)
        except MalformedInput as exc:
            raise MalformedInput(str(exc), off) from None


class EciesCodec:
    """ephemeral(33) || tag(16) || body, all inside one TLV value."""

    def encode(self, v: EciesCiphertext) -> bytes:
        return v.ephemeral_public.encode() + v.tag + v.body

    def decode(self, data: bytes, off: int) -> EciesCiphertext:
        if len(data) < 49:
            raise MalformedInput("ECIES ciphertext too short", off)
        # ephemeral point validity is ecies_decrypt's job (MalformedEphemeralPoint)
        x = int.from_bytes(data[1:33], "big")
        prefix = data[0]
        if prefix not in (2, 3):
            raise MalformedInput("bad ephemeral point prefix", off)
        try:
            eph = Point.decode(data[:33])
        except MalformedInput:
            eph = Point(x, prefix & 1)  # retains the octets; fails on_curve later
        return EciesCiphertext(eph, bytes(data[49:]), bytes(data[33:49]))


class Struct:
    def __init__(self, cls):
        self.cls = cls

    def encode(self, v) -> bytes:
        return encode_body(v)

    def decode(self, data: bytes, off: int):
        return decode_body(self.cls, data, off)


class ListOf:
    """Homogeneous list; each element is TLV-wrapped with tag 1."""

    def __init__(self, item):
        self.item = item

    def encode(self, v) -> bytes:
        return b"".join(tlv(1, self.item.encode(x)) for x in v)

    def decode(self, data: bytes, off: int) -> list:
        out = []
        for tag, value, voff in read_tlvs(data, off):
            if tag != 1:
                raise MalformedInput("bad list element tag", voff - 2)
            out.append(self.item.decode(value, voff))
        return out


def f(codec, *, signature: bool = False, default=dataclasses.MISSING):
    """Declare a wire field. Tags follow declaration order."""
    meta = {"codec": codec, "signature": signature}
    if default is dataclasses.MISSING:
        return dataclasses.field(metadata=meta)
    return dataclasses.field(default=default, metadata=meta)


# ---------------------------------------------------------------------------
# structs and messages
# ---------------------------------------------------------------------------


def _wire_fields(cls):
    cached = cls.__dict__.get("_wire_fields_cache")
    if cached is None:
        cached = [(i + 1, fl) for i, fl in enumerate(dataclasses.fields(cls)) if "codec" in fl.metadata]
        cls._wire_fields_cache = cached
    return cached


def encode_body(obj, *, unsigned: bool = False) -> bytes:
    parts = []
    for tag, fl in _wire_fields(type(obj)):
        if unsigned and fl.metadata["signature"]:
            continue
        v = getattr(obj, fl.name)
        if v is None:
            continue
        parts.append(tlv(tag, fl.metadata["codec"].encode(v)))
    return b"".join(parts)


def decode_body(cls, data: bytes, off: int = 0):
    fields = _wire_fields(cls)
    by_tag = dict(fields)
    values: dict[str, Any] = {}
    last = 0
    for tag, value, voff in read_tlvs(data, off):
        if tag not in by_tag:
            raise MalformedInput(f"unknown field tag {tag} in {cls.__name__}", voff)
        if tag <= last:
            raise MalformedInput(f"field tag {tag} out of order in {cls.__name__}", voff)
        last = tag
        fl = by_tag[tag]
        values[fl.name] = fl.metadata["codec"].decode(value, voff)
    for _, fl in fields:
        if fl.name not in values and fl.default is dataclasses.MISSING:
            raise MalformedInput(f"{cls.__name__}.{fl.name} missing", off)
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"invalid {cls.__name__}: {exc}", off) from None


_registry: dict[int, type] = {}


def message(type_tag: int):
    """Register a dataclass as a top-level wire message."""

    def wrap(cls):
        if type_tag in _registry:
            raise ValueError(f"type tag {type_tag:#x} already used")
        cls.TYPE_TAG = type_tag
        _registry[type_tag] = cls
        return cls

    return wrap


def encode(obj) -> bytes:
    return tlv(type(obj).TYPE_TAG, encode_body(obj))


def tbs_bytes(obj) -> bytes:
    """Encoding covered by the object's signature: everything but the signature."""
    return tlv(type(obj).TYPE_TAG, encode_body(obj, unsigned=True))


def decode(data: bytes, expect: type | None = None):
    if not data:
        raise MalformedInput("empty input", 0)
    items = read_tlvs(data)
    if len(items) != 1:
        raise MalformedInput("trailing octets after message", items[1][2] if len(items) > 1 else 0)
    tag, value, voff = items[0]
    cls = _registry.get(tag)
    if cls is None:
        raise MalformedInput(f"unknown message type {tag:#x}", 0)
    if expect is not None and cls is not expect:
        raise MalformedInput(f"expected {expect.__name__}, got {cls.__name__}", 0)
    return decode_body(cls, value, voff)


def registered_types() -> dict[int, type]:
    return dict(_registry)
