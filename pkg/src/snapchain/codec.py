"""Deterministic binary framing and hashing.

Everything the chain hashes, signs, stores, or ships is serialized the same
way: fields in declared order, each as a 4-byte big-endian length prefix
followed by the raw field bytes; integers as 8-byte big-endian. Free-form
values (chaincode arguments, stored records) use a type-tagged variant of the
same framing so they round-trip without a schema.

The digest is SHA-256 throughout; changing it invalidates the golden values
pinned in the test fixtures.
"""

from __future__ import annotations

import hashlib
import struct

ZERO_HASH = b"\x00" * 32


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def u32(n: int) -> bytes:
    return struct.pack(">I", n)


def u64(n: int) -> bytes:
    return struct.pack(">Q", n)


def i64(n: int) -> bytes:
    return struct.pack(">q", n)


def lp(data: bytes) -> bytes:
    """Length-prefix a byte string."""
    return struct.pack(">I", len(data)) + data


def lp_str(s: str) -> bytes:
    return lp(s.encode("utf-8"))


def lp_int(n: int) -> bytes:
    return lp(u64(n))


class DecodeError(ValueError):
    pass


class Reader:
    """Cursor over an encoded buffer; every read checks bounds."""

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated input")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack(">q", self.take(8))[0]

    def lp(self) -> bytes:
        return self.take(self.u32())

    def lp_str(self) -> str:
        return self.lp().decode("utf-8")

    def lp_int(self) -> int:
        raw = self.lp()
        if len(raw) != 8:
            raise DecodeError("integer field must be 8 bytes")
        return struct.unpack(">Q", raw)[0]

    def done(self) -> bool:
        return self.pos == len(self.data)


# Type-tagged value codec. Dict keys must be strings and are sorted by their
# UTF-8 bytes, which makes the encoding canonical for any supported value.

_TAG_NONE = b"N"
_TAG_TRUE = b"T"
_TAG_FALSE = b"F"
_TAG_INT = b"I"
_TAG_STR = b"S"
_TAG_BYTES = b"B"
_TAG_LIST = b"L"
_TAG_DICT = b"D"


def encode_value(value) -> bytes:
    if value is None:
        return _TAG_NONE
    if value is True:
        return _TAG_TRUE
    if value is False:
        return _TAG_FALSE
    if isinstance(value, int):
        return _TAG_INT + i64(value)
    if isinstance(value, str):
        return _TAG_STR + lp(value.encode("utf-8"))
    if isinstance(value, (bytes, bytearray)):
        return _TAG_BYTES + lp(bytes(value))
    if isinstance(value, (list, tuple)):
        parts = [_TAG_LIST, u32(len(value))]
        parts.extend(encode_value(item) for item in value)
        return b"".join(parts)
    if isinstance(value, dict):
        keys = sorted(value.keys())
        parts = [_TAG_DICT, u32(len(keys))]
        for key in keys:
            if not isinstance(key, str):
                raise TypeError(f"dict keys must be str, got {type(key).__name__}")
            parts.append(lp(key.encode("utf-8")))
            parts.append(encode_value(value[key]))
        return b"".join(parts)
    raise TypeError(f"cannot encode {type(value).__name__}")


def _decode_value(r: Reader):
    tag = r.take(1)
    if tag == _TAG_NONE:
        return None
    if tag == _TAG_TRUE:
        return True
    if tag == _TAG_FALSE:
        return False
    if tag == _TAG_INT:
        return r.i64()
    if tag == _TAG_STR:
        return r.lp().decode("utf-8")
    if tag == _TAG_BYTES:
        return r.lp()
    if tag == _TAG_LIST:
        count = r.u32()
        return [_decode_value(r) for _ in range(count)]
    if tag == _TAG_DICT:
        count = r.u32()
        out = {}
        for _ in range(count):
            key = r.lp().decode("utf-8")
            out[key] = _decode_value(r)
        return out
    raise DecodeError(f"unknown value tag {tag!r}")


def decode_value(data: bytes):
    r = Reader(data)
    value = _decode_value(r)
    if not r.done():
        raise DecodeError("trailing bytes after value")
    return value
