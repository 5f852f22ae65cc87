"""Canonical binary encodings.

Everything that crosses a trust boundary (wire messages, attestation
payloads, function inputs and outputs, enclave state snapshots) is encoded
with one deterministic codec so byte-for-byte reproducibility holds across
runs. Lengths are little-endian 32-bit; dictionaries are encoded with
sorted keys.
"""

from __future__ import annotations

import struct

_U32 = struct.Struct("<I")
_I64 = struct.Struct("<q")

MAX_VALUE_DEPTH = 32


class CodecError(ValueError):
    pass


def pack_bytes(b: bytes) -> bytes:
    return _U32.pack(len(b)) + b


def unpack_bytes(buf: bytes, offset: int) -> tuple[bytes, int]:
    if offset + 4 > len(buf):
        raise CodecError("truncated length prefix")
    (n,) = _U32.unpack_from(buf, offset)
    offset += 4
    if offset + n > len(buf):
        raise CodecError("truncated field")
    return buf[offset:offset + n], offset + n


def encode_int(value: int) -> bytes:
    """ASCII-decimal integer encoding used for data payloads."""
    return str(int(value)).encode("ascii")


def decode_int(data: bytes) -> int:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise CodecError("non-ascii integer payload") from exc
    if not text or not (text.lstrip("-").isdigit()):
        raise CodecError(f"not an integer payload: {text!r}")
    return int(text)


def encode_value(value: object, _depth: int = 0) -> bytes:
    """Canonical encoding of nested ints / bytes / str / bool / None / list / dict."""
    if _depth > MAX_VALUE_DEPTH:
        raise CodecError("value too deeply nested")
    if value is None:
        return b"n"
    if value is True:
        return b"t"
    if value is False:
        return b"f"
    if isinstance(value, int):
        return b"i" + _I64.pack(value)
    if isinstance(value, (bytes, bytearray)):
        return b"b" + pack_bytes(bytes(value))
    if isinstance(value, str):
        return b"s" + pack_bytes(value.encode("utf-8"))
    if isinstance(value, (list, tuple)):
        parts = [b"l", _U32.pack(len(value))]
        for item in value:
            parts.append(encode_value(item, _depth + 1))
        return b"".join(parts)
    if isinstance(value, dict):
        keys = sorted(value.keys())
        if any(not isinstance(k, str) for k in keys):
            raise CodecError("dict keys must be strings")
        parts = [b"d", _U32.pack(len(keys))]
        for k in keys:
            parts.append(pack_bytes(k.encode("utf-8")))
            parts.append(encode_value(value[k], _depth + 1))
        return b"".join(parts)
    raise CodecError(f"unencodable type: {type(value).__name__}")


def decode_value(buf: bytes) -> object:
    value, offset = _decode_at(buf, 0, 0)
    if offset != len(buf):
        raise CodecError("trailing bytes after value")
    return value


def _decode_at(buf: bytes, offset: int, depth: int) -> tuple[object, int]:
    if depth > MAX_VALUE_DEPTH:
        raise CodecError("value too deeply nested")
    if offset >= len(buf):
        raise CodecError("truncated value")
    tag = buf[offset:offset + 1]
    offset += 1
    if tag == b"n":
        return None, offset
    if tag == b"t":
        return True, offset
    if tag == b"f":
        return False, offset
    if tag == b"i":
        if offset + 8 > len(buf):
            raise CodecError("truncated integer")
        (v,) = _I64.unpack_from(buf, offset)
        return v, offset + 8
    if tag == b"b":
        return unpack_bytes(buf, offset)
    if tag == b"s":
        raw, offset = unpack_bytes(buf, offset)
        return raw.decode("utf-8"), offset
    if tag == b"l":
        if offset + 4 > len(buf):
            raise CodecError("truncated list header")
        (n,) = _U32.unpack_from(buf, offset)
        offset += 4
        items = []
        for _ in range(n):
            item, offset = _decode_at(buf, offset, depth + 1)
            items.append(item)
        return items, offset
    if tag == b"d":
        if offset + 4 > len(buf):
            raise CodecError("truncated dict header")
        (n,) = _U32.unpack_from(buf, offset)
        offset += 4
        out: dict[str, object] = {}
        for _ in range(n):
            key_raw, offset = unpack_bytes(buf, offset)
            value, offset = _decode_at(buf, offset, depth + 1)
            out[key_raw.decode("utf-8")] = value
        return out, offset
    raise CodecError(f"unknown tag {tag!r}")
