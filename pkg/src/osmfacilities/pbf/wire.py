"""Protocol-buffer wire primitives: varints, field framing, packed arrays.

Decoding works on ``memoryview`` slices so large blobs are never copied.
Packed repeated fields are unpacked with numpy, which keeps dense-node
blocks of a few hundred thousand entries well under a second.
"""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from osmfacilities.errors import DecodeError

VARINT = 0
FIXED64 = 1
LENGTH_DELIMITED = 2
START_GROUP = 3
END_GROUP = 4
FIXED32 = 5

_U64 = 1 << 64
_I64_MAX = (1 << 63) - 1


def read_varint(buf, pos: int, end: int, field: int | None = None) -> tuple[int, int]:
    result = 0
    shift = 0
    start = pos
    while True:
        if pos >= end:
            raise DecodeError("truncated varint", start, field)
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            break
        shift += 7
        if shift >= 70:
            raise DecodeError("varint longer than 10 bytes", start, field)
    if result >= _U64:
        raise DecodeError("varint exceeds 64 bits", start, field)
    return result, pos


def as_int64(v: int) -> int:
    return v - _U64 if v > _I64_MAX else v


def unzigzag(v: int) -> int:
    return (v >> 1) ^ -(v & 1)


def iter_fields(buf, start: int = 0, end: int | None = None,
                base: int = 0) -> Iterator[tuple[int, int, object, int]]:
    """Yield ``(field_number, wire_type, value, offset)`` for one message.

    Varint values come back as ``int``; length-delimited values as
    ``memoryview`` slices of *buf*. Fixed-width values are returned raw.
    ``offset`` is ``base`` plus the position of the field key, so errors
    raised by callers can point into the enclosing file.
    """
    if end is None:
        end = len(buf)
    pos = start
    while pos < end:
        key_pos = pos
        key = buf[pos]
        if key < 0x80:
            pos += 1
        else:
            key, pos = read_varint(buf, pos, end)
        field, wire = key >> 3, key & 7
        if field == 0:
            raise DecodeError("field number 0", base + key_pos)
        if wire == VARINT:
            if pos < end and buf[pos] < 0x80:
                value = buf[pos]
                pos += 1
            else:
                value, pos = read_varint(buf, pos, end, field)
        elif wire == LENGTH_DELIMITED:
            if pos < end and buf[pos] < 0x80:
                n = buf[pos]
                pos += 1
            else:
                n, pos = read_varint(buf, pos, end, field)
            if n > end - pos:
                raise DecodeError(f"length {n} runs past end of message", base + key_pos, field)
            value = buf[pos:pos + n]
            pos += n
        elif wire == FIXED64 or wire == FIXED32:
            n = 8 if wire == FIXED64 else 4
            if n > end - pos:
                raise DecodeError("truncated fixed-width value", base + key_pos, field)
            value = buf[pos:pos + n]
            pos += n
        else:
            raise DecodeError(f"unsupported wire type {wire}", base + key_pos, field)
        yield field, wire, value, base + key_pos


def expect_wire(field: int, wire: int, expected: int, offset: int) -> None:
    if wire != expected:
        raise DecodeError(f"wire type {wire}, expected {expected}", offset, field)


def unpack_uvarints(data, field: int | None = None, offset: int = 0) -> np.ndarray:
    """Decode a packed run of unsigned varints into a ``uint64`` array."""
    b = np.frombuffer(data, dtype=np.uint8)
    if b.size == 0:
        return np.empty(0, dtype=np.uint64)
    ends = np.flatnonzero(b < 0x80)
    if ends.size == 0 or ends[-1] != b.size - 1:
        raise DecodeError("truncated packed varint", offset, field)
    if ends.size == b.size:
        return b.astype(np.uint64)
    starts = np.empty_like(ends)
    starts[0] = 0
    starts[1:] = ends[:-1] + 1
    lengths = ends - starts + 1
    if lengths.max() > 10:
        raise DecodeError("packed varint longer than 10 bytes", offset, field)
    ten = lengths == 10
    if ten.any() and (b[ends[ten]] > 1).any():
        raise DecodeError("packed varint exceeds 64 bits", offset, field)
    within = np.arange(b.size) - np.repeat(starts, lengths)
    parts = (b & 0x7F).astype(np.uint64) << (within * 7).astype(np.uint64)
    return np.add.reduceat(parts, starts)


# below this many bytes a plain loop beats numpy's per-call overhead
_SMALL = 96


def _unpack_small(data, field, offset) -> list[int]:
    out = []
    pos, end = 0, len(data)
    while pos < end:
        b = data[pos]
        if b < 0x80:
            out.append(b)
            pos += 1
        else:
            v, pos = read_varint(data, pos, end, field)
            out.append(v)
    return out


def unpack_sint64(data, field: int | None = None, offset: int = 0) -> list[int]:
    """Packed zigzag-encoded ``sint64`` values."""
    if len(data) < _SMALL:
        try:
            return [(v >> 1) ^ -(v & 1) for v in _unpack_small(data, field, offset)]
        except DecodeError as exc:
            raise DecodeError("bad packed varint", offset, field) from exc
    v = unpack_uvarints(data, field, offset)
    out = (v >> np.uint64(1)).astype(np.int64) ^ -(v & np.uint64(1)).astype(np.int64)
    return out.tolist()


def unpack_int64(data, field: int | None = None, offset: int = 0) -> list[int]:
    """Packed two's-complement ``int32``/``int64``/``uint32`` values."""
    if len(data) < _SMALL:
        try:
            return [as_int64(v) for v in _unpack_small(data, field, offset)]
        except DecodeError as exc:
            raise DecodeError("bad packed varint", offset, field) from exc
    return unpack_uvarints(data, field, offset).view(np.int64).tolist()


# -- encoding (used by the fixture writer) ---------------------------------

def encode_varint(value: int) -> bytes:
    if value < 0:
        value += _U64
    out = bytearray()
    while value >= 0x80:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    out.append(value)
    return bytes(out)


def zigzag(value: int) -> int:
    return value << 1 if value >= 0 else ((-value) << 1) - 1


def key(field: int, wire: int) -> bytes:
    return encode_varint((field << 3) | wire)


def varint_field(field: int, value: int) -> bytes:
    return key(field, VARINT) + encode_varint(value)


def bytes_field(field: int, value: bytes) -> bytes:
    return key(field, LENGTH_DELIMITED) + encode_varint(len(value)) + value


def _pack_uvarints(v: np.ndarray) -> bytes:
    groups = np.empty((v.size, 10), dtype=np.uint8)
    rest = v.copy()
    for i in range(10):
        groups[:, i] = (rest & np.uint64(0x7F)).astype(np.uint8)
        rest >>= np.uint64(7)
    nbytes = np.ones(v.size, dtype=np.int64)
    for i in range(1, 10):
        nbytes += v >= (np.uint64(1) << np.uint64(7 * i))
    col = np.arange(10)
    groups[col < (nbytes[:, None] - 1)] |= 0x80
    return groups[col < nbytes[:, None]].tobytes()


def packed_field(field: int, values, signed: bool = False) -> bytes:
    values = list(values)
    try:
        arr = np.asarray(values, dtype=np.int64)
    except OverflowError:
        arr = None
    if arr is not None and arr.size >= _SMALL:
        if signed:
            v = ((arr << np.int64(1)) ^ (arr >> np.int64(63))).view(np.uint64)
        else:
            v = arr.view(np.uint64)
        body = _pack_uvarints(v)
    elif signed:
        body = b"".join(encode_varint(zigzag(v)) for v in values)
    else:
        body = b"".join(encode_varint(v) for v in values)
    return bytes_field(field, body)
