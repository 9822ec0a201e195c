"""Minimal PBF writer used to build test fixtures and the demo extract.

Only what the reader understands is emitted: a header blob, then data
blobs whose groups hold dense nodes (or plain nodes), ways and relations.
Consecutive elements of the same kind share a group, so decoding returns
elements in exactly the order they were written.
"""

from __future__ import annotations

import struct
import zlib
from collections.abc import Iterable, Sequence
from typing import BinaryIO

from osmfacilities.pbf.elements import ElementKind, RawElement, delta_encode
from osmfacilities.pbf.wire import bytes_field, packed_field, varint_field, zigzag

_MEMBER_CODES = {ElementKind.NODE: 0, ElementKind.WAY: 1, ElementKind.RELATION: 2}


class _StringTable:
    def __init__(self):
        self.strings = [""]
        self.index = {"": 0}

    def __call__(self, s: str) -> int:
        i = self.index.get(s)
        if i is None:
            i = self.index[s] = len(self.strings)
            self.strings.append(s)
        return i

    def encode(self) -> bytes:
        return b"".join(bytes_field(1, s.encode("utf-8")) for s in self.strings)


def frame(header_type: str, payload: bytes, compress: bool = True,
          declared_raw_size: int | None = None) -> bytes:
    """One framed blob. *declared_raw_size* overrides the true size (for tests)."""
    raw_size = len(payload) if declared_raw_size is None else declared_raw_size
    if compress:
        blob = varint_field(2, raw_size) + bytes_field(3, zlib.compress(payload, 6))
    else:
        blob = bytes_field(1, payload)
        if declared_raw_size is not None:
            blob += varint_field(2, raw_size)
    header = bytes_field(1, header_type.encode("utf-8")) + varint_field(3, len(blob))
    return struct.pack(">I", len(header)) + header + blob


def header_block(program: str = "osmfacilities-fixture") -> bytes:
    return (bytes_field(4, b"OsmSchema-V0.6") + bytes_field(4, b"DenseNodes")
            + bytes_field(16, program.encode("utf-8")))


def _raw(deg: float, granularity: int, offset: int) -> int:
    return round((deg * 1e9 - offset) / granularity)


def _dense(nodes: Sequence[RawElement], st: _StringTable, gran, lat0, lon0) -> bytes:
    ids = [n.id for n in nodes]
    lats = [_raw(n.lat, gran, lat0) for n in nodes]
    lons = [_raw(n.lon, gran, lon0) for n in nodes]
    body = (packed_field(1, delta_encode(ids), signed=True)
            + packed_field(8, delta_encode(lats), signed=True)
            + packed_field(9, delta_encode(lons), signed=True))
    if any(n.tags for n in nodes):
        kv = []
        for n in nodes:
            for k, v in n.tags.items():
                kv += (st(k), st(v))
            kv.append(0)
        body += packed_field(10, kv)
    return bytes_field(2, body)


def _plain_node(n: RawElement, st: _StringTable, gran, lat0, lon0) -> bytes:
    body = (varint_field(1, zigzag(n.id))
            + packed_field(2, [st(k) for k in n.tags])
            + packed_field(3, [st(v) for v in n.tags.values()])
            + varint_field(8, zigzag(_raw(n.lat, gran, lat0)))
            + varint_field(9, zigzag(_raw(n.lon, gran, lon0))))
    return bytes_field(1, body)


def _way(w: RawElement, st: _StringTable) -> bytes:
    body = (varint_field(1, w.id)
            + packed_field(2, [st(k) for k in w.tags])
            + packed_field(3, [st(v) for v in w.tags.values()])
            + packed_field(8, delta_encode(list(w.refs)), signed=True))
    return bytes_field(3, body)


def _relation(r: RawElement, st: _StringTable) -> bytes:
    body = (varint_field(1, r.id)
            + packed_field(2, [st(k) for k in r.tags])
            + packed_field(3, [st(v) for v in r.tags.values()])
            + packed_field(8, [st(m.role) for m in r.members])
            + packed_field(9, delta_encode([m.ref for m in r.members]), signed=True)
            + packed_field(10, [_MEMBER_CODES[m.kind] for m in r.members]))
    return bytes_field(4, body)


def primitive_block(elements: Sequence[RawElement], granularity: int = 100,
                    lat_offset: int = 0, lon_offset: int = 0, dense: bool = True,
                    write_granularity: bool = True) -> bytes:
    if any("" in e.tags for e in elements):
        # string index 0 is the dense-node tag separator, so "" cannot be a key
        raise ValueError("empty tag keys cannot be encoded")
    st = _StringTable()
    groups = []
    i = 0
    while i < len(elements):
        kind = elements[i].kind
        j = i
        while j < len(elements) and elements[j].kind is kind:
            j += 1
        run = elements[i:j]
        if kind is ElementKind.NODE:
            if dense:
                body = _dense(run, st, granularity, lat_offset, lon_offset)
            else:
                body = b"".join(_plain_node(n, st, granularity, lat_offset, lon_offset)
                                for n in run)
        elif kind is ElementKind.WAY:
            body = b"".join(_way(w, st) for w in run)
        else:
            body = b"".join(_relation(r, st) for r in run)
        groups.append(bytes_field(2, body))
        i = j
    out = bytes_field(1, st.encode()) + b"".join(groups)
    if write_granularity:
        out += varint_field(17, granularity)
    if lat_offset:
        out += varint_field(19, lat_offset if lat_offset >= 0 else lat_offset + (1 << 64))
    if lon_offset:
        out += varint_field(20, lon_offset if lon_offset >= 0 else lon_offset + (1 << 64))
    return out


def encode_pbf(elements: Iterable[RawElement], compress: bool = True, block_size: int = 8000,
               granularity: int = 100, dense: bool = True) -> bytes:
    parts = [frame("OSMHeader", header_block(), compress)]
    elements = list(elements)
    for start in range(0, len(elements), block_size):
        block = primitive_block(elements[start:start + block_size], granularity, dense=dense)
        parts.append(frame("OSMData", block, compress))
    return b"".join(parts)


def write_pbf(stream: BinaryIO, elements: Iterable[RawElement], **kwargs) -> int:
    data = encode_pbf(elements, **kwargs)
    stream.write(data)
    return len(data)
