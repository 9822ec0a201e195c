"""Streaming reader for ``.osm.pbf`` files.

A file is a sequence of frames: a 4-byte big-endian header length, a
``BlobHeader`` message and a ``Blob`` message. ``OSMData`` blobs hold
``PrimitiveBlock`` messages whose strings live in a per-block table.
Framing is sequential; inflating and decoding a blob is independent of
every other blob, so :func:`iter_elements` can fan blocks out to a thread
pool and still emit elements in file order.
"""

from __future__ import annotations

import logging
import struct
import zlib
from collections import Counter
from collections.abc import Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from osmfacilities.errors import (DecodeError, IntegrityError, InvariantViolation, PbfError,
                                  UnsupportedCompression)
from osmfacilities.pbf.elements import ElementKind, Member, RawElement, delta_decode, to_degrees
from osmfacilities.pbf.wire import (LENGTH_DELIMITED, VARINT, as_int64, expect_wire, iter_fields,
                                    unpack_int64, unpack_sint64, unzigzag)

log = logging.getLogger(__name__)

HEADER_TYPES = ("OSMHeader", "OSMData")
MAX_BLOB_HEADER_SIZE = 64 * 1024
MAX_BLOB_SIZE = 32 * 1024 * 1024
SUPPORTED_FEATURES = {"OsmSchema-V0.6", "DenseNodes"}

_COMPRESSION_FIELDS = {4: "lzma", 5: "bzip2", 6: "lz4", 7: "zstd"}
_MEMBER_KINDS = (ElementKind.NODE, ElementKind.WAY, ElementKind.RELATION)


@dataclass(frozen=True)
class BlobFrame:
    header_type: str
    payload: bytes
    declared_raw_size: int | None = None
    offset: int = 0


@dataclass
class PrimitiveGroup:
    nodes: list = field(default_factory=list)
    dense: list = field(default_factory=list)
    ways: list = field(default_factory=list)
    relations: list = field(default_factory=list)
    offset: int = 0


@dataclass
class PrimitiveBlockView:
    string_table: list[str]
    granularity: int = 100
    lat_offset: int = 0
    lon_offset: int = 0
    groups: list[PrimitiveGroup] = field(default_factory=list)

    def string(self, index: int, offset: int = 0) -> str:
        if index < 0 or index >= len(self.string_table):
            raise DecodeError(
                f"string index {index} outside table of {len(self.string_table)}", offset)
        return self.string_table[index]


@dataclass(frozen=True)
class HeaderInfo:
    required_features: tuple[str, ...] = ()
    optional_features: tuple[str, ...] = ()
    writing_program: str = ""


# -- framing ---------------------------------------------------------------

def _read_exact(stream: BinaryIO, n: int, offset: int, what: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise DecodeError(f"truncated stream reading {what}: wanted {n} bytes, got {len(data)}",
                          offset)
    return data


def _decode_utf8(data, offset: int, field_no: int | None = None) -> str:
    try:
        return bytes(data).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"invalid UTF-8: {exc.reason}", offset, field_no) from None


def read_raw_frames(stream: BinaryIO) -> Iterator[tuple[str, bytes, int]]:
    """Split *stream* into ``(header_type, blob_bytes, offset)`` without inflating."""
    offset = 0
    while True:
        prefix = stream.read(4)
        if not prefix:
            return
        if len(prefix) != 4:
            raise DecodeError("truncated stream in frame length", offset)
        (header_len,) = struct.unpack(">I", prefix)
        if header_len > MAX_BLOB_HEADER_SIZE:
            raise DecodeError(f"blob header size {header_len} exceeds limit", offset)
        header = _read_exact(stream, header_len, offset + 4, "blob header")
        header_type = None
        datasize = None
        for fno, wire, value, foff in iter_fields(header, base=offset + 4):
            if fno == 1:
                expect_wire(fno, wire, LENGTH_DELIMITED, foff)
                header_type = _decode_utf8(value, foff, fno)
            elif fno == 3:
                expect_wire(fno, wire, VARINT, foff)
                datasize = as_int64(value)
        if header_type is None or datasize is None:
            raise DecodeError("blob header missing type or datasize", offset + 4)
        if not 0 <= datasize <= MAX_BLOB_SIZE:
            raise DecodeError(f"blob size {datasize} outside [0, {MAX_BLOB_SIZE}]", offset + 4)
        blob_offset = offset + 4 + header_len
        blob = _read_exact(stream, datasize, blob_offset, "blob")
        yield header_type, blob, blob_offset
        offset = blob_offset + datasize


def inflate_blob(header_type: str, blob: bytes, offset: int = 0) -> BlobFrame:
    raw = None
    raw_size = None
    compressed = None
    for fno, wire, value, foff in iter_fields(blob, base=offset):
        if fno == 1:
            expect_wire(fno, wire, LENGTH_DELIMITED, foff)
            raw = bytes(value)
        elif fno == 2:
            expect_wire(fno, wire, VARINT, foff)
            raw_size = as_int64(value)
        elif fno == 3:
            expect_wire(fno, wire, LENGTH_DELIMITED, foff)
            compressed = value
        elif fno in _COMPRESSION_FIELDS:
            raise UnsupportedCompression(_COMPRESSION_FIELDS[fno])
    if raw_size is not None and not 0 <= raw_size <= MAX_BLOB_SIZE:
        raise IntegrityError(f"declared raw size {raw_size} outside [0, {MAX_BLOB_SIZE}]")
    if raw is not None:
        payload = raw
    elif compressed is not None:
        limit = MAX_BLOB_SIZE if raw_size is None else raw_size
        inflater = zlib.decompressobj()
        try:
            payload = inflater.decompress(bytes(compressed), limit + 1)
        except zlib.error as exc:
            raise DecodeError(f"zlib: {exc}", offset) from None
        if len(payload) > limit:
            raise IntegrityError(f"inflated payload exceeds declared raw size {limit}")
        if not inflater.eof:
            raise DecodeError("truncated zlib stream", offset)
    else:
        raise DecodeError("blob carries no data", offset)
    if raw_size is not None and len(payload) != raw_size:
        raise IntegrityError(
            f"blob at offset {offset}: declared raw size {raw_size}, got {len(payload)} bytes")
    return BlobFrame(header_type, payload, raw_size, offset)


def read_blob_frames(stream: BinaryIO, counters: Counter | None = None) -> Iterator[BlobFrame]:
    """Yield inflated frames in file order, skipping unknown header types."""
    for header_type, blob, offset in read_raw_frames(stream):
        if header_type not in HEADER_TYPES:
            log.warning("skipping blob of unknown type %r at offset %d", header_type, offset)
            if counters is not None:
                counters["unknown_blob_type"] += 1
            continue
        yield inflate_blob(header_type, blob, offset)


# -- blocks ----------------------------------------------------------------

def decode_header_block(payload) -> HeaderInfo:
    required, optional, program = [], [], ""
    for fno, wire, value, foff in iter_fields(memoryview(payload)):
        if fno in (4, 5, 16):
            expect_wire(fno, wire, LENGTH_DELIMITED, foff)
            text = _decode_utf8(value, foff, fno)
            if fno == 4:
                required.append(text)
            elif fno == 5:
                optional.append(text)
            else:
                program = text
    return HeaderInfo(tuple(required), tuple(optional), program)


def decode_primitive_block(payload) -> PrimitiveBlockView:
    buf = memoryview(payload)
    strings = None
    granularity, lat_offset, lon_offset = 100, 0, 0
    groups = []
    for fno, wire, value, foff in iter_fields(buf):
        if fno == 1:
            expect_wire(fno, wire, LENGTH_DELIMITED, foff)
            strings = []
            for sno, swire, svalue, soff in iter_fields(value, base=foff):
                if sno == 1:
                    expect_wire(sno, swire, LENGTH_DELIMITED, soff)
                    strings.append(_decode_utf8(svalue, soff, sno))
        elif fno == 2:
            expect_wire(fno, wire, LENGTH_DELIMITED, foff)
            groups.append(_decode_group(value, foff))
        elif fno == 17:
            expect_wire(fno, wire, VARINT, foff)
            granularity = as_int64(value)
        elif fno == 19:
            expect_wire(fno, wire, VARINT, foff)
            lat_offset = as_int64(value)
        elif fno == 20:
            expect_wire(fno, wire, VARINT, foff)
            lon_offset = as_int64(value)
    if not strings:
        strings = [""]
    if strings[0] != "":
        raise InvariantViolation(f"string table entry 0 must be empty, got {strings[0]!r}")
    if granularity <= 0:
        raise InvariantViolation(f"granularity must be positive, got {granularity}")
    return PrimitiveBlockView(strings, granularity, lat_offset, lon_offset, groups)


def _decode_group(buf, base: int) -> PrimitiveGroup:
    group = PrimitiveGroup(offset=base)
    slots = {1: group.nodes, 2: group.dense, 3: group.ways, 4: group.relations}
    for fno, wire, value, foff in iter_fields(buf, base=base):
        if fno in slots:
            expect_wire(fno, wire, LENGTH_DELIMITED, foff)
            slots[fno].append((value, foff))
    return group


def _deltas(values: list[int], what: str, offset: int) -> list[int]:
    try:
        return delta_decode(values)
    except OverflowError:
        raise DecodeError(f"{what} delta sum overflows int64", offset) from None


def _tag_map(keys: list[int], vals: list[int], block: PrimitiveBlockView,
             offset: int) -> dict[str, str]:
    if len(keys) != len(vals):
        raise DecodeError(f"{len(keys)} keys but {len(vals)} values", offset)
    tags = {}
    for k, v in zip(keys, vals):
        key = block.string(k, offset)
        if key in tags:
            raise InvariantViolation(f"duplicate tag key {key!r} at offset {offset}")
        tags[key] = block.string(v, offset)
    return tags


def _coords(raw: list[int], granularity: int, offset: int) -> list[float]:
    arr = np.asarray(raw, dtype=np.int64)
    return ((arr * granularity + offset) / 1e9).tolist()


def decode_dense_nodes(group, block: PrimitiveBlockView, node_index: dict | None = None,
                       keep_untagged: bool = True) -> list[RawElement]:
    """Decode one ``DenseNodes`` message (bytes, or ``(bytes, offset)``).

    With ``keep_untagged=False`` only tagged nodes become elements; every
    node still lands in *node_index*.
    """
    data, base = group if isinstance(group, tuple) else (group, 0)
    ids, lats, lons, kv = [], [], [], []
    for fno, wire, value, foff in iter_fields(memoryview(data), base=base):
        if fno in (1, 8, 9, 10):
            expect_wire(fno, wire, LENGTH_DELIMITED, foff)
            if fno == 10:
                kv = unpack_int64(value, fno, foff)
            else:
                arr = unpack_sint64(value, fno, foff)
                if fno == 1:
                    ids = arr
                elif fno == 8:
                    lats = arr
                else:
                    lons = arr
    if not len(ids) == len(lats) == len(lons):
        raise DecodeError(
            f"dense arrays disagree: {len(ids)} ids, {len(lats)} lats, {len(lons)} lons", base)
    ids = _deltas(ids, "dense id", base)
    lats = _coord_deltas(lats, block.granularity, block.lat_offset, base)
    lons = _coord_deltas(lons, block.granularity, block.lon_offset, base)
    if node_index is not None:
        node_index.update(zip(ids, zip(lats, lons)))

    strings = block.string_table
    nstr = len(strings)
    n_kv = len(kv)
    pos = 0
    out = []
    node = ElementKind.NODE
    for i, node_id in enumerate(ids):
        tags = {}
        if n_kv:
            while True:
                if pos >= n_kv:
                    raise DecodeError(f"key/value stream exhausted at node {i} of {len(ids)}",
                                      base, 10)
                k = kv[pos]
                pos += 1
                if k == 0:
                    break
                if pos >= n_kv:
                    raise DecodeError("key without value in key/value stream", base, 10)
                v = kv[pos]
                pos += 1
                if not (0 < k < nstr and 0 <= v < nstr):
                    raise DecodeError(f"string index {max(k, v)} outside table of {nstr}",
                                      base, 10)
                key = strings[k]
                if key in tags:
                    raise InvariantViolation(f"duplicate tag key {key!r} on node {node_id}")
                tags[key] = strings[v]
        if tags or keep_untagged:
            out.append(RawElement(node_id, node, tags, lats[i], lons[i]))
    return out


def _coord_deltas(deltas: list[int], granularity: int, offset: int, base: int) -> list[float]:
    raw = _deltas(deltas, "dense coordinate", base)
    if raw and max(abs(raw[0]), abs(raw[-1]), max(raw), -min(raw)) * granularity + abs(offset) \
            >= 1 << 63:
        raise DecodeError("scaled coordinate overflows int64", base)
    return _coords(raw, granularity, offset)


def decode_nodes(messages: Iterable, block: PrimitiveBlockView,
                 node_index: dict | None = None, keep_untagged: bool = True) -> list[RawElement]:
    """Decode non-dense ``Node`` messages."""
    out = []
    for data, base in messages:
        node_id, keys, vals, lat, lon = None, [], [], None, None
        for fno, wire, value, foff in iter_fields(memoryview(data), base=base):
            if fno == 1:
                expect_wire(fno, wire, VARINT, foff)
                node_id = unzigzag(value)
            elif fno in (2, 3):
                expect_wire(fno, wire, LENGTH_DELIMITED, foff)
                if fno == 2:
                    keys = unpack_int64(value, fno, foff)
                else:
                    vals = unpack_int64(value, fno, foff)
            elif fno in (8, 9):
                expect_wire(fno, wire, VARINT, foff)
                if fno == 8:
                    lat = unzigzag(value)
                else:
                    lon = unzigzag(value)
        if node_id is None or lat is None or lon is None:
            raise DecodeError("node missing id or coordinates", base)
        lat = to_degrees(lat, block.granularity, block.lat_offset)
        lon = to_degrees(lon, block.granularity, block.lon_offset)
        tags = _tag_map(keys, vals, block, base)
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise InvariantViolation(f"node {node_id} coordinates out of range")
        if tags or keep_untagged:
            out.append(RawElement(node_id, ElementKind.NODE, tags, lat, lon))
        if node_index is not None:
            node_index[node_id] = (lat, lon)
    return out


def decode_ways(group, block: PrimitiveBlockView) -> list[RawElement]:
    """Decode ``Way`` messages: a single message, or a list of ``(bytes, offset)``."""
    messages = group if isinstance(group, list) else [(group, 0)]
    out = []
    for data, base in messages:
        way_id, keys, vals, refs = None, [], [], []
        for fno, wire, value, foff in iter_fields(memoryview(data), base=base):
            if fno == 1:
                expect_wire(fno, wire, VARINT, foff)
                way_id = as_int64(value)
            elif fno in (2, 3, 8):
                expect_wire(fno, wire, LENGTH_DELIMITED, foff)
                if fno == 2:
                    keys = unpack_int64(value, fno, foff)
                elif fno == 3:
                    vals = unpack_int64(value, fno, foff)
                else:
                    refs = unpack_sint64(value, fno, foff)
        if way_id is None:
            raise DecodeError("way missing id", base)
        out.append(RawElement(way_id, ElementKind.WAY, _tag_map(keys, vals, block, base),
                              refs=tuple(_deltas(refs, "way ref", base))))
    return out


def decode_relations(group, block: PrimitiveBlockView) -> list[RawElement]:
    messages = group if isinstance(group, list) else [(group, 0)]
    out = []
    for data, base in messages:
        rel_id, keys, vals, roles, memids, types = None, [], [], [], [], []
        for fno, wire, value, foff in iter_fields(memoryview(data), base=base):
            if fno == 1:
                expect_wire(fno, wire, VARINT, foff)
                rel_id = as_int64(value)
            elif fno in (2, 3, 8, 9, 10):
                expect_wire(fno, wire, LENGTH_DELIMITED, foff)
                if fno == 9:
                    memids = unpack_sint64(value, fno, foff)
                else:
                    arr = unpack_int64(value, fno, foff)
                    if fno == 2:
                        keys = arr
                    elif fno == 3:
                        vals = arr
                    elif fno == 8:
                        roles = arr
                    else:
                        types = arr
        if rel_id is None:
            raise DecodeError("relation missing id", base)
        if not len(roles) == len(memids) == len(types):
            raise DecodeError("relation member arrays disagree in length", base)
        members = []
        for role, ref, kind in zip(roles, _deltas(memids, "member id", base), types):
            if not 0 <= kind < 3:
                raise DecodeError(f"unknown member type {kind}", base, 10)
            members.append(Member(_MEMBER_KINDS[kind], ref, block.string(role, base)))
        out.append(RawElement(rel_id, ElementKind.RELATION, _tag_map(keys, vals, block, base),
                              members=tuple(members)))
    return out


def decode_block_elements(payload, node_index: dict | None = None,
                          keep_untagged: bool = True) -> list[RawElement]:
    block = decode_primitive_block(payload)
    out = []
    for group in block.groups:
        out.extend(decode_nodes(group.nodes, block, node_index, keep_untagged))
        for dense in group.dense:
            out.extend(decode_dense_nodes(dense, block, node_index, keep_untagged))
        if group.ways:
            out.extend(decode_ways(group.ways, block))
        if group.relations:
            out.extend(decode_relations(group.relations, block))
    return out


def _decode_frame(frame: BlobFrame, keep_untagged: bool = True
                  ) -> tuple[list[RawElement], dict]:
    if frame.header_type == "OSMHeader":
        info = decode_header_block(frame.payload)
        unsupported = set(info.required_features) - SUPPORTED_FEATURES
        if unsupported:
            raise PbfError(f"file requires unsupported features: {sorted(unsupported)}")
        return [], {}
    index = {}
    return decode_block_elements(frame.payload, index, keep_untagged), index


def iter_elements(stream: BinaryIO, counters: Counter | None = None,
                  node_index: dict | None = None, workers: int | None = None,
                  keep_untagged: bool = True) -> Iterator[RawElement]:
    """Decode every element of a PBF stream in file order.

    When *node_index* is given it is filled with ``id -> (lat, lon)`` for
    every node, tagged or not. ``keep_untagged=False`` suppresses
    untagged nodes from the output (they are still indexed and counted
    under ``counters["untagged_nodes"]``). ``workers > 1`` decodes blobs on
    a thread pool; output order is unaffected.
    """
    def decode(item):
        elements, index = _decode_frame(inflate_blob(*item), keep_untagged)
        return elements, index

    def raw_items():
        for header_type, blob, offset in read_raw_frames(stream):
            if header_type not in HEADER_TYPES:
                log.warning("skipping blob of unknown type %r at offset %d", header_type, offset)
                if counters is not None:
                    counters["unknown_blob_type"] += 1
                continue
            yield header_type, blob, offset

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = pool.map(decode, raw_items())
            yield from _emit(results, counters, node_index, keep_untagged)
    else:
        yield from _emit(map(decode, raw_items()), counters, node_index, keep_untagged)


def _emit(results, counters, node_index, keep_untagged):
    for elements, index in results:
        if node_index is not None:
            node_index.update(index)
        if not keep_untagged and counters is not None:
            counters["untagged_nodes"] += len(index) - sum(
                1 for e in elements if e.kind is ElementKind.NODE)
        yield from elements


def read_pbf(path, counters: Counter | None = None, node_index: dict | None = None,
             workers: int | None = None, keep_untagged: bool = True) -> list[RawElement]:
    with open(path, "rb") as fh:
        return list(iter_elements(fh, counters, node_index, workers, keep_untagged))
