from osmfacilities.pbf.elements import (ElementKind, Member, RawElement, delta_decode,
                                        filter_structures, is_closed_way, to_degrees)
from osmfacilities.pbf.reader import (BlobFrame, PrimitiveBlockView, decode_dense_nodes,
                                      decode_primitive_block, decode_ways, iter_elements,
                                      read_blob_frames, read_pbf)

__all__ = [
    "BlobFrame", "ElementKind", "Member", "PrimitiveBlockView", "RawElement",
    "decode_dense_nodes", "decode_primitive_block", "decode_ways", "delta_decode",
    "filter_structures", "is_closed_way", "iter_elements", "read_blob_frames", "read_pbf",
    "to_degrees",
]
