"""Exception hierarchy shared by the decoder and the text parsers."""

from __future__ import annotations


class PbfError(Exception):
    """Base class for every structured failure raised while reading PBF data."""


class DecodeError(PbfError):
    """Malformed bytes: truncated stream, bad varint, bad field framing."""

    def __init__(self, message: str, offset: int | None = None, field: int | None = None):
        self.offset = offset
        self.field = field
        where = []
        if field is not None:
            where.append(f"field {field}")
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class IntegrityError(PbfError):
    """Decompressed payload does not match its declared raw size."""


class UnsupportedCompression(PbfError):
    def __init__(self, variant: str):
        self.variant = variant
        super().__init__(f"unsupported blob compression: {variant}")


class InvariantViolation(PbfError, ValueError):
    """Decoded data violates a data-model invariant (e.g. empty way, lat out of range)."""


class TagParseError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at character {offset}")


class ConfigError(ValueError):
    """Invalid configuration or schema file; maps to CLI exit code 2."""
