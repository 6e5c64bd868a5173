"""Versioned little-endian binary container used for graph and index files.

Layout: `magic | u8 version | sections... | u32 crc32`. Every section is a
`u64` byte length followed by its payload. The CRC covers all bytes before
the trailer.
"""

import struct
import zlib

from kicq.errors import ChecksumError, IndexFormatError

_U8 = struct.Struct("<B")
_U32 = struct.Struct("<I")
_I32 = struct.Struct("<i")
_U64 = struct.Struct("<Q")
_F64 = struct.Struct("<d")


class SectionBuilder:
    """Accumulates the payload of one section."""

    def __init__(self):
        self._parts = []

    def u32(self, value):
        self._parts.append(_U32.pack(value))

    def i32(self, value):
        self._parts.append(_I32.pack(value))

    def f64(self, value):
        self._parts.append(_F64.pack(value))

    def u32_array(self, values):
        values = list(values)
        self._parts.append(struct.pack(f"<{len(values)}I", *values))

    def string(self, value):
        data = value.encode("utf-8")
        self.u32(len(data))
        self._parts.append(data)

    def getvalue(self):
        return b"".join(self._parts)


class SectionCursor:
    """Sequential reader over the payload of one section."""

    def __init__(self, data, name):
        self._data = data
        self._pos = 0
        self.name = name

    def _take(self, size):
        end = self._pos + size
        if end > len(self._data):
            raise IndexFormatError(f"section '{self.name}' is too short")
        chunk = self._data[self._pos : end]
        self._pos = end
        return chunk

    def u32(self):
        return _U32.unpack(self._take(4))[0]

    def i32(self):
        return _I32.unpack(self._take(4))[0]

    def f64(self):
        return _F64.unpack(self._take(8))[0]

    def u32_array(self, count):
        return struct.unpack(f"<{count}I", self._take(4 * count))

    def string(self):
        size = self.u32()
        try:
            return self._take(size).decode("utf-8")
        except UnicodeDecodeError as err:
            raise IndexFormatError(f"invalid string in '{self.name}'") from err

    def finish(self):
        if self._pos != len(self._data):
            raise IndexFormatError(
                f"section '{self.name}' has {len(self._data) - self._pos} "
                "trailing bytes"
            )


def encode_container(magic, version, sections):
    """Serialize a list of section payloads (bytes) into a container."""
    parts = [magic, _U8.pack(version)]
    for payload in sections:
        parts.append(_U64.pack(len(payload)))
        parts.append(payload)
    body = b"".join(parts)
    return body + _U32.pack(zlib.crc32(body))


def decode_container(data, magic, version, names):
    """Verify a container and return one `SectionCursor` per name in `names`.

    Raises:
        ChecksumError: The data is truncated or the CRC does not match.
        IndexFormatError: Wrong magic, unsupported version or bad sections.
    """
    header = len(magic) + 1
    if len(data) < header + _U32.size:
        raise ChecksumError("file is truncated")
    body, trailer = data[:-4], data[-4:]
    if data[: len(magic)] != magic:
        raise IndexFormatError(
            f"bad magic {data[:len(magic)]!r}, expected {magic!r}"
        )
    if _U32.unpack(trailer)[0] != zlib.crc32(body):
        raise ChecksumError("checksum mismatch (file truncated or corrupted)")
    found = body[len(magic)]
    if found != version:
        raise IndexFormatError(
            f"unsupported format version {found}, expected {version}"
        )

    cursors = []
    pos = header
    for name in names:
        if pos + 8 > len(body):
            raise IndexFormatError(f"missing section '{name}'")
        size = _U64.unpack(body[pos : pos + 8])[0]
        pos += 8
        if pos + size > len(body):
            raise IndexFormatError(f"section '{name}' exceeds file size")
        cursors.append(SectionCursor(body[pos : pos + size], name))
        pos += size
    if pos != len(body):
        raise IndexFormatError(f"{len(body) - pos} unexpected trailing bytes")
    return cursors


def write_bytes(path, data):
    with open(path, "wb") as f:
        f.write(data)


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()
