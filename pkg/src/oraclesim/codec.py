"""Canonical byte layout primitives shared by every wire format.

All integers are fixed-width little-endian, byte strings are u32
length-prefixed, and lists are u16/u32 count-prefixed.  FORMATS.md documents
the resulting layouts; keeping every encoder on these helpers is what makes
transaction ids bit-exact across implementations.
"""

from __future__ import annotations

import hashlib
import struct


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class Writer:
    """Accumulates a canonical byte string."""

    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, v: int) -> "Writer":
        self._parts.append(struct.pack("<B", v))
        return self

    def u16(self, v: int) -> "Writer":
        self._parts.append(struct.pack("<H", v))
        return self

    def u32(self, v: int) -> "Writer":
        self._parts.append(struct.pack("<I", v))
        return self

    def u64(self, v: int) -> "Writer":
        self._parts.append(struct.pack("<Q", v))
        return self

    def i64(self, v: int) -> "Writer":
        self._parts.append(struct.pack("<q", v))
        return self

    def f64(self, v: float) -> "Writer":
        # IEEE-754 binary64, little-endian; bit-exact across platforms
        self._parts.append(struct.pack("<d", v))
        return self

    def raw(self, b: bytes) -> "Writer":
        self._parts.append(bytes(b))
        return self

    def bytes(self, b: bytes) -> "Writer":
        # u32 length prefix, then the raw bytes
        self.u32(len(b))
        self._parts.append(bytes(b))
        return self

    def string(self, s: str) -> "Writer":
        return self.bytes(s.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class TruncatedError(ValueError):
    """Ran out of bytes while decoding."""


class Reader:
    """Consumes a canonical byte string; raises TruncatedError on underrun."""

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise TruncatedError(
                f"need {n} bytes at offset {self._pos}, have {len(self._data) - self._pos}"
            )
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def bytes(self) -> bytes:
        return self._take(self.u32())

    def string(self) -> str:
        return self.bytes().decode("utf-8")

    def done(self) -> bool:
        return self._pos == len(self._data)

    def expect_done(self) -> None:
        if not self.done():
            raise ValueError(f"{len(self._data) - self._pos} trailing bytes after decode")
