"""TSF1 timestamp files, BSF1 bitstream files and ASCII bit export.

TSF1: b"TSF1", tick resolution (u32 LE, ps), event count (u64 LE), then
u64 LE ticks. BSF1: b"BSF1", four zero bytes, bit length (u64 LE), then
packed bytes MSB-first.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from .bitstream import BitStream
from .errors import FormatError, VersionMismatch
from .photonsim import TimestampStream, check_strictly_increasing

TSF_MAGIC = b"TSF1"
BSF_MAGIC = b"BSF1"
HEADER = struct.Struct("<4sIQ")
HEADER_SIZE = HEADER.size  # 16


def _check_magic(magic: bytes, expected: bytes, path) -> None:
    if magic == expected:
        return
    if magic[:3] == expected[:3]:
        raise VersionMismatch(f"{path}: unsupported format version {magic!r}, expected {expected!r}")
    raise FormatError(f"{path}: bad magic {magic!r}, expected {expected!r}")


def _read_header(fh: BinaryIO, expected: bytes, path) -> tuple[int, int]:
    raw = fh.read(HEADER_SIZE)
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header")
    magic, field, count = HEADER.unpack(raw)
    _check_magic(magic, expected, path)
    return field, count


class TsfWriter:
    """Streams ticks into a TSF1 file; the count is patched in on close."""

    def __init__(self, path, tick_resolution: int):
        self.path = Path(path)
        self.tick_resolution = int(tick_resolution)
        self.count = 0
        self._last: int | None = None
        self._fh = open(self.path, "wb")
        self._fh.write(HEADER.pack(TSF_MAGIC, self.tick_resolution, 0))

    def write(self, ticks: np.ndarray) -> None:
        ticks = np.asarray(ticks, dtype=np.int64)
        check_strictly_increasing(ticks, self._last)
        if ticks.size:
            if ticks[0] < 0:
                raise FormatError("negative tick")
            self._last = int(ticks[-1])
        self._fh.write(ticks.astype("<u8").tobytes())
        self.count += ticks.size

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.seek(0)
        self._fh.write(HEADER.pack(TSF_MAGIC, self.tick_resolution, self.count))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_tsf(path, stream: TimestampStream) -> None:
    with TsfWriter(path, stream.tick_resolution) as w:
        w.write(stream.ticks)


def open_tsf(path) -> tuple[int, np.ndarray]:
    """Memory-map a TSF1 file; returns (tick_resolution, u64 tick view)."""
    with open(path, "rb") as fh:
        res, count = _read_header(fh, TSF_MAGIC, path)
    size = os.path.getsize(path)
    if size != HEADER_SIZE + 8 * count:
        raise FormatError(f"{path}: header says {count} events but file holds {(size - HEADER_SIZE) / 8:g}")
    if res == 0:
        raise FormatError(f"{path}: zero tick resolution")
    if count == 0:
        return res, np.empty(0, dtype="<u8")
    return res, np.memmap(path, dtype="<u8", mode="r", offset=HEADER_SIZE, shape=(count,))


def iter_tsf(path, chunk_events: int = 1 << 22) -> Iterator[np.ndarray]:
    res, ticks = open_tsf(path)
    prev = None
    for s in range(0, ticks.size, chunk_events):
        part = np.asarray(ticks[s:s + chunk_events], dtype=np.int64)
        check_strictly_increasing(part, prev)
        prev = int(part[-1])
        yield part


def read_tsf(path) -> TimestampStream:
    res, ticks = open_tsf(path)
    stream = TimestampStream(np.array(ticks, dtype=np.int64), tick_resolution=res)
    check_strictly_increasing(stream.ticks)
    return stream


class BsfWriter:
    """Appends byte-aligned packed chunks to a BSF1 file; the final chunk may be partial."""

    def __init__(self, path):
        self.path = Path(path)
        self.bit_length = 0
        self._fh = open(self.path, "wb")
        self._fh.write(HEADER.pack(BSF_MAGIC, 0, 0))

    def write(self, bits: BitStream) -> None:
        if self.bit_length % 8:
            raise ValueError("only the final chunk may end mid-byte")
        self._fh.write(bits.data.tobytes())
        self.bit_length += bits.bit_length

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.seek(0)
        self._fh.write(HEADER.pack(BSF_MAGIC, 0, self.bit_length))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_bsf(path, bits: BitStream) -> None:
    with BsfWriter(path) as w:
        w.write(bits)


def open_bsf(path) -> BitStream:
    """Memory-mapped BitStream view of a BSF1 file."""
    with open(path, "rb") as fh:
        reserved, bit_length = _read_header(fh, BSF_MAGIC, path)
    if reserved != 0:
        raise FormatError(f"{path}: reserved header bytes are not zero")
    nbytes = (bit_length + 7) // 8
    size = os.path.getsize(path)
    if size != HEADER_SIZE + nbytes:
        raise FormatError(f"{path}: header says {bit_length} bits ({nbytes} bytes) but payload is "
                          f"{size - HEADER_SIZE} bytes")
    if nbytes == 0:
        return BitStream.empty()
    data = np.memmap(path, dtype=np.uint8, mode="r", offset=HEADER_SIZE, shape=(nbytes,))
    return BitStream(data, bit_length)


def read_bsf(path) -> BitStream:
    bs = open_bsf(path)
    return BitStream(np.array(bs.data), bs.bit_length)


def export_ascii(bits: BitStream, path, chunk_bytes: int = 1 << 20) -> None:
    """One '0'/'1' character per bit, no separators."""
    with open(path, "wb") as fh:
        nfull = bits.bit_length // 8
        for s in range(0, nfull, chunk_bytes):
            fh.write((np.unpackbits(np.asarray(bits.data[s:min(s + chunk_bytes, nfull)])) + 48).tobytes())
        rem = bits.bit_length - 8 * nfull
        if rem:
            fh.write((np.unpackbits(bits.data[nfull:nfull + 1], count=rem) + 48).tobytes())
