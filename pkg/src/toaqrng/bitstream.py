"""Packed bit sequences, MSB-first within each byte."""
from __future__ import annotations

import numpy as np


class BitStream:
    """Packed bits with an exact bit length.

    Bits past ``bit_length`` in the final byte are kept at zero.
    """

    __slots__ = ("data", "bit_length")

    def __init__(self, data, bit_length: int | None = None):
        arr = np.frombuffer(data, dtype=np.uint8) if isinstance(data, (bytes, bytearray, memoryview)) \
            else np.asarray(data, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("packed data must be one-dimensional")
        if bit_length is None:
            bit_length = 8 * arr.size
        if not 8 * arr.size - 8 < bit_length <= 8 * arr.size and not (bit_length == 0 and arr.size == 0):
            raise ValueError(f"bit_length {bit_length} inconsistent with {arr.size} bytes")
        pad = 8 * arr.size - bit_length
        if pad and arr[-1] & ((1 << pad) - 1):
            arr = arr.copy()
            arr[-1] &= (0xFF << pad) & 0xFF
        self.data = arr
        self.bit_length = int(bit_length)

    @classmethod
    def from_bits(cls, bits) -> "BitStream":
        if isinstance(bits, str):
            bits = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        b = np.asarray(bits, dtype=np.uint8)
        if b.size and b.max() > 1:
            raise ValueError("bits must be 0 or 1")
        return cls(np.packbits(b), b.size)

    @classmethod
    def empty(cls) -> "BitStream":
        return cls(np.empty(0, dtype=np.uint8), 0)

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(self.data, count=self.bit_length)

    def full_bytes(self) -> np.ndarray:
        return self.data[: self.bit_length // 8]

    def __len__(self) -> int:
        return self.bit_length

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitStream):
            return NotImplemented
        return self.bit_length == other.bit_length and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"BitStream(bit_length={self.bit_length})"

    def slice_bits(self, start: int, stop: int) -> "BitStream":
        """Bits ``[start, stop)`` as a new stream (byte-aligned starts avoid a copy of the unpacked bits)."""
        stop = min(stop, self.bit_length)
        if start % 8 == 0:
            nbytes = (stop - start + 7) // 8
            return BitStream(self.data[start // 8: start // 8 + nbytes], stop - start)
        return BitStream.from_bits(self.to_bits()[start:stop])

    @staticmethod
    def concat(parts) -> "BitStream":
        parts = list(parts)
        if all(p.bit_length % 8 == 0 for p in parts[:-1]):
            data = np.concatenate([p.data for p in parts]) if parts else np.empty(0, np.uint8)
            return BitStream(data, sum(p.bit_length for p in parts))
        return BitStream.from_bits(np.concatenate([p.to_bits() for p in parts]))
