"""Deterministic bit shuffle over 64-byte blocks.

A block is viewed as an 8x8 grid of bytes, ``M[r][c] = byte 8r + c``. Output
byte ``8r + c`` takes, as its bit ``b`` (0 = MSB), bit ``r`` of source byte
``M[b][COLUMN_MAP[c]]``. Every output byte therefore draws its eight bits from
eight source bytes spaced eight apart. ``COLUMN_MAP`` is an involution whose
neighbouring entries differ by 3 or 5, so bits that end up close together in
the output never come from adjacent source bytes. The whole map is an
involution on the 512 bit positions of a block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitstream import BitStream
from .errors import ConfigError

BLOCK_BYTES = 64
COLUMN_MAP = np.array([4, 7, 2, 5, 0, 3, 6, 1], dtype=np.intp)
PASSTHROUGH, TRUNCATE = "passthrough", "truncate"
_CHUNK_BLOCKS = 1 << 16


@dataclass(frozen=True)
class ShuffleConfig:
    block_bytes: int = BLOCK_BYTES
    tail_policy: str = PASSTHROUGH

    def __post_init__(self):
        if self.block_bytes != BLOCK_BYTES:
            raise ConfigError("only 64-byte blocks are supported")
        if self.tail_policy not in (PASSTHROUGH, TRUNCATE):
            raise ConfigError(f"tail_policy must be 'passthrough' or 'truncate', got {self.tail_policy!r}")


def source_position(byte: int, bit: int) -> tuple[int, int]:
    """Source (byte, bit) within a block feeding output (byte, bit)."""
    r, c = divmod(byte, 8)
    return 8 * bit + int(COLUMN_MAP[c]), r


def shuffle_blocks(blocks: np.ndarray) -> np.ndarray:
    """Shuffle a whole number of 64-byte blocks (flat uint8 array)."""
    grid = np.asarray(blocks, dtype=np.uint8).reshape(-1, 8, 8)[:, :, COLUMN_MAP]
    bits = np.unpackbits(grid[..., None], axis=-1)  # [block, b, c, r]
    out = bits.transpose(0, 3, 2, 1)  # [block, r, c, b]
    return np.packbits(out, axis=-1).reshape(-1)


def transpose_shuffle(bits: BitStream, cfg: ShuffleConfig = ShuffleConfig()) -> BitStream:
    """Apply the block shuffle; the trailing partial block follows ``cfg.tail_policy``."""
    nfull = bits.bit_length // (8 * BLOCK_BYTES)
    body_bytes = nfull * BLOCK_BYTES
    parts = []
    for s in range(0, nfull, _CHUNK_BLOCKS):
        e = min(s + _CHUNK_BLOCKS, nfull)
        parts.append(shuffle_blocks(bits.data[s * BLOCK_BYTES:e * BLOCK_BYTES]))
    if cfg.tail_policy == TRUNCATE or body_bytes * 8 == bits.bit_length:
        data = np.concatenate(parts) if parts else np.empty(0, dtype=np.uint8)
        return BitStream(data, body_bytes * 8)
    parts.append(np.asarray(bits.data[body_bytes:]))
    return BitStream(np.concatenate(parts), bits.bit_length)


def tail_bits(bits: BitStream) -> int:
    """Number of trailing bits outside complete blocks."""
    return bits.bit_length % (8 * BLOCK_BYTES)
