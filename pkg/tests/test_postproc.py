import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toaqrng.bitstream import BitStream
from toaqrng.errors import ConfigError
from toaqrng.postproc import COLUMN_MAP, ShuffleConfig, shuffle_blocks, source_position, tail_bits, \
    transpose_shuffle


def _naive(block: np.ndarray) -> np.ndarray:
    src = np.unpackbits(block)
    out = np.zeros(512, dtype=np.uint8)
    for byte in range(64):
        for bit in range(8):
            sb, sbit = source_position(byte, bit)
            out[8 * byte + bit] = src[8 * sb + sbit]
    return np.packbits(out)


def test_column_map_is_an_involution_with_wide_steps():
    assert sorted(COLUMN_MAP.tolist()) == list(range(8))
    assert np.array_equal(COLUMN_MAP[COLUMN_MAP], np.arange(8))
    assert set(np.abs(np.diff(COLUMN_MAP)).tolist()) <= {3, 5}


def test_exhaustive_position_map():
    seen = set()
    for byte in range(64):
        for bit in range(8):
            src = source_position(byte, bit)
            assert source_position(*src) == (byte, bit)
            seen.add(src)
    assert len(seen) == 512


def test_single_bit_images():
    for pos in range(512):
        bits = np.zeros(512, dtype=np.uint8)
        bits[pos] = 1
        out = np.unpackbits(shuffle_blocks(np.packbits(bits)))
        assert out.sum() == 1
        b, bit = divmod(int(np.flatnonzero(out)[0]), 8)
        assert source_position(b, bit) == divmod(pos, 8)


def test_matches_naive_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        block = rng.integers(0, 256, 64, dtype=np.uint8)
        assert np.array_equal(shuffle_blocks(block), _naive(block))


def test_random_blocks_involution_and_popcount():
    blocks = np.random.default_rng(2).integers(0, 256, 64 * 10_000, dtype=np.uint8)
    out = shuffle_blocks(blocks)
    assert np.array_equal(shuffle_blocks(out), blocks)
    pop = np.unpackbits(blocks).reshape(-1, 512).sum(axis=1)
    assert np.array_equal(np.unpackbits(out).reshape(-1, 512).sum(axis=1), pop)


def test_output_byte_draws_from_eight_source_bytes():
    for byte in range(64):
        sources = {source_position(byte, bit)[0] for bit in range(8)}
        assert len(sources) == 8
        assert len({s % 8 for s in sources}) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3000), st.integers(0, 2**32))
def test_tail_policies(nbits, seed):
    bits = BitStream.from_bits(np.random.default_rng(seed).integers(0, 2, nbits))
    passthrough = transpose_shuffle(bits)
    truncated = transpose_shuffle(bits, ShuffleConfig(tail_policy="truncate"))
    body = nbits - tail_bits(bits)
    assert passthrough.bit_length == nbits
    assert truncated.bit_length == body
    assert passthrough.slice_bits(0, body) == truncated
    assert passthrough.slice_bits(body, nbits) == bits.slice_bits(body, nbits)
    assert transpose_shuffle(passthrough) == bits


def test_bad_config():
    with pytest.raises(ConfigError):
        ShuffleConfig(tail_policy="pad")
    with pytest.raises(ConfigError):
        ShuffleConfig(block_bytes=32)
