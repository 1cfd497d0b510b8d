import numpy as np
import pytest

from toaqrng.bitstream import BitStream


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_bits(n_bytes: int, seed: int = 0) -> BitStream:
    data = np.random.default_rng(seed).integers(0, 256, n_bytes, dtype=np.uint8)
    return BitStream(data)
