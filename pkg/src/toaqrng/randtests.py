"""Statistical battery: bit-delay Pearson correlation, the ENT byte tests and four
SP 800-22 tests with the multi-sequence proportion/uniformity aggregation.

All accumulations are exact integer sums, so results do not depend on the
chunk size used to walk large (memory-mapped) inputs.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bitstream import BitStream
from .errors import ConfigError, InputTooShort, TooFewSequences, ZeroVariance
from .specfun import erfc, normal_cdf, regularized_gamma_q

CHUNK_BYTES = 1 << 23

if hasattr(np, "bitwise_count"):
    def _popcount(a: np.ndarray) -> int:
        return int(np.bitwise_count(a).sum(dtype=np.int64))
else:  # numpy < 2.0
    _POP = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

    def _popcount(a: np.ndarray) -> int:
        return int(_POP[a].sum(dtype=np.int64))


def _as_bits(bits) -> np.ndarray:
    """Unpacked 0/1 uint8 view of a BitStream, '0'/'1' string or array."""
    if isinstance(bits, BitStream):
        return bits.to_bits()
    if isinstance(bits, str):
        return np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    return np.asarray(bits, dtype=np.uint8)


def _as_bytes(data) -> np.ndarray:
    if isinstance(data, BitStream):
        return data.full_bytes()
    if isinstance(data, (bytes, bytearray, memoryview)):
        return np.frombuffer(data, dtype=np.uint8)
    return np.asarray(data, dtype=np.uint8)


# --------------------------------------------------------------------------
# Pearson bit-delay correlation

@dataclass
class PearsonSeries:
    coefficients: list[float]
    bit_length: int

    @property
    def max_delay(self) -> int:
        return len(self.coefficients)

    def at(self, delay: int) -> float:
        return self.coefficients[delay - 1]

    @property
    def null_bound(self) -> float:
        """4 / sqrt(n): a 4-sigma band for an uncorrelated sequence."""
        return 4.0 / math.sqrt(self.bit_length)

    def argmax(self) -> int:
        return int(np.argmax(self.coefficients)) + 1


def _ones_prefix(data: np.ndarray, nbits: int) -> int:
    q, r = divmod(nbits, 8)
    total = 0
    for s in range(0, q, CHUNK_BYTES):
        total += _popcount(np.asarray(data[s:min(s + CHUNK_BYTES, q)]))
    if r:
        total += _popcount(np.asarray(data[q:q + 1]) >> (8 - r))
    return total


def _ones_in(data: np.ndarray, start: int, stop: int) -> int:
    """Ones among bits [start, stop); meant for short ranges."""
    lo = start // 8
    chunk = np.unpackbits(np.asarray(data[lo:(stop + 7) // 8]))
    return int(np.count_nonzero(chunk[start - 8 * lo:stop - 8 * lo]))


def _lagged_product_sum(data: np.ndarray, n: int, d: int) -> int:
    """sum_{i < n-d} b_i * b_{i+d} on packed MSB-first bytes."""
    q, s = divmod(d, 8)
    full = max(0, (n - d - 8) // 8 + 1)  # bytes whose 8 bits all have a partner
    total = 0
    for a in range(0, full, CHUNK_BYTES):
        b = min(a + CHUNK_BYTES, full)
        x = np.asarray(data[a:b])
        if s == 0:
            y = np.asarray(data[a + q:b + q])
        else:
            hi = np.asarray(data[a + q:b + q])
            lo = np.asarray(data[a + q + 1:b + q + 1])
            y = (hi << s) | (lo >> (8 - s))
        total += _popcount(x & y)
    start = 8 * full
    if start < n - d:
        tail = np.unpackbits(np.asarray(data[start // 8:]), count=n - start)
        m = n - d - start
        total += int(np.count_nonzero(tail[:m] & tail[d:d + m]))
    return total


def pearson_bit_correlation(bits: BitStream, max_delay: int = 15) -> PearsonSeries:
    """Pearson coefficient between the bit sequence and itself delayed by 1..max_delay.

    Computed on the overlapping region only (no wraparound).
    """
    if not isinstance(bits, BitStream):
        bits = BitStream.from_bits(_as_bits(bits))
    n = bits.bit_length
    if max_delay < 1:
        raise ConfigError("max_delay must be >= 1")
    if n <= max_delay + 1:
        raise InputTooShort(f"need more than {max_delay + 1} bits, got {n}")
    data = bits.data
    total_ones = _ones_prefix(data, n)
    coeffs = []
    for d in range(1, max_delay + 1):
        m = n - d
        sx = total_ones - _ones_in(data, m, n)
        sy = total_ones - _ones_in(data, 0, d)
        sxy = _lagged_product_sum(data, n, d)
        vx = m * sx - sx * sx
        vy = m * sy - sy * sy
        if vx == 0 or vy == 0:
            raise ZeroVariance("constant bit sequence has no correlation coefficient")
        coeffs.append((m * sxy - sx * sy) / math.sqrt(vx * vy))
    return PearsonSeries(coeffs, n)


# --------------------------------------------------------------------------
# ENT

MC_RADIUS_SQ = (2**24 - 1) ** 2


@dataclass
class EntReport:
    entropy_bits_per_byte: float
    chi_square_value: float
    chi_square_percent: float
    arithmetic_mean: float
    monte_carlo_pi: float
    serial_correlation: float
    n_bytes: int
    mc_groups: int


def ent_suite(data) -> EntReport:
    """ENT-compatible byte statistics.

    Monte-Carlo pi uses consecutive 6-byte groups as two 24-bit coordinates;
    serial correlation is circular at lag 1. Constant input gives NaN serial
    correlation. Fewer than 6 bytes gives NaN for pi.
    """
    b = _as_bytes(data)
    n = b.size
    if n < 2:
        raise InputTooShort("ENT needs at least 2 bytes")

    hist = np.zeros(256, dtype=np.int64)
    total = 0
    total_sq = 0
    lag1 = 0
    inside = 0
    groups = n // 6
    weights = np.array([65536, 256, 1], dtype=np.int64)
    step = CHUNK_BYTES - CHUNK_BYTES % 6
    for s in range(0, n, step):
        x = np.asarray(b[s:min(s + step, n)]).astype(np.int64)
        hist += np.bincount(x, minlength=256)
        total += int(x.sum())
        total_sq += int((x * x).sum())
        lag1 += int((x[:-1] * x[1:]).sum())
        if s + x.size < n:
            lag1 += int(x[-1]) * int(b[s + x.size])
        g = min(x.size // 6, groups - s // 6)
        if g > 0:
            xy = x[:6 * g].reshape(g, 2, 3) @ weights
            inside += int(np.count_nonzero(xy[:, 0] ** 2 + xy[:, 1] ** 2 <= MC_RADIUS_SQ))
    lag1 += int(b[n - 1]) * int(b[0])

    p = hist[hist > 0] / n
    entropy = float(-(p * np.log2(p)).sum())
    expected = n / 256.0
    chi2 = float(((hist - expected) ** 2).sum() / expected)
    percent = 100.0 * regularized_gamma_q(127.5, chi2 / 2.0)
    denom = n * total_sq - total * total
    serial = (n * lag1 - total * total) / denom if denom else float("nan")
    pi_hat = 4.0 * inside / groups if groups else float("nan")
    return EntReport(
        entropy_bits_per_byte=entropy,
        chi_square_value=chi2,
        chi_square_percent=percent,
        arithmetic_mean=total / n,
        monte_carlo_pi=pi_hat,
        serial_correlation=serial,
        n_bytes=n,
        mc_groups=groups,
    )


# --------------------------------------------------------------------------
# SP 800-22 subset

NIST_MIN_LENGTH = 100
FORWARD, BACKWARD = "forward", "backward"


def nist_frequency(bits) -> float:
    e = _as_bits(bits)
    n = e.size
    if n < 1:
        raise InputTooShort("frequency test needs at least 1 bit")
    s = 2 * int(np.count_nonzero(e)) - n
    return erfc(abs(s) / math.sqrt(n) / math.sqrt(2.0))


def nist_block_frequency(bits, block_len: int = 128) -> float:
    e = _as_bits(bits)
    if block_len < 1:
        raise ConfigError("block_len must be >= 1")
    nblocks = e.size // block_len
    if nblocks < 1:
        raise InputTooShort(f"need at least one block of {block_len} bits")
    ones = e[: nblocks * block_len].reshape(nblocks, block_len).sum(axis=1, dtype=np.int64)
    # 4M * sum (ones/M - 1/2)^2, kept exact in integers
    chi2 = float(((2 * ones - block_len) ** 2).sum()) / block_len
    return regularized_gamma_q(nblocks / 2.0, chi2 / 2.0)


def runs_prerequisite(bits) -> bool:
    e = _as_bits(bits)
    n = e.size
    return abs(np.count_nonzero(e) / n - 0.5) < 2.0 / math.sqrt(n)


def _runs(e: np.ndarray) -> tuple[float, bool]:
    n = e.size
    if n < 2:
        raise InputTooShort("runs test needs at least 2 bits")
    pi = np.count_nonzero(e) / n
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0, False
    v = 1 + int(np.count_nonzero(e[1:] != e[:-1]))
    num = abs(v - 2.0 * n * pi * (1.0 - pi))
    return erfc(num / (2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi))), True


def nist_runs(bits) -> float:
    """Runs test; returns 0.0 when the frequency prerequisite fails (see :func:`runs_prerequisite`)."""
    return _runs(_as_bits(bits))[0]


def _tdiv(a: int, b: int) -> int:
    """Integer division truncating toward zero, as in the C reference code."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def nist_cusum(bits, mode: str = FORWARD) -> float:
    e = _as_bits(bits)
    n = e.size
    if n < 1:
        raise InputTooShort("cumulative sums test needs at least 1 bit")
    if mode not in (FORWARD, BACKWARD):
        raise ConfigError(f"mode must be 'forward' or 'backward', got {mode!r}")
    steps = 2 * e.astype(np.int32) - 1
    if mode == BACKWARD:
        steps = steps[::-1]
    z = int(np.abs(np.cumsum(steps, dtype=np.int64)).max())
    root_n = math.sqrt(n)
    nz = _tdiv(n, z)
    sum1 = 0.0
    for k in range(_tdiv(-nz + 1, 4), _tdiv(nz - 1, 4) + 1):
        sum1 += normal_cdf((4 * k + 1) * z / root_n) - normal_cdf((4 * k - 1) * z / root_n)
    sum2 = 0.0
    for k in range(_tdiv(-nz - 3, 4), _tdiv(nz - 1, 4) + 1):
        sum2 += normal_cdf((4 * k + 3) * z / root_n) - normal_cdf((4 * k + 1) * z / root_n)
    return 1.0 - sum1 + sum2


NIST_TESTS = (
    "frequency",
    "block_frequency",
    "cumulative_sums_forward",
    "cumulative_sums_backward",
    "runs",
)


def required_minimum(sequences: int, alpha: float = 0.01) -> int:
    """Minimum passing sequences: floor(m (p - 3 sqrt(p (1-p) / m))) with p = 1 - alpha."""
    p = 1.0 - alpha
    return math.floor(sequences * (p - 3.0 * math.sqrt(p * (1.0 - p) / sequences)))


def uniformity_p_value(p_values: Sequence[float]) -> tuple[float, list[int]]:
    """Chi-square over ten equal-width p-value bins; returns (p, bin counts)."""
    pv = np.asarray(p_values, dtype=np.float64)
    idx = np.minimum((pv * 10).astype(np.int64), 9)
    counts = np.bincount(idx, minlength=10)
    expected = pv.size / 10.0
    chi2 = float(((counts - expected) ** 2).sum() / expected)
    return regularized_gamma_q(4.5, chi2 / 2.0), counts.tolist()


@dataclass
class NistTestResult:
    name: str
    proportion_passed: int
    sequence_count: int
    required_minimum: int
    uniformity_p_value: float
    uniformity_bins: list[int]
    flagged: int = 0

    @property
    def passed(self) -> bool:
        return self.proportion_passed >= self.required_minimum and self.uniformity_p_value >= 0.0001


@dataclass
class NistAggregate:
    sequence_count: int
    sequence_length: int
    alpha: float
    block_len: int
    results: dict[str, NistTestResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())


def _sequence_p_values(e: np.ndarray, tests: Sequence[str], block_len: int) -> dict[str, tuple[float, bool]]:
    out = {}
    for t in tests:
        if t == "frequency":
            out[t] = (nist_frequency(e), False)
        elif t == "block_frequency":
            out[t] = (nist_block_frequency(e, block_len), False)
        elif t == "runs":
            p, ok = _runs(e)
            out[t] = (p, not ok)
        elif t == "cumulative_sums_forward":
            out[t] = (nist_cusum(e, FORWARD), False)
        elif t == "cumulative_sums_backward":
            out[t] = (nist_cusum(e, BACKWARD), False)
    return out


def nist_aggregate(bits: BitStream, seq_len: int = 1_000_000, tests: Sequence[str] = NIST_TESTS,
                   alpha: float = 0.01, block_len: int = 128, max_sequences: int | None = None,
                   threads: int = 1) -> NistAggregate:
    """Split into disjoint sequences, run each test per sequence and aggregate.

    A test passes when enough sequences reach ``alpha`` and the p-values are
    uniform (uniformity p >= 0.0001).
    """
    unknown = set(tests) - set(NIST_TESTS)
    if unknown:
        raise ConfigError(f"unknown NIST tests: {sorted(unknown)}")
    if seq_len < NIST_MIN_LENGTH:
        raise InputTooShort(f"sequence length must be >= {NIST_MIN_LENGTH} bits")
    if "block_frequency" in tests and block_len > seq_len:
        raise ConfigError("block length exceeds the sequence length")
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    m = bits.bit_length // seq_len
    if max_sequences is not None:
        m = min(m, max_sequences)
    if m < 2:
        raise TooFewSequences(f"need at least 2 sequences of {seq_len} bits, have {m}")

    def one(i: int):
        return _sequence_p_values(bits.slice_bits(i * seq_len, (i + 1) * seq_len).to_bits(), tests, block_len)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_seq = list(pool.map(one, range(m)))
    else:
        per_seq = [one(i) for i in range(m)]

    agg = NistAggregate(sequence_count=m, sequence_length=seq_len, alpha=alpha, block_len=block_len)
    req = required_minimum(m, alpha)
    for t in tests:
        pv = [r[t][0] for r in per_seq]
        uni, counts = uniformity_p_value(pv)
        agg.results[t] = NistTestResult(
            name=t,
            proportion_passed=sum(p >= alpha for p in pv),
            sequence_count=m,
            required_minimum=req,
            uniformity_p_value=uni,
            uniformity_bins=counts,
            flagged=sum(r[t][1] for r in per_seq),
        )
    return agg
