"""Time-of-arrival bit extraction against an external periodic reference.

Each reference period of T ps is split into N equal bins; a detection emits the
log2(N)-bit index of its bin, most significant bit first. Only the first
detection in a period is used.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitstream import BitStream
from .errors import BinNarrowerThanResolution, ConfigError
from .photonsim import TimestampStream, check_strictly_increasing


@dataclass(frozen=True)
class ExtractionConfig:
    period_T: int = 12_800
    bins_N: int = 256
    reference_origin: int = 0

    def __post_init__(self):
        n = self.bins_N
        if n < 2 or n & (n - 1):
            raise ConfigError(f"bins_N must be a power of two >= 2, got {n}")
        if n > 2**32:
            raise ConfigError("bins_N above 2**32 is not supported")
        if self.period_T <= 0 or self.period_T % n:
            raise ConfigError(f"period_T={self.period_T} ps is not divisible into {n} integer-width bins")

    @property
    def bin_width(self) -> int:
        return self.period_T // self.bins_N

    @property
    def bits_per_event(self) -> int:
        return self.bins_N.bit_length() - 1


@dataclass
class ExtractionStats:
    events_consumed: int = 0
    events_dropped_same_interval: int = 0
    bits_emitted: int = 0

    def __iadd__(self, other: "ExtractionStats") -> "ExtractionStats":
        self.events_consumed += other.events_consumed
        self.events_dropped_same_interval += other.events_dropped_same_interval
        self.bits_emitted += other.bits_emitted
        return self


def bin_index(t: int, cfg: ExtractionConfig) -> int:
    if t < cfg.reference_origin:
        raise ConfigError("timestamp precedes the reference origin")
    return ((t - cfg.reference_origin) % cfg.period_T) // cfg.bin_width


def pack_indices(values: np.ndarray, bits_per_value: int) -> tuple[np.ndarray, int]:
    """MSB-first bit serialisation of integer values; returns (packed bytes, bit count)."""
    values = np.asarray(values)
    if bits_per_value == 8:
        return values.astype(np.uint8), 8 * values.size
    be = values.astype(">u4").view(np.uint8).reshape(-1, 4)
    bits = np.unpackbits(be, axis=1)[:, 32 - bits_per_value:]
    return np.packbits(bits.ravel()), bits_per_value * values.size


class Extractor:
    """Chunked extraction; output is identical for any split of the input stream."""

    def __init__(self, cfg: ExtractionConfig, tick_resolution: int = 1):
        if cfg.bin_width < tick_resolution:
            raise BinNarrowerThanResolution(
                f"bin width {cfg.bin_width} ps is below the timestamp resolution {tick_resolution} ps")
        self.cfg = cfg
        self.stats = ExtractionStats()
        self._last_tick: int | None = None
        self._last_interval: int | None = None
        self._carry = np.empty(0, dtype=np.uint8)  # unpacked bits awaiting a full byte

    def feed(self, ticks: np.ndarray) -> BitStream:
        """Extract from the next chunk; returns whole bytes only (remainder carried)."""
        cfg = self.cfg
        ticks = np.asarray(ticks, dtype=np.int64)
        check_strictly_increasing(ticks, self._last_tick)
        if ticks.size == 0:
            return BitStream.empty()
        if ticks[0] < cfg.reference_origin:
            raise ConfigError("timestamp precedes the reference origin")
        self._last_tick = int(ticks[-1])

        rel = ticks - cfg.reference_origin
        interval = rel // cfg.period_T
        first = np.empty(ticks.size, dtype=bool)
        first[0] = self._last_interval is None or interval[0] != self._last_interval
        np.not_equal(interval[1:], interval[:-1], out=first[1:])
        self._last_interval = int(interval[-1])

        kept = rel[first] if not first.all() else rel
        bins = (kept % cfg.period_T) // cfg.bin_width
        m = cfg.bits_per_event
        self.stats.events_consumed += kept.size
        self.stats.events_dropped_same_interval += ticks.size - kept.size
        self.stats.bits_emitted += m * kept.size

        packed, nbits = pack_indices(bins, m)
        if m % 8 == 0 and self._carry.size == 0:
            return BitStream(packed, nbits)
        bits = np.concatenate((self._carry, np.unpackbits(packed, count=nbits)))
        whole = bits.size - bits.size % 8
        self._carry = bits[whole:]
        return BitStream(np.packbits(bits[:whole]), whole)

    def finish(self) -> BitStream:
        tail, self._carry = self._carry, np.empty(0, dtype=np.uint8)
        return BitStream.from_bits(tail)


def extract_bits(ts: TimestampStream, cfg: ExtractionConfig) -> tuple[BitStream, ExtractionStats]:
    ex = Extractor(cfg, ts.tick_resolution)
    body = ex.feed(ts.ticks)
    tail = ex.finish()
    bits = body if tail.bit_length == 0 else BitStream.concat([body, tail])
    return bits, ex.stats
