"""Monte-Carlo photon arrivals, detector model and bin-occupancy oracle.

Time is carried as integer picoseconds throughout. Randomness is drawn per
fixed 10 ms window from a generator keyed on ``(seed, stage, window)``, so the
output for a given seed does not depend on how a caller chunks the work.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator

import numba
import numpy as np

from .errors import ConfigError, NonMonotonicInput

logger = logging.getLogger(__name__)

PS_PER_S = 10**12
WINDOW_PS = 10**10
# Gaussian jitter is truncated at this many sigmas; lets segmented runs
# release events early without ever reordering across segments.
JITTER_CLIP_SIGMAS = 8.0

_STAGE_ARRIVALS = 0
_STAGE_DARK = 1
_STAGE_EFFICIENCY = 2
_STAGE_JITTER = 3

_NO_EVENT = np.iinfo(np.int64).min // 2


@dataclass(frozen=True)
class SourceModel:
    """Coherent source seen at the detector face.

    ``mean_photon_flux`` is in photons per second, ``duration`` in seconds.
    """

    mean_photon_flux: float
    duration: float
    seed: int = 0

    def __post_init__(self):
        if not (self.mean_photon_flux > 0 and math.isfinite(self.mean_photon_flux)):
            raise ConfigError(f"mean_photon_flux must be positive, got {self.mean_photon_flux}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ConfigError(f"duration must be positive, got {self.duration}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration * PS_PER_S))


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector.

    Times are picoseconds, ``dark_rate`` counts per second. Dead time is
    non-paralyzable.
    """

    efficiency: float = 1.0
    dead_time: int = 24_000
    jitter_sigma: float = 0.0
    timestamp_resolution: int = 1
    dark_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.dead_time < 0:
            raise ConfigError("dead_time must be >= 0")
        if not (self.jitter_sigma >= 0 and math.isfinite(self.jitter_sigma)):
            raise ConfigError("jitter_sigma must be >= 0")
        if int(self.timestamp_resolution) != self.timestamp_resolution or self.timestamp_resolution <= 0:
            raise ConfigError("timestamp_resolution must be a positive integer number of ps")
        if not (self.dark_rate >= 0 and math.isfinite(self.dark_rate)):
            raise ConfigError("dark_rate must be >= 0")


@dataclass
class TimestampStream:
    """Strictly increasing detection times in picosecond ticks.

    ``duration`` (ps) is the length of the observation window when known; it
    lets the detector model place dark counts after the last photon.
    """

    ticks: np.ndarray
    tick_resolution: int = 1
    duration: int | None = None

    def __post_init__(self):
        self.ticks = np.ascontiguousarray(self.ticks, dtype=np.int64)
        if self.ticks.ndim != 1:
            raise ValueError("ticks must be one-dimensional")
        if self.tick_resolution <= 0:
            raise ConfigError("tick_resolution must be positive")

    def __len__(self) -> int:
        return self.ticks.size

    def validate(self) -> None:
        check_strictly_increasing(self.ticks)
        if self.ticks.size and self.ticks[0] < 0:
            raise NonMonotonicInput("negative timestamp")
        if self.tick_resolution > 1 and np.any(self.ticks % self.tick_resolution):
            raise ValueError("ticks are not multiples of tick_resolution")

    @property
    def end(self) -> int:
        last = int(self.ticks[-1]) + 1 if self.ticks.size else 0
        return max(int(self.duration), last) if self.duration is not None else last


@dataclass
class DetectorStats:
    ideal_events: int = 0
    dark_events: int = 0
    efficiency_removed: int = 0
    dead_time_removed: int = 0
    negative_dropped: int = 0
    duplicates_dropped: int = 0
    output_events: int = 0


def check_strictly_increasing(ticks: np.ndarray, previous: int | None = None) -> None:
    if ticks.size > 1 and np.any(ticks[1:] <= ticks[:-1]):
        bad = int(np.argmax(ticks[1:] <= ticks[:-1])) + 1
        raise NonMonotonicInput(f"timestamps not strictly increasing at index {bad}")
    if previous is not None and ticks.size and ticks[0] <= previous:
        raise NonMonotonicInput("timestamps not strictly increasing across chunk boundary")


def _window_rng(seed: int, stage: int, window: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stage, int(window))))


def _window_arrivals(rng: np.random.Generator, start: int, length: int, rate: float) -> np.ndarray:
    """Poisson arrivals on ``[start, start + length)`` ps.

    The count is Poisson; positions are normalised partial sums of i.i.d.
    exponential gaps, which are exactly the uniform order statistics.
    """
    n = int(rng.poisson(rate * length / PS_PER_S))
    if n == 0:
        return np.empty(0, dtype=np.int64)
    gaps = rng.standard_exponential(n + 1)
    csum = np.cumsum(gaps)
    pos = np.floor(csum[:-1] * (length / csum[-1])).astype(np.int64)
    np.minimum(pos, length - 1, out=pos)
    t = pos + start
    if n > 1:
        # two photons in the same picosecond are unresolvable
        t = t[np.concatenate(([True], t[1:] != t[:-1]))]
    return t


def _windows(duration_ps: int) -> range:
    return range((duration_ps + WINDOW_PS - 1) // WINDOW_PS)


def _window_span(w: int, end: int) -> tuple[int, int]:
    start = w * WINDOW_PS
    return start, min(start + WINDOW_PS, end) - start


def iter_arrival_windows(source: SourceModel, windows: range | None = None) -> Iterator[np.ndarray]:
    end = source.duration_ps
    for w in windows if windows is not None else _windows(end):
        start, length = _window_span(w, end)
        yield _window_arrivals(_window_rng(source.seed, _STAGE_ARRIVALS, w), start, length,
                               source.mean_photon_flux)


def generate_arrivals(source: SourceModel) -> TimestampStream:
    """Ideal photon arrival times over ``[0, duration)``, 1 ps ticks."""
    parts = list(iter_arrival_windows(source))
    ticks = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    return TimestampStream(ticks, tick_resolution=1, duration=source.duration_ps)


@numba.njit(cache=True)
def _dead_time_mask(t, dead_time, last_accepted):
    keep = np.zeros(t.size, dtype=np.bool_)
    last = last_accepted
    for i in range(t.size):
        if t[i] - last >= dead_time:
            keep[i] = True
            last = t[i]
    return keep, last


def remove_dead_time(ticks: np.ndarray, dead_time: int, last_accepted: int = _NO_EVENT) -> tuple[np.ndarray, int]:
    """Non-paralyzable dead time: each accepted event blanks the next ``dead_time`` ps."""
    if dead_time == 0 or ticks.size == 0:
        return ticks, (int(ticks[-1]) if ticks.size else last_accepted)
    keep, last = _dead_time_mask(np.ascontiguousarray(ticks, dtype=np.int64), np.int64(dead_time),
                                 np.int64(last_accepted))
    return ticks[keep], int(last)


class DetectorChain:
    """Stateful detector pipeline fed with consecutive blocks of whole windows.

    Order per event: dark counts merged (they bypass efficiency), Bernoulli
    thinning of photons, non-paralyzable dead time, Gaussian jitter with
    re-sort, quantization to the timestamp grid (round half up), removal of
    duplicate ticks.
    """

    def __init__(self, det: DetectorModel, seed: int):
        self.det = det
        self.seed = int(seed)
        self.stats = DetectorStats()
        self._last_accepted = _NO_EVENT
        self._last_tick: int | None = None
        self._held = np.empty(0, dtype=np.float64)
        self._margin = JITTER_CLIP_SIGMAS * det.jitter_sigma

    def feed(self, photons: np.ndarray, windows: range, end: int, final: bool) -> np.ndarray:
        """Process photons lying in ``windows`` (clipped at ``end`` ps)."""
        det = self.det
        photons = np.asarray(photons, dtype=np.int64)
        self.stats.ideal_events += photons.size
        bounds = np.searchsorted(photons, [w * WINDOW_PS for w in windows] + [windows.stop * WINDOW_PS])

        kept, dark = [], []
        for j, w in enumerate(windows):
            chunk = photons[bounds[j]:bounds[j + 1]]
            if det.efficiency < 1.0 and chunk.size:
                chunk = chunk[_window_rng(self.seed, _STAGE_EFFICIENCY, w).random(chunk.size) < det.efficiency]
            kept.append(chunk)
            if det.dark_rate > 0:
                start, length = _window_span(w, end)
                if length > 0:
                    dark.append(_window_arrivals(_window_rng(self.seed, _STAGE_DARK, w), start, length,
                                                 det.dark_rate))
        events = np.concatenate(kept) if kept else np.empty(0, dtype=np.int64)
        self.stats.efficiency_removed += photons.size - events.size
        if dark:
            d = np.concatenate(dark)
            self.stats.dark_events += d.size
            events = np.sort(np.concatenate((events, d)), kind="stable")

        n_before = events.size
        events, self._last_accepted = remove_dead_time(events, det.dead_time, self._last_accepted)
        self.stats.dead_time_removed += n_before - events.size

        if det.jitter_sigma > 0:
            out = self._jitter(events, windows, final)
        else:
            out = self._quantize_int(events)
        out = self._drop_duplicates(out)
        self.stats.output_events += out.size
        return out

    def _jitter(self, events: np.ndarray, windows: range, final: bool) -> np.ndarray:
        sigma = self.det.jitter_sigma
        bounds = np.searchsorted(events, [w * WINDOW_PS for w in windows] + [windows.stop * WINDOW_PS])
        noise = np.empty(events.size, dtype=np.float64)
        for j, w in enumerate(windows):
            lo, hi = bounds[j], bounds[j + 1]
            if hi > lo:
                noise[lo:hi] = _window_rng(self.seed, _STAGE_JITTER, w).standard_normal(hi - lo)
        np.clip(noise, -JITTER_CLIP_SIGMAS, JITTER_CLIP_SIGMAS, out=noise)
        x = np.concatenate((self._held, events.astype(np.float64) + noise * sigma))
        x.sort(kind="stable")
        if final:
            ready, self._held = x, np.empty(0, dtype=np.float64)
        else:
            cut = int(np.searchsorted(x, windows.stop * WINDOW_PS - self._margin, side="left"))
            ready, self._held = x[:cut], x[cut:]
        res = self.det.timestamp_resolution
        q = np.floor(ready / res + 0.5).astype(np.int64) * res
        neg = q < 0
        if neg.any():
            self.stats.negative_dropped += int(neg.sum())
            q = q[~neg]
        return q

    def _quantize_int(self, events: np.ndarray) -> np.ndarray:
        res = self.det.timestamp_resolution
        if res == 1:
            return events
        return ((2 * events + res) // (2 * res)) * res

    def _drop_duplicates(self, q: np.ndarray) -> np.ndarray:
        if q.size == 0:
            return q
        prev = np.empty_like(q)
        prev[0] = self._last_tick if self._last_tick is not None else -1
        prev[1:] = q[:-1]
        keep = q != prev
        n_drop = q.size - int(keep.sum())
        if n_drop:
            self.stats.duplicates_dropped += n_drop
            q = q[keep]
        if q.size:
            self._last_tick = int(q[-1])
        return q


def apply_detector(ideal: TimestampStream, det: DetectorModel, seed: int) -> tuple[TimestampStream, DetectorStats]:
    """Pass an ideal arrival stream through the detector model.

    Returns the detected stream and counters for every removal step.
    """
    check_strictly_increasing(ideal.ticks)
    end = ideal.end
    chain = DetectorChain(det, seed)
    ticks = chain.feed(ideal.ticks, _windows(end), end, final=True)
    return TimestampStream(ticks, tick_resolution=det.timestamp_resolution, duration=end), chain.stats


class _SegmentedRun:
    def __init__(self, source: SourceModel, det: DetectorModel, seed: int, segment_windows: int):
        if segment_windows < 1:
            raise ConfigError("segment_windows must be >= 1")
        self.source = source
        self.chain = DetectorChain(det, seed)
        self.segment_windows = segment_windows

    @property
    def stats(self) -> DetectorStats:
        return self.chain.stats

    def __iter__(self) -> Iterator[np.ndarray]:
        end = self.source.duration_ps
        all_w = _windows(end)
        for s in range(0, len(all_w), self.segment_windows):
            ws = range(s, min(s + self.segment_windows, len(all_w)))
            parts = list(iter_arrival_windows(self.source, ws))
            photons = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
            yield self.chain.feed(photons, ws, end, final=ws.stop == len(all_w))


def simulate_detections(source: SourceModel, det: DetectorModel, seed: int,
                        segment_windows: int = 8) -> _SegmentedRun:
    """Iterable of detected-tick chunks; ``.stats`` holds counters once exhausted."""
    return _SegmentedRun(source, det, seed, segment_windows)


def flux_for_detected_rate(rate: float, dead_time_ps: int, efficiency: float = 1.0,
                           dark_rate: float = 0.0) -> float:
    """Photon flux at the detector face that yields ``rate`` detections per second.

    Inverts R = x / (1 + x * dead_time) for the post-efficiency event rate x.
    """
    tau = dead_time_ps / PS_PER_S
    if rate <= 0:
        raise ConfigError("detected rate must be positive")
    if rate * tau >= 1:
        raise ConfigError(f"detected rate {rate:g}/s is unreachable with dead time {dead_time_ps} ps")
    if efficiency <= 0:
        raise ConfigError("efficiency must be positive to reach a detection rate")
    total = rate / (1.0 - rate * tau)
    photons = total - dark_rate
    if photons <= 0:
        raise ConfigError("dark rate alone exceeds the requested detection rate")
    return photons / efficiency


def bin_occupancy_oracle(bins: int, photons: int, trials: int, seed: int,
                         chunk: int = 1 << 20) -> np.ndarray:
    """Empirical probability that the earliest of ``photons`` uniform arrivals lands in each bin.

    Brute force: scatter the photons uniformly over one period and record the
    bin of the first one. Returns an array of length ``bins`` summing to one.
    """
    if bins < 1 or photons < 1 or trials < 1:
        raise ConfigError("bins, photons and trials must all be >= 1")
    rng = np.random.default_rng(seed)
    counts = np.zeros(bins, dtype=np.int64)
    left = trials
    while left:
        m = min(chunk, left)
        first = rng.random((m, photons)).min(axis=1)
        idx = np.minimum((first * bins).astype(np.int64), bins - 1)
        counts += np.bincount(idx, minlength=bins)
        left -= m
    return counts / trials
