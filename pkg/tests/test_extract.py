import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toaqrng.bitstream import BitStream
from toaqrng.errors import BinNarrowerThanResolution, ConfigError, NonMonotonicInput
from toaqrng.extract import ExtractionConfig, Extractor, bin_index, extract_bits, pack_indices
from toaqrng.photonsim import TimestampStream

CFG = ExtractionConfig(period_T=12_800, bins_N=256, reference_origin=0)


def test_bin_index_examples():
    assert bin_index(0, CFG) == 0
    assert bin_index(49, CFG) == 0
    assert bin_index(50, CFG) == 1
    assert bin_index(12_799, CFG) == 255
    assert bin_index(12_800, CFG) == 0
    assert bin_index(12_800 * 7 + 50 * 128, CFG) == 128


def test_bits_msb_first():
    ts = TimestampStream(np.array([0, 12_800 + 128 * 50, 2 * 12_800 + 255 * 50]))
    bits, stats = extract_bits(ts, CFG)
    assert bits.to_bits().tolist() == [0] * 8 + [1] + [0] * 7 + [1] * 8
    assert bits.data.tolist() == [0, 128, 255]
    assert stats.events_consumed == 3 and stats.bits_emitted == 24


def test_small_bin_count_packing():
    cfg = ExtractionConfig(period_T=400, bins_N=4)
    ts = TimestampStream(np.array([0, 400 + 100, 800 + 200, 1200 + 399, 1600 + 150]))
    bits, _ = extract_bits(ts, cfg)
    assert bits.to_bits().tolist() == [0, 0, 0, 1, 1, 0, 1, 1, 0, 1]


def test_empty_input():
    bits, stats = extract_bits(TimestampStream(np.empty(0, dtype=np.int64)), CFG)
    assert bits.bit_length == 0 and stats.events_consumed == 0


def test_second_event_in_same_period_is_dropped():
    ts = TimestampStream(np.array([100, 5_000, 12_700, 12_900]))
    bits, stats = extract_bits(ts, CFG)
    assert stats.events_dropped_same_interval == 2
    assert bits.data.tolist() == [2, 2]


def test_origin_shifts_phase():
    cfg = ExtractionConfig(period_T=12_800, bins_N=256, reference_origin=30)
    assert bin_index(30, cfg) == 0
    assert bin_index(79, cfg) == 0
    assert bin_index(80, cfg) == 1
    with pytest.raises(ConfigError):
        bin_index(10, cfg)


@given(st.integers(0, 255), st.integers(0, 10**6))
def test_bin_centre_round_trip(b, period):
    t = period * CFG.period_T + b * CFG.bin_width + CFG.bin_width // 2
    assert bin_index(t, CFG) == b


@given(st.integers(0, 12_799), st.integers(0, 12_799))
def test_shifting_origin_rotates_bins(t, phase):
    cfg = ExtractionConfig(period_T=12_800, bins_N=256, reference_origin=phase)
    shifted = bin_index(t + 12_800 + phase, cfg)
    assert shifted == bin_index(t, CFG)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 16, 64, 256, 1024]), st.lists(st.integers(1, 3000), min_size=0, max_size=6),
       st.integers(0, 2**32))
def test_chunked_extraction_matches_whole(n, cuts, seed):
    cfg = ExtractionConfig(period_T=n * 10, bins_N=n)
    rng = np.random.default_rng(seed)
    ticks = np.cumsum(rng.integers(1, 3 * n * 10, 3000)).astype(np.int64)
    whole, whole_stats = extract_bits(TimestampStream(ticks), cfg)
    ex = Extractor(cfg)
    parts = []
    for chunk in np.split(ticks, sorted(set(cuts))):
        parts.append(ex.feed(chunk))
    parts.append(ex.finish())
    assert BitStream.concat(parts) == whole
    assert ex.stats == whole_stats


def test_pack_indices_wide_values():
    packed, n = pack_indices(np.array([0x3FF, 0]), 10)
    assert n == 20
    assert BitStream(packed, n).to_bits().tolist() == [1] * 10 + [0] * 10


def test_bin_narrower_than_resolution():
    with pytest.raises(BinNarrowerThanResolution):
        Extractor(CFG, tick_resolution=100)
    Extractor(CFG, tick_resolution=25)


def test_invalid_configs():
    with pytest.raises(ConfigError):
        ExtractionConfig(bins_N=100)
    with pytest.raises(ConfigError):
        ExtractionConfig(period_T=1000, bins_N=256)


def test_non_monotonic_input():
    ex = Extractor(CFG)
    ex.feed(np.array([10, 20]))
    with pytest.raises(NonMonotonicInput):
        ex.feed(np.array([15]))
    with pytest.raises(NonMonotonicInput):
        extract_bits(TimestampStream(np.array([5, 5])), CFG)


def test_events_before_origin_rejected():
    with pytest.raises(ConfigError):
        extract_bits(TimestampStream(np.array([5])), ExtractionConfig(reference_origin=10))
