import numpy as np
import pytest

from toaqrng.bitstream import BitStream
from toaqrng.errors import FormatError, NonMonotonicInput, VersionMismatch
from toaqrng.formats import (
    HEADER_SIZE, BsfWriter, TsfWriter, export_ascii, iter_tsf, open_bsf, open_tsf, read_bsf, read_tsf,
    write_bsf, write_tsf,
)
from toaqrng.photonsim import TimestampStream


def test_bitstream_from_bits_and_back():
    b = BitStream.from_bits("1011001")
    assert b.bit_length == 7
    assert b.data.tolist() == [0b10110010]
    assert b.to_bits().tolist() == [1, 0, 1, 1, 0, 0, 1]


def test_bitstream_pad_bits_masked():
    b = BitStream(np.array([0xFF], dtype=np.uint8), 3)
    assert b.data.tolist() == [0xE0]
    assert b == BitStream.from_bits("111")


def test_bitstream_slice_and_concat():
    bits = np.random.default_rng(1).integers(0, 2, 1001).astype(np.uint8)
    s = BitStream.from_bits(bits)
    assert s.slice_bits(3, 500) == BitStream.from_bits(bits[3:500])
    assert s.slice_bits(8, 1001) == BitStream.from_bits(bits[8:])
    assert BitStream.concat([s.slice_bits(0, 13), s.slice_bits(13, 1001)]) == s
    with pytest.raises(ValueError):
        BitStream(np.zeros(2, dtype=np.uint8), 20)


def test_tsf_round_trip(tmp_path):
    ts = TimestampStream(np.array([0, 25, 50_000, 10**13], dtype=np.int64), tick_resolution=25)
    write_tsf(tmp_path / "a.tsf", ts)
    back = read_tsf(tmp_path / "a.tsf")
    assert np.array_equal(back.ticks, ts.ticks) and back.tick_resolution == 25
    res, mm = open_tsf(tmp_path / "a.tsf")
    assert res == 25 and mm.dtype == np.dtype("<u8")
    raw = (tmp_path / "a.tsf").read_bytes()
    assert raw[:4] == b"TSF1" and len(raw) == HEADER_SIZE + 8 * 4


def test_tsf_chunked_writer_and_reader(tmp_path):
    ticks = np.cumsum(np.random.default_rng(2).integers(1, 100, 10_000)).astype(np.int64)
    with TsfWriter(tmp_path / "b.tsf", 1) as w:
        for part in np.array_split(ticks, 7):
            w.write(part)
    assert np.array_equal(np.concatenate(list(iter_tsf(tmp_path / "b.tsf", chunk_events=999))), ticks)


def test_tsf_writer_rejects_non_monotonic(tmp_path):
    with pytest.raises(NonMonotonicInput):
        with TsfWriter(tmp_path / "c.tsf", 1) as w:
            w.write(np.array([1, 5]))
            w.write(np.array([5]))


def test_bsf_round_trip(tmp_path):
    b = BitStream.from_bits(np.random.default_rng(3).integers(0, 2, 777))
    write_bsf(tmp_path / "a.bsf", b)
    assert read_bsf(tmp_path / "a.bsf") == b
    with BsfWriter(tmp_path / "b.bsf") as w:
        w.write(b.slice_bits(0, 400))
        w.write(b.slice_bits(400, 777))
    assert open_bsf(tmp_path / "b.bsf") == b


def test_bad_magic_and_version(tmp_path):
    write_bsf(tmp_path / "a.bsf", BitStream.from_bits("1010"))
    raw = bytearray((tmp_path / "a.bsf").read_bytes())
    (tmp_path / "bad.bsf").write_bytes(b"XXXX" + bytes(raw[4:]))
    with pytest.raises(FormatError):
        open_bsf(tmp_path / "bad.bsf")
    (tmp_path / "v2.bsf").write_bytes(b"BSF2" + bytes(raw[4:]))
    with pytest.raises(VersionMismatch):
        open_bsf(tmp_path / "v2.bsf")
    with pytest.raises(FormatError):
        open_tsf(tmp_path / "a.bsf")
    (tmp_path / "short.bsf").write_bytes(bytes(raw[:HEADER_SIZE]))
    with pytest.raises(FormatError):
        open_bsf(tmp_path / "short.bsf")


def test_export_ascii(tmp_path):
    export_ascii(BitStream.from_bits("1100101"), tmp_path / "a.txt", chunk_bytes=1)
    assert (tmp_path / "a.txt").read_text() == "1100101"
