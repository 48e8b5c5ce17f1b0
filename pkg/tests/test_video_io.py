import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import constant_seq, luma_seq
from greenfps.video import (
    PixelFormat,
    VideoFormatError,
    generate_synthetic,
    probe_y4m,
    read_raw_yuv,
    read_y4m,
    write_y4m,
)


def test_header_round_trip(tmp_path):
    path = tmp_path / "two.y4m"
    write_y4m(luma_seq([np.zeros((4, 4))] * 2, rate=30), path)
    seq = read_y4m(path)
    assert len(seq) == 2
    assert seq.frame_rate == 30
    assert (seq.width, seq.height) == (4, 4)


def test_header_only_is_an_error(tmp_path):
    path = tmp_path / "empty.y4m"
    path.write_bytes(b"YUV4MPEG2 W4 H4 F30:1 Ip A1:1 C420\n")
    with pytest.raises(VideoFormatError, match="no frames"):
        read_y4m(path)


def test_not_y4m(tmp_path):
    path = tmp_path / "garbage.y4m"
    path.write_bytes(b"RIFFxxxx")
    with pytest.raises(VideoFormatError):
        read_y4m(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "trunc.y4m"
    path.write_bytes(b"YUV4MPEG2 W4 H4 F30:1 C420\nFRAME\n" + b"\x00" * 10)
    with pytest.raises(VideoFormatError, match="truncated"):
        read_y4m(path)


def test_unsupported_chroma_tag(tmp_path):
    path = tmp_path / "mono.y4m"
    path.write_bytes(b"YUV4MPEG2 W4 H4 F30:1 Cmono\nFRAME\n" + b"\x00" * 16)
    with pytest.raises(VideoFormatError, match="chroma"):
        read_y4m(path)


def test_non_integer_rate_header_tag(tmp_path):
    path = tmp_path / "ntsc.y4m"
    write_y4m(luma_seq([np.zeros((4, 4))], rate=Fraction(120000, 1001)), path)
    header = path.read_bytes().split(b"\n", 1)[0]
    assert b"F120000:1001" in header
    assert read_y4m(path).frame_rate == Fraction(120000, 1001)


def test_write_payload_size(tmp_path):
    path = tmp_path / "gray.y4m"
    write_y4m(constant_seq(n=1, w=4, h=4), path)
    header, rest = path.read_bytes().split(b"\n", 1)
    frames = rest.split(b"FRAME\n")
    assert frames[0] == b""
    assert len(frames[1]) == 4 * 4 * 3 // 2  # 420, 8-bit


@st.composite
def small_sequences(draw):
    w = draw(st.sampled_from([2, 4, 6]))
    h = draw(st.sampled_from([2, 4]))
    n = draw(st.integers(min_value=1, max_value=3))
    depth = draw(st.sampled_from([8, 10]))
    rate = draw(st.sampled_from([Fraction(30), Fraction(120), Fraction(30000, 1001)]))
    rng = np.random.default_rng(draw(st.integers(min_value=0, max_value=2**31)))
    maxv = (1 << depth) - 1
    lumas = [rng.integers(0, maxv + 1, size=(h, w)) for _ in range(n)]
    return luma_seq(lumas, rate=rate, bit_depth=depth)


@given(seq=small_sequences())
@settings(max_examples=40, deadline=None)
def test_round_trip_is_identity(seq, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("y4m")
    first, second = tmp / "a.y4m", tmp / "b.y4m"
    write_y4m(seq, first)
    write_y4m(read_y4m(first), second)
    assert first.read_bytes() == second.read_bytes()
    back = read_y4m(first)
    assert back.frame_rate == seq.frame_rate
    for mine, theirs in zip(seq.frames, back.frames):
        assert np.array_equal(mine.y, theirs.y)
        assert np.array_equal(mine.u, theirs.u)
        assert np.array_equal(mine.v, theirs.v)


def test_probe_matches_read(tmp_path):
    path = tmp_path / "probe.y4m"
    write_y4m(constant_seq(n=5, w=6, h=4, rate=Fraction(60)), path)
    assert probe_y4m(path) == (6, 4, Fraction(60), 5)


def test_raw_yuv_frame_count(tmp_path):
    path = tmp_path / "clip.yuv"
    path.write_bytes(bytes(72))  # 3 frames of 4x4 420 8-bit
    seq = read_raw_yuv(path, 4, 4, Fraction(30))
    assert len(seq) == 3


def test_raw_yuv_size_mismatch(tmp_path):
    path = tmp_path / "bad.yuv"
    path.write_bytes(bytes(70))
    with pytest.raises(VideoFormatError):
        read_raw_yuv(path, 4, 4, Fraction(30))


def test_raw_yuv_10bit_halves_frame_count(tmp_path):
    path = tmp_path / "deep.yuv"
    path.write_bytes(bytes(96))  # 4x4 420: 24 B/frame at 8-bit, 48 B at 10-bit
    assert len(read_raw_yuv(path, 4, 4, Fraction(30))) == 4
    fmt10 = PixelFormat("420", 10)
    assert len(read_raw_yuv(path, 4, 4, Fraction(30), fmt10)) == 2


def test_constant_synthetic():
    seq = generate_synthetic("constant", width=8, height=8, n_frames=3, value=128)
    for frame in seq.frames:
        assert np.all(frame.y == 128)


def test_translation_is_a_shift_of_frame_zero():
    seq = generate_synthetic("global_translation", width=16, height=8, n_frames=4, magnitude=1)
    base = seq.frames[0].y
    for i, frame in enumerate(seq.frames):
        assert np.array_equal(frame.y, np.roll(base, i, axis=1))


@pytest.mark.parametrize("kind", ["constant", "global_translation", "local_motion", "dynamic_texture"])
def test_synthetic_deterministic(kind):
    opts = dict(width=16, height=16, n_frames=4, seed=7)
    a = generate_synthetic(kind, **opts)
    b = generate_synthetic(kind, **opts)
    for fa, fb in zip(a.frames, b.frames):
        assert np.array_equal(fa.y, fb.y)


def test_synthetic_zero_area_rejected():
    with pytest.raises(ValueError):
        generate_synthetic("constant", width=0, height=8)
