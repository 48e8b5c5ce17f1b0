import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import constant_seq, luma_seq
from greenfps.resample import downsample, generate_weights

LADDER = tuple(Fraction(f) for f in (120, 100, 60, 50, 40, 30, 25, 24, 15))


def tick_weights(f_src: int, f_dst: int, n_src: int) -> list[tuple[int, list[float]]]:
    """Independent oracle: count ticks on the LCM-rate grid per source frame."""
    grid = math.lcm(f_src, f_dst)
    src_ticks = grid // f_src
    out_ticks = grid // f_dst
    n_out = n_src * f_dst // f_src
    table = []
    for j in range(n_out):
        counts: dict[int, int] = {}
        for t in range(j * out_ticks, (j + 1) * out_ticks):
            counts[t // src_ticks] = counts.get(t // src_ticks, 0) + 1
        start = min(counts)
        table.append((start, [counts[i] / out_ticks for i in sorted(counts)]))
    return table


def test_integer_factor_equal_weights():
    table = generate_weights(Fraction(120), Fraction(60), 4)
    assert len(table.entries) == 2
    for entry in table.entries:
        assert entry.weights == (0.5, 0.5)
    assert [e.source_start for e in table.entries] == [0, 2]


def test_unit_factor_is_identity():
    table = generate_weights(Fraction(120), Fraction(120), 3)
    assert [e.weights for e in table.entries] == [(1.0,)] * 3


def test_120_to_100_first_window():
    table = generate_weights(Fraction(120), Fraction(100), 6)
    first = table.entries[0]
    assert first.source_start == 0
    assert first.weights == (5 / 6, 1 / 6)


@pytest.mark.parametrize("f_src", [120, 100, 60])
@pytest.mark.parametrize("f_dst", [100, 60, 40, 25, 24, 15])
def test_weights_match_tick_oracle(f_src, f_dst):
    if f_dst > f_src:
        pytest.skip("downsampling only")
    table = generate_weights(Fraction(f_src), Fraction(f_dst), 30)
    oracle = tick_weights(f_src, f_dst, 30)
    assert len(table.entries) == len(oracle)
    for entry, (start, weights) in zip(table.entries, oracle):
        assert entry.source_start == start
        assert np.allclose(entry.weights, weights, atol=1e-12)


def test_all_ladder_pairs_normalized():
    for f_src in LADDER:
        for f_dst in LADDER:
            if f_dst > f_src:
                continue
            table = generate_weights(f_src, f_dst, 24)
            for entry in table.entries:
                assert abs(sum(entry.weights) - 1.0) <= 1e-9
                assert all(w >= 0 for w in entry.weights)


def test_upsampling_rejected():
    with pytest.raises(ValueError):
        generate_weights(Fraction(60), Fraction(120), 4)
    with pytest.raises(ValueError):
        generate_weights(Fraction(60), Fraction(0), 4)


def test_constant_stays_constant():
    seq = constant_seq(value=128, n=8, rate=Fraction(120))
    out = downsample(seq, Fraction(30))
    assert len(out) == 2
    for frame in out.frames:
        assert np.all(frame.y == 128)


def test_alternating_pair_averages():
    lumas = [np.full((4, 4), 10), np.full((4, 4), 20)] * 3
    seq = luma_seq(lumas, rate=Fraction(120))
    out = downsample(seq, Fraction(60))
    for frame in out.frames:
        assert np.all(frame.y == 15)


def test_output_count_floor():
    seq = constant_seq(n=360, w=2, h=2, rate=Fraction(120))
    assert len(downsample(seq, Fraction(30))) == 90


def test_identity_is_bit_exact():
    rng = np.random.default_rng(3)
    seq = luma_seq([rng.integers(0, 256, (6, 6)) for _ in range(5)], rate=Fraction(50))
    out = downsample(seq, Fraction(50))
    for a, b in zip(seq.frames, out.frames):
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.u, b.u)


@given(
    seed=st.integers(min_value=0, max_value=2**31),
    f_dst=st.sampled_from([15, 24, 30, 40, 60, 100]),
)
@settings(max_examples=30, deadline=None)
def test_range_preserved(seed, f_dst):
    rng = np.random.default_rng(seed)
    seq = luma_seq([rng.integers(0, 256, (4, 4)) for _ in range(10)], rate=Fraction(120))
    out = downsample(seq, Fraction(f_dst))
    stack = np.stack([f.y.astype(int) for f in seq.frames])
    for frame in out.frames:
        assert frame.y.min() >= stack.min() - 1
        assert frame.y.max() <= stack.max() + 1


def test_mean_preserved_for_integer_factor():
    rng = np.random.default_rng(11)
    seq = luma_seq([rng.integers(0, 256, (8, 8)) for _ in range(12)], rate=Fraction(120))
    out = downsample(seq, Fraction(30))
    consumed = np.stack([f.y.astype(float) for f in seq.frames[: len(out) * 4]])
    produced = np.stack([f.y.astype(float) for f in out.frames])
    assert abs(consumed.mean() - produced.mean()) <= 0.5
