"""Temporal downsampling by weighted frame averaging.

Each output frame averages the source frames whose display intervals overlap
its own display interval; weights are proportional to the overlap, computed
exactly with rationals (equivalently: tick counts on the LCM-rate grid).
Integer factors reduce to equal weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from greenfps.video import Frame, VideoSequence

__all__ = ["WeightTable", "generate_weights", "downsample"]


@dataclass(frozen=True)
class OutputWindow:
    """Weights applied to consecutive source frames starting at source_start."""

    source_start: int
    weights: tuple[float, ...]


@dataclass
class WeightTable:
    f_src: Fraction
    f_dst: Fraction
    entries: list[OutputWindow]


def generate_weights(f_src: Fraction, f_dst: Fraction, n_src: int) -> WeightTable:
    """Overlap weights for resampling ``n_src`` frames from f_src to f_dst fps.

    Output count is floor(n_src * f_dst / f_src); trailing source frames that
    do not fill a complete output window are dropped.
    """
    f_src, f_dst = Fraction(f_src), Fraction(f_dst)
    if f_dst <= 0:
        raise ValueError("target frame rate must be positive")
    if f_dst > f_src:
        raise ValueError(f"cannot upsample {f_src} -> {f_dst} fps")

    n_out = int(n_src * f_dst / f_src)  # Fraction floor via int()
    entries = []
    out_period = 1 / f_dst
    src_period = 1 / f_src
    for j in range(n_out):
        start = j * out_period
        end = (j + 1) * out_period
        first = int(start / src_period)  # source frame containing window start
        weights = []
        i = first
        while i * src_period < end:
            overlap = min((i + 1) * src_period, end) - max(i * src_period, start)
            weights.append(overlap / out_period)  # exact rational, sums to 1
            i += 1
        entries.append(OutputWindow(first, tuple(float(w) for w in weights)))
    return WeightTable(f_src, f_dst, entries)


def _resample_plane(planes: list[np.ndarray], window: OutputWindow, max_value: int) -> np.ndarray:
    acc = np.zeros(planes[0].shape, dtype=np.float64)
    for offset, w in enumerate(window.weights):
        acc += w * planes[window.source_start + offset].astype(np.float64)
    # round half away from zero; samples are nonnegative so floor(x+0.5) does it
    return np.minimum(np.floor(acc + 0.5), max_value)


def downsample(seq: VideoSequence, f_dst: Fraction) -> VideoSequence:
    """Weighted-average temporal downsample of ``seq`` to ``f_dst`` fps."""
    table = generate_weights(seq.frame_rate, Fraction(f_dst), len(seq))
    fmt = seq.fmt
    ys = [f.y for f in seq.frames]
    us = [f.u for f in seq.frames]
    vs = [f.v for f in seq.frames]
    frames = [
        Frame(
            _resample_plane(ys, win, fmt.max_value).astype(fmt.dtype),
            _resample_plane(us, win, fmt.max_value).astype(fmt.dtype),
            _resample_plane(vs, win, fmt.max_value).astype(fmt.dtype),
            fmt,
        )
        for win in table.entries
    ]
    return VideoSequence(frames, Fraction(f_dst), name=seq.name)
