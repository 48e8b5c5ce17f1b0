"""PSNR and matched PSNR (mPSNR) against the native-rate reference.

mPSNR expands both sequences to the least-common-multiple of their frame
rates by frame-hold and averages the per-tick luma MSE over the overlapping
duration, so sequences at different rates compare on a common time grid.
For integer rate factors it equals plain PSNR of the frame-hold-upsampled
sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from greenfps.video import VideoSequence

__all__ = ["QualityScore", "psnr", "mpsnr"]


@dataclass(frozen=True)
class QualityScore:
    """Quality in dB (math.inf when the total squared error is zero)."""

    value: float
    n_compared: int

    @property
    def is_lossless(self) -> bool:
        return math.isinf(self.value)


def _check_geometry(ref: VideoSequence, test: VideoSequence) -> None:
    if (ref.width, ref.height) != (test.width, test.height):
        raise ValueError("geometry mismatch")
    if ref.fmt.bit_depth != test.fmt.bit_depth:
        raise ValueError("bit depth mismatch")


def _sq_err(a: np.ndarray, b: np.ndarray) -> float:
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sum(d * d))


def _to_db(total_se: float, n_samples: int, max_value: int) -> float:
    if total_se == 0.0:
        return math.inf
    mse = total_se / n_samples
    return 10.0 * math.log10(max_value * max_value / mse)


def psnr(ref: VideoSequence, test: VideoSequence) -> QualityScore:
    """Luma PSNR over sequences with identical geometry, rate and length."""
    _check_geometry(ref, test)
    if len(ref) != len(test):
        raise ValueError(f"frame count mismatch ({len(ref)} vs {len(test)})")
    if ref.frame_rate != test.frame_rate:
        raise ValueError("frame rate mismatch")
    total = 0.0
    for rf, tf in zip(ref.frames, test.frames):
        total += _sq_err(rf.y, tf.y)
    n = len(ref) * ref.width * ref.height
    return QualityScore(_to_db(total, n, ref.fmt.max_value), len(ref))


def _rational_lcm(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(
        math.lcm(a.numerator * b.denominator, b.numerator * a.denominator),
        a.denominator * b.denominator,
    )


def mpsnr(ref: VideoSequence, test: VideoSequence) -> QualityScore:
    """Matched PSNR of ``test`` (<= ref rate) against the native-rate ``ref``.

    Both sequences are held out to virtual frames on the LCM-rate grid; the
    squared error is aggregated per tick over the overlap of the two display
    durations, then converted to dB once.
    """
    _check_geometry(ref, test)
    if test.frame_rate > ref.frame_rate:
        raise ValueError("test frame rate exceeds reference frame rate")

    grid = _rational_lcm(ref.frame_rate, test.frame_rate)
    hold_ref = int(grid / ref.frame_rate)  # integral by construction
    hold_test = int(grid / test.frame_rate)
    overlap = min(ref.duration, test.duration)
    n_ticks = int(overlap * grid)
    if n_ticks == 0:
        raise ValueError("sequences have no overlapping duration on the LCM grid")

    total = 0.0
    for tick in range(n_ticks):
        total += _sq_err(ref.frames[tick // hold_ref].y, test.frames[tick // hold_test].y)
    n = n_ticks * ref.width * ref.height
    return QualityScore(_to_db(total, n, ref.fmt.max_value), n_ticks)
