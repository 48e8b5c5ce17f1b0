"""Bjontegaard-Delta differences between quality-vs-metric curves.

The metric axis (bitrate or energy) is interpolated in log10 domain as a
monotone piecewise-cubic (PCHIP) function of quality; the average log offset
over the overlapping quality interval maps to a percent difference. Negative
values mean the test curve needs less rate/energy at equal quality.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator

from greenfps.pareto import FrameRatePolicy, RdePoint

log = logging.getLogger(__name__)

__all__ = ["RdCurve", "BdResult", "bd_delta", "bd_triplet"]

MIN_USABLE_POINTS = 3
_N_SAMPLES = 2001  # uniform integration grid over the quality overlap


@dataclass(frozen=True)
class RdCurve:
    """(quality dB, metric) samples of one configuration sweep."""

    points: tuple[tuple[float, float], ...]
    axis_label: str = "metric"

    def prepared(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted finite-quality points as (quality, log10 metric) arrays."""
        finite = [(q, m) for q, m in self.points if math.isfinite(q)]
        finite = sorted(set(finite))
        qualities = np.array([q for q, _ in finite])
        metrics = np.array([m for _, m in finite])
        if len(finite) < MIN_USABLE_POINTS:
            raise ValueError(f"need >= {MIN_USABLE_POINTS} usable points, got {len(finite)}")
        if np.any(metrics <= 0):
            raise ValueError("metric values must be positive")
        if np.any(np.diff(qualities) <= 0):
            raise ValueError("quality not strictly increasing after dedup")
        return qualities, np.log10(metrics)


@dataclass(frozen=True)
class BdResult:
    bd_percent: float
    overlap_db: float


def _interpolant(qualities: np.ndarray, log_metric: np.ndarray, kind: str):
    if kind == "pchip":
        return PchipInterpolator(qualities, log_metric)
    if kind == "cubic":  # classic single cubic polynomial fit, for comparison
        coef = np.polyfit(qualities, log_metric, 3)
        return lambda x: np.polyval(coef, x)
    raise ValueError(f"unknown interpolation {kind!r}")


def bd_delta(reference: RdCurve, test: RdCurve, interpolation: str = "pchip") -> BdResult:
    """Average percent difference of the test metric vs the reference at
    equal quality, integrated over the shared quality interval."""
    ref_q, ref_m = reference.prepared()
    test_q, test_m = test.prepared()
    lo = max(ref_q[0], test_q[0])
    hi = min(ref_q[-1], test_q[-1])
    if hi <= lo:
        raise ValueError("curves share no quality overlap")
    overlap = hi - lo
    if overlap < 2.0:
        log.warning("quality overlap is only %.2f dB; BD value is fragile", overlap)
    g_ref = _interpolant(ref_q, ref_m, interpolation)
    g_test = _interpolant(test_q, test_m, interpolation)
    xs = np.linspace(lo, hi, _N_SAMPLES)
    diff = np.asarray(g_test(xs)) - np.asarray(g_ref(xs))
    avg = float(trapezoid(diff, xs)) / overlap
    return BdResult((10.0**avg - 1.0) * 100.0, overlap)


def bd_triplet(
    measurements: Sequence[RdePoint],
    policy: FrameRatePolicy,
    interpolation: str = "pchip",
) -> tuple[float, float, float]:
    """(BDR, BDEE, BDDE) of a frame-rate policy against encoding every CRF of
    the subset at the native (highest measured) frame rate."""
    native = max(p.frame_rate for p in measurements)
    index = {(p.frame_rate, p.crf): p for p in measurements}
    try:
        ref_pts = [index[(native, c)] for c in policy.crfs]
        test_pts = [index[(policy.rate_for(c), c)] for c in policy.crfs]
    except KeyError as exc:
        raise ValueError(f"missing measurement for {exc}") from exc

    def curve(points: Sequence[RdePoint], metric: str, label: str) -> RdCurve:
        return RdCurve(
            tuple((p.mpsnr_db, getattr(p, metric)) for p in points), axis_label=label
        )

    out = []
    for metric, label in (("bitrate_kbps", "rate"), ("e_enc_j", "enc"), ("e_dec_j", "dec")):
        ref = curve(ref_pts, metric, label)
        test = curve(test_pts, metric, label)
        out.append(bd_delta(ref, test, interpolation).bd_percent)
    return tuple(out)
