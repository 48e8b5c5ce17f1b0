"""Energy-distortion curves, Pareto fronts, and energy-aware frame-rate
selection.

A (frame rate, CRF) measurement point is Pareto-optimal within a set when no
other point offers at least the same quality for at most the same energy with
one of the two strictly better. Ground-truth labeling walks the CRF subset:
anchor at the highest-quality frame rate for the lowest CRF, then at each
subsequent CRF move to the Pareto-efficient frame rate whose quality is
closest to the previous frame rate's quality at that CRF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = ["RdePoint", "FrameRatePolicy", "pareto_front", "select_policy", "build_curves"]

DEFAULT_CRF_SUBSET = (18, 23, 28, 33)


@dataclass(frozen=True)
class RdePoint:
    """One measurement of (sequence, frame rate, CRF)."""

    sequence: str
    frame_rate: Fraction
    crf: int
    mpsnr_db: float
    bitrate_kbps: float
    e_enc_j: float
    e_dec_j: float

    def energy(self, axis: str) -> float:
        if axis == "enc":
            return self.e_enc_j
        if axis == "dec":
            return self.e_dec_j
        raise ValueError(f"unknown energy axis {axis!r}")


def _fps_str(rate: Fraction) -> str:
    return str(rate.numerator) if rate.denominator == 1 else str(rate)


@dataclass(frozen=True)
class FrameRatePolicy:
    """Energy-aware frame rate per CRF of the subset, e.g. {120,30,15,15}."""

    crfs: tuple[int, ...]
    rates: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if len(self.crfs) != len(self.rates):
            raise ValueError("one frame rate per CRF required")

    def rate_for(self, crf: int) -> Fraction:
        return self.rates[self.crfs.index(crf)]

    def braces(self) -> str:
        """Table-style rendering: "{120,30,15,15}"."""
        return "{" + ",".join(_fps_str(r) for r in self.rates) + "}"

    def is_all(self, rate: Fraction) -> bool:
        return all(r == rate for r in self.rates)


def pareto_front(points: Iterable[RdePoint], energy_axis: str = "enc") -> list[RdePoint]:
    """Non-dominated subset: p dominates q iff quality(p) >= quality(q) and
    energy(p) <= energy(q) with at least one strict. Exact ties on both axes
    are all retained. Input order is preserved in the result."""
    pts = list(points)
    if not pts:
        raise ValueError("empty point set")
    order = sorted(range(len(pts)), key=lambda i: (pts[i].energy(energy_axis), -pts[i].mpsnr_db))
    keep = [False] * len(pts)
    best_q = -math.inf
    i = 0
    while i < len(order):
        j = i
        energy_here = pts[order[i]].energy(energy_axis)
        while j < len(order) and pts[order[j]].energy(energy_axis) == energy_here:
            j += 1
        group = order[i:j]
        q_max = max(pts[g].mpsnr_db for g in group)
        if q_max > best_q:
            for g in group:
                if pts[g].mpsnr_db == q_max:
                    keep[g] = True
            best_q = q_max
        i = j
    return [p for p, k in zip(pts, keep) if k]


def _quality_distance(a: float, b: float) -> float:
    if math.isinf(a) and math.isinf(b):
        return 0.0
    return abs(a - b)


def select_policy(
    points: Iterable[RdePoint],
    crf_subset: Sequence[int] = DEFAULT_CRF_SUBSET,
    energy_axis: str = "enc",
) -> FrameRatePolicy:
    """Three-step energy-aware frame-rate selection over the CRF subset.

    1. At the lowest CRF, take the frame rate with the highest quality
       (tie: higher frame rate).
    2. At the next CRF, among the Pareto-efficient points of that CRF's
       cross-section, take the frame rate whose quality is closest to the
       quality of (previous frame rate, current CRF) (tie: higher rate).
    3. Repeat for the remaining CRFs.
    """
    crf_subset = sorted(crf_subset)
    by_crf: dict[int, dict[Fraction, RdePoint]] = {c: {} for c in crf_subset}
    for p in points:
        if p.crf in by_crf:
            by_crf[p.crf][p.frame_rate] = p
    ladder = set(by_crf[crf_subset[0]])
    if not ladder:
        raise ValueError(f"no measurements at CRF {crf_subset[0]}")
    for c in crf_subset:
        missing = ladder.symmetric_difference(by_crf[c])
        if missing:
            raise ValueError(f"grid coverage gap at CRF {c}: {sorted(map(str, missing))}")

    first = crf_subset[0]
    anchor = max(by_crf[first].values(), key=lambda p: (p.mpsnr_db, p.frame_rate))
    selected = [anchor.frame_rate]
    for c in crf_subset[1:]:
        cross = by_crf[c]
        target_q = cross[selected[-1]].mpsnr_db
        front = pareto_front(cross.values(), energy_axis)
        choice = min(
            front,
            key=lambda p: (_quality_distance(p.mpsnr_db, target_q), -p.frame_rate),
        )
        selected.append(choice.frame_rate)
    return FrameRatePolicy(tuple(crf_subset), tuple(selected))


def build_curves(points: Iterable[RdePoint]) -> dict[Fraction, list[RdePoint]]:
    """Group points into per-frame-rate energy-distortion curves, ordered by
    ascending CRF (descending quality along the curve)."""
    curves: dict[Fraction, list[RdePoint]] = {}
    seen: set[tuple[Fraction, int]] = set()
    for p in points:
        key = (p.frame_rate, p.crf)
        if key in seen:
            raise ValueError(f"duplicate measurement for f={p.frame_rate}, crf={p.crf}")
        seen.add(key)
        curves.setdefault(p.frame_rate, []).append(p)
    for rate in curves:
        curves[rate].sort(key=lambda p: p.crf)
    return curves
