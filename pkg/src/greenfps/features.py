"""Spatio-temporal content features driving frame-rate classification.

One statistic vector per sequence: temporal activity (FD, SFD, TI, optical
flow, TE), spatial complexity (STD, SI, GLCM descriptors, HoG, SE) and the
contrast-normalized motion measure NFD, plus the CRF the prediction targets.
All statistics are computed on the luma plane of the native-rate source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterator

import numpy as np
from scipy import fft, ndimage

from greenfps.flow import farneback_flow
from greenfps.video import Frame, VideoSequence

__all__ = [
    "FeatureConfig",
    "FeatureVector",
    "FEATURE_COLUMNS",
    "frame_difference",
    "squared_frame_difference",
    "contrast_std",
    "si_ti",
    "glcm_stats",
    "optical_flow",
    "flow_stats",
    "hog_stats",
    "normalized_frame_difference",
    "spatial_energy",
    "temporal_energy",
    "extract_feature_vector",
]

@dataclass(frozen=True)
class FeatureConfig:
    """Knobs for the statistics whose exact parameterization is a choice."""

    glcm_levels: int = 8
    farneback_pyr_scale: float = 0.5
    farneback_levels: int = 3
    farneback_winsize: int = 15
    farneback_iterations: int = 3
    farneback_poly_n: int = 5
    farneback_poly_sigma: float = 1.1
    hog_bins: int = 9
    hog_cell: int = 8
    hog_block: int = 2
    hog_eps: float = 1e-6
    energy_block: int = 32
    energy_gamma: float = 1.0
    nfd_eps: float = 1e-6


DEFAULT_CONFIG = FeatureConfig()


@dataclass(frozen=True)
class FeatureVector:
    """Per-sequence statistics in fixed column order, plus the target CRF."""

    meanFD: float
    meanSFD: float
    meanSTD: float
    maxSI: float
    maxTI: float
    meanGLCM_con: float
    stdGLCM_con: float
    meanGLCM_corr: float
    stdGLCM_corr: float
    meanGLCM_ene: float
    stdGLCM_ene: float
    meanGLCM_hom: float
    stdGLCM_hom: float
    meanGLCM_ent: float
    stdGLCM_ent: float
    meanOF_mag: float
    stdOF_mag: float
    meanOF_or: float
    stdOF_or: float
    meanHoG: float
    stdHoG: float
    meanNFD: float
    meanE: float
    meanh: float
    crf: int

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_COLUMNS], dtype=np.float64)


FEATURE_COLUMNS: tuple[str, ...] = tuple(f.name for f in fields(FeatureVector))


def _lumas(seq: VideoSequence) -> list[np.ndarray]:
    return [f.y.astype(np.float64) for f in seq.frames]


def _pairs(seq: VideoSequence) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    lumas = _lumas(seq)
    if len(lumas) < 2:
        raise ValueError("temporal features need at least 2 frames")
    return zip(lumas[:-1], lumas[1:])


def frame_difference(seq: VideoSequence) -> float:
    """Mean absolute luma difference over all co-located pixels and pairs."""
    return float(np.mean([np.mean(np.abs(b - a)) for a, b in _pairs(seq)]))


def squared_frame_difference(seq: VideoSequence) -> float:
    """Mean squared luma difference; the sum over pairs and pixels divided by
    (N-1)*W*H (one normalizer slot per actually existing frame pair)."""
    return float(np.mean([np.mean((b - a) ** 2) for a, b in _pairs(seq)]))


def contrast_std(seq: VideoSequence) -> float:
    """Per-frame population std of luma, averaged over frames."""
    return float(np.mean([np.std(y) for y in _lumas(seq)]))


def _sobel_magnitude(y: np.ndarray) -> np.ndarray:
    return np.hypot(ndimage.sobel(y, axis=0), ndimage.sobel(y, axis=1))


def si_ti(seq: VideoSequence) -> tuple[float, float]:
    """ITU-T P.910-style spatial/temporal information, max over frames/pairs."""
    lumas = _lumas(seq)
    if len(lumas) < 2:
        raise ValueError("TI needs at least 2 frames")
    max_si = max(float(np.std(_sobel_magnitude(y))) for y in lumas)
    max_ti = max(float(np.std(b - a)) for a, b in zip(lumas[:-1], lumas[1:]))
    return max_si, max_ti


def _glcm(frame: Frame, levels: int) -> np.ndarray:
    """Symmetric normalized co-occurrence matrix, horizontal neighbor offset."""
    q = (frame.y.astype(np.int64) * levels) // (frame.fmt.max_value + 1)
    left, right = q[:, :-1].ravel(), q[:, 1:].ravel()
    if left.size == 0:  # single-column frame: no horizontal neighbors
        p = np.zeros((levels, levels))
        p[q[0, 0], q[0, 0]] = 1.0
        return p
    counts = np.bincount(left * levels + right, minlength=levels * levels)
    counts = counts.reshape(levels, levels).astype(np.float64)
    counts += counts.T
    return counts / counts.sum()


def _glcm_descriptors(p: np.ndarray) -> tuple[float, float, float, float, float]:
    levels = p.shape[0]
    i, j = np.meshgrid(np.arange(levels), np.arange(levels), indexing="ij")
    contrast = float(np.sum((i - j) ** 2 * p))
    homogeneity = float(np.sum(p / (1.0 + np.abs(i - j))))
    energy = float(np.sum(p * p))
    nz = p[p > 0]
    entropy = float(-np.sum(nz * np.log2(nz)))
    mu = float(np.sum(i * p))  # symmetric: row and column marginals coincide
    var = float(np.sum((i - mu) ** 2 * p))
    if var <= 0.0:
        correlation = 1.0  # degenerate spread: perfectly predictable
    else:
        correlation = float(np.sum((i - mu) * (j - mu) * p)) / var
    return contrast, correlation, energy, homogeneity, entropy


def glcm_stats(seq: VideoSequence, levels: int = 8) -> dict[str, float]:
    """Mean/std over frames of GLCM contrast, correlation, energy,
    homogeneity and entropy."""
    per_frame = np.array([_glcm_descriptors(_glcm(f, levels)) for f in seq.frames])
    means, stds = per_frame.mean(axis=0), per_frame.std(axis=0)
    out = {}
    for idx, key in enumerate(("con", "corr", "ene", "hom", "ent")):
        out[f"meanGLCM_{key}"] = float(means[idx])
        out[f"stdGLCM_{key}"] = float(stds[idx])
    return out


def optical_flow(prev: Frame, nxt: Frame, config: FeatureConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Dense Farneback flow (H, W, 2) in pixels/frame from prev to nxt."""
    if prev.y.shape != nxt.y.shape:
        raise ValueError("geometry mismatch")
    return farneback_flow(
        prev.y,
        nxt.y,
        pyr_scale=config.farneback_pyr_scale,
        levels=config.farneback_levels,
        winsize=config.farneback_winsize,
        iterations=config.farneback_iterations,
        poly_n=config.farneback_poly_n,
        poly_sigma=config.farneback_poly_sigma,
    )


def flow_stats(
    seq: VideoSequence, config: FeatureConfig = DEFAULT_CONFIG
) -> tuple[float, float, float, float]:
    """Magnitude/orientation statistics pooled over all pixels and pairs."""
    if len(seq) < 2:
        raise ValueError("optical flow needs at least 2 frames")
    mags, orients = [], []
    for prev, nxt in zip(seq.frames[:-1], seq.frames[1:]):
        flow = optical_flow(prev, nxt, config)
        dx, dy = flow[..., 0], flow[..., 1]
        mags.append(np.hypot(dx, dy).ravel())
        theta = np.arctan2(dy, dx)
        theta[theta == -np.pi] = np.pi  # orientation lives in (-pi, pi]
        orients.append(theta.ravel())
    mag = np.concatenate(mags)
    ori = np.concatenate(orients)
    return (
        float(mag.mean()),
        float(mag.std()),
        float(ori.mean()),
        float(ori.std()),
    )


def _hog_descriptor(y: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """Cell-histogram HoG with unsigned orientations and L2 block norm."""
    cell, nbins, block = config.hog_cell, config.hog_bins, config.hog_block
    h, w = y.shape
    cy, cx = h // cell, w // cell
    if cy < block or cx < block:
        raise ValueError(f"frame {w}x{h} smaller than one {block}x{block}-cell block")
    gy, gx = np.gradient(y)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)  # unsigned, [0, pi)
    bins = np.minimum((ang / np.pi * nbins).astype(np.int64), nbins - 1)

    hist = np.zeros((cy, cx, nbins))
    mag_c = mag[: cy * cell, : cx * cell].reshape(cy, cell, cx, cell)
    bin_c = bins[: cy * cell, : cx * cell].reshape(cy, cell, cx, cell)
    for b in range(nbins):
        hist[:, :, b] = np.where(bin_c == b, mag_c, 0.0).sum(axis=(1, 3))

    blocks = []
    for by in range(cy - block + 1):
        for bx in range(cx - block + 1):
            v = hist[by : by + block, bx : bx + block].ravel()
            blocks.append(v / np.sqrt(np.sum(v * v) + config.hog_eps**2))
    return np.concatenate(blocks)


def hog_stats(seq: VideoSequence, config: FeatureConfig = DEFAULT_CONFIG) -> tuple[float, float]:
    """Mean/std of all HoG descriptor entries pooled over the sequence."""
    entries = np.concatenate([_hog_descriptor(y, config) for y in _lumas(seq)])
    return float(entries.mean()), float(entries.std())


def normalized_frame_difference(
    seq: VideoSequence, eps: float = DEFAULT_CONFIG.nfd_eps
) -> float:
    """Frame difference normalized by the paired frames' mean contrast."""
    values = []
    for a, b in _pairs(seq):
        fd = float(np.mean(np.abs(b - a)))
        denom = 0.5 * (float(np.std(a)) + float(np.std(b))) + eps
        values.append(fd / denom)
    return float(np.mean(values))


def _blocks(y: np.ndarray, w: int) -> np.ndarray:
    """(n_blocks, w, w) view of complete w-by-w tiles."""
    by, bx = y.shape[0] // w, y.shape[1] // w
    if by == 0 or bx == 0:
        raise ValueError(f"frame smaller than one {w}x{w} block")
    return y[: by * w, : bx * w].reshape(by, w, bx, w).transpose(0, 2, 1, 3).reshape(-1, w, w)


def spatial_energy(seq: VideoSequence, config: FeatureConfig = DEFAULT_CONFIG) -> float:
    """Exponentially weighted non-DC DCT magnitudes, averaged per block."""
    w = config.energy_block
    idx = np.arange(w)
    weight = np.exp(config.energy_gamma * (idx[:, None] + idx[None, :]) / (2.0 * w))
    weight[0, 0] = 0.0  # DC excluded
    per_frame = []
    for y in _lumas(seq):
        coefs = fft.dctn(_blocks(y, w), type=2, norm="ortho", axes=(1, 2))
        per_frame.append(np.mean(np.sum(np.abs(coefs) * weight, axis=(1, 2))))
    return float(np.mean(per_frame)) / (w * w)


def temporal_energy(seq: VideoSequence, config: FeatureConfig = DEFAULT_CONFIG) -> float:
    """Block-wise SAD between consecutive frames, normalized per pixel."""
    w = config.energy_block
    values = []
    for a, b in _pairs(seq):
        sads = np.sum(np.abs(_blocks(b - a, w)), axis=(1, 2))
        values.append(np.mean(sads) / (w * w))
    return float(np.mean(values))


def extract_feature_vector(
    seq: VideoSequence, crf: int, config: FeatureConfig = DEFAULT_CONFIG
) -> FeatureVector:
    """All statistics for one sequence/CRF pair, in fixed column order."""
    if not 0 <= crf <= 51:
        raise ValueError(f"crf {crf} outside [0, 51]")
    if len(seq) < 2:
        raise ValueError("feature extraction needs at least 2 frames")
    max_si, max_ti = si_ti(seq)
    of_mag_mean, of_mag_std, of_or_mean, of_or_std = flow_stats(seq, config)
    hog_mean, hog_std = hog_stats(seq, config)
    return FeatureVector(
        meanFD=frame_difference(seq),
        meanSFD=squared_frame_difference(seq),
        meanSTD=contrast_std(seq),
        maxSI=max_si,
        maxTI=max_ti,
        **glcm_stats(seq, config.glcm_levels),
        meanOF_mag=of_mag_mean,
        stdOF_mag=of_mag_std,
        meanOF_or=of_or_mean,
        stdOF_or=of_or_std,
        meanHoG=hog_mean,
        stdHoG=hog_std,
        meanNFD=normalized_frame_difference(seq, config.nfd_eps),
        meanE=spatial_energy(seq, config),
        meanh=temporal_energy(seq, config),
        crf=crf,
    )
