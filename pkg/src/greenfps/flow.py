"""Dense two-frame optical flow by polynomial expansion (Farneback's method).

Each neighborhood is approximated as a quadratic polynomial under a Gaussian
applicability window; equating the expansions of the two frames yields a
per-pixel linear system for the displacement, aggregated over an averaging
window and refined coarse-to-fine over an image pyramid.

Identical inputs give an exactly zero field: with a zero prior the right-hand
side vanishes at every pyramid level.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

__all__ = ["farneback_flow"]


def _poly_expansion(img: np.ndarray, n: int, sigma: float):
    """Per-pixel quadratic fit f ~ c + b.d + d'Ad.

    Returns (A, b): A is (H, W, 2, 2) symmetric, b is (H, W, 2).
    """
    m = (n - 1) // 2
    x = np.arange(-m, m + 1, dtype=np.float64)
    a = np.exp(-(x**2) / (2.0 * sigma**2))

    # separable correlations give the weighted raw moments mu_pq
    kernels = {0: a, 1: a * x, 2: a * x**2}

    def corr(p_row: int, p_col: int) -> np.ndarray:
        tmp = ndimage.correlate1d(img, kernels[p_col], axis=1, mode="nearest")
        return ndimage.correlate1d(tmp, kernels[p_row], axis=0, mode="nearest")

    mu = {
        (0, 0): corr(0, 0),
        (0, 1): corr(0, 1),
        (1, 0): corr(1, 0),
        (0, 2): corr(0, 2),
        (2, 0): corr(2, 0),
        (1, 1): corr(1, 1),
    }

    # normal-equation matrix of the basis {1, u, v, u^2, v^2, uv} under a
    # (u = column offset, v = row offset); constant across pixels
    s0 = float(np.sum(a))
    s2 = float(np.sum(a * x**2))
    s4 = float(np.sum(a * x**4))
    gram = np.array(
        [
            [s0 * s0, 0, 0, s2 * s0, s0 * s2, 0],
            [0, s2 * s0, 0, 0, 0, 0],
            [0, 0, s0 * s2, 0, 0, 0],
            [s2 * s0, 0, 0, s4 * s0, s2 * s2, 0],
            [s0 * s2, 0, 0, s2 * s2, s0 * s4, 0],
            [0, 0, 0, 0, 0, s2 * s2],
        ]
    )
    inv = np.linalg.inv(gram)
    moments = np.stack(
        [mu[(0, 0)], mu[(0, 1)], mu[(1, 0)], mu[(0, 2)], mu[(2, 0)], mu[(1, 1)]], axis=-1
    )
    coef = moments @ inv.T  # c, bu, bv, auu, avv, auv

    b = np.stack([coef[..., 1], coef[..., 2]], axis=-1)
    A = np.empty(img.shape + (2, 2))
    A[..., 0, 0] = coef[..., 3]
    A[..., 1, 1] = coef[..., 4]
    A[..., 0, 1] = A[..., 1, 0] = 0.5 * coef[..., 5]
    return A, b


def _warp(field: np.ndarray, flow: np.ndarray) -> np.ndarray:
    h, w = field.shape[:2]
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    sample_r = np.clip(rows + flow[..., 1], 0, h - 1)
    sample_c = np.clip(cols + flow[..., 0], 0, w - 1)
    flat = field.reshape(h, w, -1)
    out = np.empty_like(flat)
    for k in range(flat.shape[-1]):
        out[..., k] = ndimage.map_coordinates(
            flat[..., k], [sample_r, sample_c], order=1, mode="nearest"
        )
    return out.reshape(field.shape)


def _flow_step(A1, b1, A2, b2, flow: np.ndarray, winsize: int) -> np.ndarray:
    A2w = _warp(A2, flow)
    b2w = _warp(b2, flow)
    A = 0.5 * (A1 + A2w)
    db = -0.5 * (b2w - b1) + np.einsum("...ij,...j->...i", A, flow)

    G = np.einsum("...ki,...kj->...ij", A, A)
    h = np.einsum("...ki,...k->...i", A, db)
    for i in range(2):
        h[..., i] = ndimage.uniform_filter(h[..., i], winsize, mode="nearest")
        for j in range(2):
            G[..., i, j] = ndimage.uniform_filter(G[..., i, j], winsize, mode="nearest")

    # regularized 2x2 solve, elementwise
    g11, g12, g22 = G[..., 0, 0], G[..., 0, 1], G[..., 1, 1]
    eps = 1e-9 * (1.0 + g11 + g22)
    det = (g11 + eps) * (g22 + eps) - g12 * g12
    u = ((g22 + eps) * h[..., 0] - g12 * h[..., 1]) / det
    v = ((g11 + eps) * h[..., 1] - g12 * h[..., 0]) / det
    return np.stack([u, v], axis=-1)


def farneback_flow(
    prev: np.ndarray,
    nxt: np.ndarray,
    pyr_scale: float = 0.5,
    levels: int = 3,
    winsize: int = 15,
    iterations: int = 3,
    poly_n: int = 5,
    poly_sigma: float = 1.1,
) -> np.ndarray:
    """Flow field (H, W, 2) of (dx, dy) in pixels/frame from prev to nxt."""
    if prev.shape != nxt.shape:
        raise ValueError("geometry mismatch")
    prev = prev.astype(np.float64)
    nxt = nxt.astype(np.float64)

    # build the coarse-to-fine scale list, never shrinking below the window
    scales = []
    for k in range(levels):
        scale = pyr_scale**k
        if min(prev.shape) * scale < 2 * poly_n + 1:
            break
        scales.append(scale)
    if not scales:
        scales = [1.0]

    flow = None
    for scale in reversed(scales):
        if scale == 1.0:
            p, q = prev, nxt
        else:
            sigma = 0.5 * (1.0 / scale - 1.0)
            p = ndimage.zoom(ndimage.gaussian_filter(prev, sigma), scale, order=1)
            q = ndimage.zoom(ndimage.gaussian_filter(nxt, sigma), scale, order=1)
        if flow is None:
            flow = np.zeros(p.shape + (2,))
        else:
            factor_r = p.shape[0] / flow.shape[0]
            factor_c = p.shape[1] / flow.shape[1]
            flow = np.stack(
                [
                    ndimage.zoom(flow[..., 0], (factor_r, factor_c), order=1) * factor_c,
                    ndimage.zoom(flow[..., 1], (factor_r, factor_c), order=1) * factor_r,
                ],
                axis=-1,
            )
        A1, b1 = _poly_expansion(p, poly_n, poly_sigma)
        A2, b2 = _poly_expansion(q, poly_n, poly_sigma)
        for _ in range(iterations):
            flow = _flow_step(A1, b1, A2, b2, flow, winsize)
    return flow
