"""Shared builders for small planar test sequences."""

from fractions import Fraction

import numpy as np

from greenfps.video import Frame, PixelFormat, VideoSequence


def luma_seq(lumas, rate=Fraction(30), name="clip", bit_depth=8) -> VideoSequence:
    """Sequence from a list of 2-D luma arrays; chroma is neutral gray."""
    fmt = PixelFormat("420", bit_depth)
    frames = []
    for y in lumas:
        y = np.asarray(y, dtype=fmt.dtype)
        ch, cw = fmt.chroma_shape(y.shape[1], y.shape[0])
        mid = (fmt.max_value + 1) // 2
        frames.append(
            Frame(y, np.full((ch, cw), mid, fmt.dtype), np.full((ch, cw), mid, fmt.dtype), fmt)
        )
    return VideoSequence(frames, Fraction(rate), name=name)


def constant_seq(value=128, n=4, w=8, h=8, rate=Fraction(30), name="flat") -> VideoSequence:
    return luma_seq([np.full((h, w), value)] * n, rate=rate, name=name)
