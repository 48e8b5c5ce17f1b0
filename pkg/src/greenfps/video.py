"""Planar YUV video sequences: Y4M and raw-YUV I/O plus synthetic generators.

Sequences are lists of planar frames with an exact rational frame rate.
All downstream quality/feature math operates on the luma plane only; chroma
is carried through I/O and resampling untouched except for averaging.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

__all__ = [
    "PixelFormat",
    "Frame",
    "VideoSequence",
    "VideoFormatError",
    "read_y4m",
    "write_y4m",
    "probe_y4m",
    "read_raw_yuv",
    "generate_synthetic",
]

PathLike = Union[str, Path]


class VideoFormatError(ValueError):
    """Raised for malformed or unsupported video streams."""


@dataclass(frozen=True)
class PixelFormat:
    """Chroma subsampling ("420", "422", "444") and bit depth (8 or 10)."""

    subsampling: str = "420"
    bit_depth: int = 8

    def __post_init__(self) -> None:
        if self.subsampling not in ("420", "422", "444"):
            raise VideoFormatError(f"unsupported subsampling {self.subsampling!r}")
        if self.bit_depth not in (8, 10):
            raise VideoFormatError(f"unsupported bit depth {self.bit_depth}")

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.uint8 if self.bit_depth == 8 else np.uint16)

    def chroma_shape(self, width: int, height: int) -> tuple[int, int]:
        """(height, width) of one chroma plane."""
        if self.subsampling == "420":
            return height // 2, width // 2
        if self.subsampling == "422":
            return height, width // 2
        return height, width

    def frame_bytes(self, width: int, height: int) -> int:
        ch, cw = self.chroma_shape(width, height)
        samples = width * height + 2 * ch * cw
        return samples * (2 if self.bit_depth == 10 else 1)


@dataclass
class Frame:
    """One planar frame; ``y`` is (H, W), chroma planes are subsampled."""

    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    fmt: PixelFormat = field(default_factory=PixelFormat)

    def __post_init__(self) -> None:
        h, w = self.y.shape
        expect = self.fmt.chroma_shape(w, h)
        if self.u.shape != expect or self.v.shape != expect:
            raise VideoFormatError(
                f"chroma shape {self.u.shape} inconsistent with {w}x{h} {self.fmt.subsampling}"
            )
        if self.y.size and int(self.y.max()) > self.fmt.max_value:
            raise VideoFormatError("luma sample exceeds format range")

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]


@dataclass
class VideoSequence:
    """Ordered frames at a positive rational frame rate.

    Immutable by convention after construction; safe to share across workers.
    """

    frames: list[Frame]
    frame_rate: Fraction
    name: str = ""

    def __post_init__(self) -> None:
        if not self.frames:
            raise VideoFormatError("sequence needs at least one frame")
        if self.frame_rate <= 0:
            raise VideoFormatError("frame rate must be positive")
        first = self.frames[0]
        for f in self.frames:
            if f.y.shape != first.y.shape or f.fmt != first.fmt:
                raise VideoFormatError("frames disagree on geometry or format")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def fmt(self) -> PixelFormat:
        return self.frames[0].fmt

    @property
    def duration(self) -> Fraction:
        """Display duration in seconds."""
        return Fraction(len(self.frames)) / self.frame_rate


# --- Y4M ------------------------------------------------------------------

_CHROMA_TAGS = {
    "420": ("420", 8),
    "420jpeg": ("420", 8),
    "420mpeg2": ("420", 8),
    "420paldv": ("420", 8),
    "422": ("422", 8),
    "444": ("444", 8),
    "420p10": ("420", 10),
    "422p10": ("422", 10),
    "444p10": ("444", 10),
}


def _format_tag(fmt: PixelFormat) -> str:
    return fmt.subsampling + ("p10" if fmt.bit_depth == 10 else "")


def _read_plane(stream: BinaryIO, shape: tuple[int, int], fmt: PixelFormat) -> np.ndarray:
    n = shape[0] * shape[1]
    width = 2 if fmt.bit_depth == 10 else 1
    raw = stream.read(n * width)
    if len(raw) != n * width:
        raise VideoFormatError("truncated frame payload")
    dtype = "<u2" if fmt.bit_depth == 10 else np.uint8
    return np.frombuffer(raw, dtype=dtype).reshape(shape).astype(fmt.dtype)


def read_y4m(path: PathLike) -> VideoSequence:
    """Parse a YUV4MPEG2 stream into a :class:`VideoSequence`."""
    with open(path, "rb") as stream:
        header = stream.readline()
        if not header.startswith(b"YUV4MPEG2"):
            raise VideoFormatError("not a YUV4MPEG2 stream")
        width = height = 0
        rate: Fraction | None = None
        chroma = "420jpeg"
        for token in header.decode("ascii", "replace").split()[1:]:
            key, val = token[0], token[1:]
            if key == "W":
                width = int(val)
            elif key == "H":
                height = int(val)
            elif key == "F":
                num, den = val.split(":")
                rate = Fraction(int(num), int(den))
            elif key == "C":
                chroma = val
            # I (interlace), A (aspect), X (extensions) are accepted and ignored
        if width <= 0 or height <= 0 or rate is None:
            raise VideoFormatError("header missing W/H/F")
        if chroma not in _CHROMA_TAGS:
            raise VideoFormatError(f"unsupported chroma tag C{chroma}")
        subsampling, depth = _CHROMA_TAGS[chroma]
        fmt = PixelFormat(subsampling, depth)

        frames: list[Frame] = []
        cshape = fmt.chroma_shape(width, height)
        while True:
            marker = stream.readline()
            if not marker:
                break
            if not marker.startswith(b"FRAME"):
                raise VideoFormatError("missing FRAME marker")
            y = _read_plane(stream, (height, width), fmt)
            u = _read_plane(stream, cshape, fmt)
            v = _read_plane(stream, cshape, fmt)
            frames.append(Frame(y, u, v, fmt))
        if not frames:
            raise VideoFormatError("no frames")
    return VideoSequence(frames, rate, name=Path(path).stem)


def write_y4m(seq: VideoSequence, path: PathLike) -> None:
    """Emit ``seq`` as a conforming YUV4MPEG2 stream; inverse of read_y4m."""
    fmt = seq.fmt
    rate = seq.frame_rate
    header = (
        f"YUV4MPEG2 W{seq.width} H{seq.height} "
        f"F{rate.numerator}:{rate.denominator} Ip A1:1 C{_format_tag(fmt)}\n"
    )
    buf = io.BytesIO()
    buf.write(header.encode("ascii"))
    disk_dtype = "<u2" if fmt.bit_depth == 10 else np.uint8
    for frame in seq.frames:
        buf.write(b"FRAME\n")
        for plane in (frame.y, frame.u, frame.v):
            buf.write(plane.astype(disk_dtype).tobytes())
    Path(path).write_bytes(buf.getvalue())


def probe_y4m(path: PathLike) -> tuple[int, int, Fraction, int]:
    """(width, height, frame_rate, n_frames) from a Y4M without loading planes."""
    with open(path, "rb") as stream:
        header = stream.readline()
        if not header.startswith(b"YUV4MPEG2"):
            raise VideoFormatError("not a YUV4MPEG2 stream")
        width = height = 0
        rate: Fraction | None = None
        chroma = "420jpeg"
        for token in header.decode("ascii", "replace").split()[1:]:
            key, val = token[0], token[1:]
            if key == "W":
                width = int(val)
            elif key == "H":
                height = int(val)
            elif key == "F":
                num, den = val.split(":")
                rate = Fraction(int(num), int(den))
            elif key == "C":
                chroma = val
        if width <= 0 or height <= 0 or rate is None:
            raise VideoFormatError("header missing W/H/F")
        if chroma not in _CHROMA_TAGS:
            raise VideoFormatError(f"unsupported chroma tag C{chroma}")
        fmt = PixelFormat(*_CHROMA_TAGS[chroma])
        payload = fmt.frame_bytes(width, height)
        n_frames = 0
        while True:
            marker = stream.readline()
            if not marker:
                break
            if not marker.startswith(b"FRAME"):
                raise VideoFormatError("missing FRAME marker")
            stream.seek(payload, 1)
            n_frames += 1
    return width, height, rate, n_frames


# --- headerless raw YUV -----------------------------------------------------


def read_raw_yuv(
    path: PathLike,
    width: int,
    height: int,
    frame_rate: Fraction,
    fmt: PixelFormat = PixelFormat(),
) -> VideoSequence:
    """Read headerless planar YUV; geometry and rate come from the caller."""
    size = Path(path).stat().st_size
    fbs = fmt.frame_bytes(width, height)
    if size == 0 or size % fbs != 0:
        raise VideoFormatError(
            f"file size {size} is not a positive multiple of frame size {fbs}"
        )
    frames = []
    cshape = fmt.chroma_shape(width, height)
    with open(path, "rb") as stream:
        for _ in range(size // fbs):
            y = _read_plane(stream, (height, width), fmt)
            u = _read_plane(stream, cshape, fmt)
            v = _read_plane(stream, cshape, fmt)
            frames.append(Frame(y, u, v, fmt))
    return VideoSequence(frames, frame_rate, name=Path(path).stem)


# --- synthetic content -------------------------------------------------------

SYNTHETIC_KINDS = ("constant", "global_translation", "local_motion", "dynamic_texture")


def _smooth_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Periodic smooth texture in [48, 208], float64."""
    from scipy import ndimage  # deferred: keeps plain I/O users scipy-free

    noise = rng.uniform(0.0, 1.0, size=(height, width))
    field = ndimage.gaussian_filter(noise, sigma=max(2.0, min(height, width) / 12.0), mode="wrap")
    lo, hi = field.min(), field.max()
    if hi - lo < 1e-12:
        return np.full((height, width), 128.0)
    return 48.0 + 160.0 * (field - lo) / (hi - lo)


def _neutral_chroma(fmt: PixelFormat, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    mid = (fmt.max_value + 1) // 2
    shape = fmt.chroma_shape(width, height)
    return (
        np.full(shape, mid, dtype=fmt.dtype),
        np.full(shape, mid, dtype=fmt.dtype),
    )


def generate_synthetic(
    kind: str,
    *,
    width: int = 64,
    height: int = 64,
    n_frames: int = 24,
    frame_rate: Fraction = Fraction(120),
    magnitude: int = 1,
    value: int = 128,
    seed: int = 0,
    fmt: PixelFormat = PixelFormat(),
    name: str = "",
) -> VideoSequence:
    """Deterministic test content mirroring the studied content classes.

    constant            flat frames at ``value``
    global_translation  smooth texture shifted ``magnitude`` px/frame (wrap)
    local_motion        static texture with one patch orbiting at ``magnitude`` px/frame
    dynamic_texture     spatially irregular field evolving as a continuum
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    if width <= 0 or height <= 0:
        raise ValueError("zero-area geometry")
    rng = np.random.default_rng(seed)
    u, v = _neutral_chroma(fmt, width, height)
    scale = (fmt.max_value + 1) // 256  # luma patterns are designed 8-bit

    lumas: list[np.ndarray] = []
    if kind == "constant":
        lumas = [np.full((height, width), value, dtype=fmt.dtype)] * n_frames
    elif kind == "global_translation":
        base = _smooth_field(rng, height, width)
        for i in range(n_frames):
            shifted = np.roll(base, i * magnitude, axis=1)
            lumas.append(np.rint(shifted * max(scale, 1)).astype(fmt.dtype))
    elif kind == "local_motion":
        base = np.rint(_smooth_field(rng, height, width)).astype(np.int64)
        side = max(2, min(width, height) // 8)
        radius = max(1, min(width, height) // 4 - side)
        cx, cy = width // 2, height // 2
        for i in range(n_frames):
            angle = 2.0 * np.pi * (i * magnitude) / max(n_frames, 1)
            px = int(cx + radius * np.cos(angle)) - side // 2
            py = int(cy + radius * np.sin(angle)) - side // 2
            frame = base.copy()
            frame[py : py + side, px : px + side] = 240
            lumas.append((frame * max(scale, 1)).astype(fmt.dtype))
    else:  # dynamic_texture
        from scipy import ndimage

        state = _smooth_field(rng, height, width)
        rho = 0.85
        for _ in range(n_frames):
            lumas.append(np.rint(np.clip(state, 0, 255) * max(scale, 1)).astype(fmt.dtype))
            innovation = ndimage.gaussian_filter(
                rng.normal(0.0, 1.0, size=(height, width)), sigma=2.0, mode="wrap"
            )
            state = 128.0 + rho * (state - 128.0) + 12.0 * magnitude * innovation

    frames = [Frame(luma, u.copy(), v.copy(), fmt) for luma in lumas]
    return VideoSequence(frames, frame_rate, name=name or f"synthetic_{kind}")
