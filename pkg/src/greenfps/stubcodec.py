"""Hermetic test-double codecs, runnable as external commands.

Two modes so the full pipeline is testable without x265/ffmpeg:

* ``copy``     identity codec: the bitstream is the Y4M byte stream itself.
* ``encode``   quantizing stub: luma/chroma are quantized with a step that
  grows with CRF (step = round(2^(crf/6)), lossless at CRF 0) and the planes
  are zlib-compressed, so bitrate falls and distortion rises monotonically
  with CRF, like a real encoder. ``decode`` inverts the container.

Usage: python -m greenfps.stubcodec {copy|encode|decode} ...
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import zlib
from fractions import Fraction
from pathlib import Path

import numpy as np

from greenfps.video import Frame, PixelFormat, VideoSequence, read_y4m, write_y4m

MAGIC = b"GFPSSTUB"
ZLIB_LEVEL = 6  # fixed so bitstreams are bit-reproducible


def quant_step(crf: int) -> int:
    return max(1, round(2.0 ** (crf / 6.0)))


def encode(input_path: Path, output_path: Path, crf: int) -> None:
    seq = read_y4m(input_path)
    step = quant_step(crf)
    header = {
        "width": seq.width,
        "height": seq.height,
        "rate": str(seq.frame_rate),
        "subsampling": seq.fmt.subsampling,
        "bit_depth": seq.fmt.bit_depth,
        "n_frames": len(seq),
        "crf": crf,
        "step": step,
    }
    payload = bytearray()
    for frame in seq.frames:
        for plane in (frame.y, frame.u, frame.v):
            q = np.rint(plane.astype(np.float64) / step).astype(np.uint16)
            payload += q.astype("<u2").tobytes()
    blob = zlib.compress(bytes(payload), ZLIB_LEVEL)
    with open(output_path, "wb") as out:
        out.write(MAGIC)
        head = json.dumps(header, sort_keys=True).encode("ascii")
        out.write(len(head).to_bytes(4, "little"))
        out.write(head)
        out.write(blob)


def decode(input_path: Path, output_path: Path) -> None:
    raw = Path(input_path).read_bytes()
    if not raw.startswith(MAGIC):
        # identity bitstreams are plain Y4M; pass them through
        if raw.startswith(b"YUV4MPEG2"):
            Path(output_path).write_bytes(raw)
            return
        raise ValueError(f"{input_path} is not a stub bitstream")
    head_len = int.from_bytes(raw[len(MAGIC) : len(MAGIC) + 4], "little")
    head_end = len(MAGIC) + 4 + head_len
    header = json.loads(raw[len(MAGIC) + 4 : head_end].decode("ascii"))
    samples = np.frombuffer(zlib.decompress(raw[head_end:]), dtype="<u2")

    fmt = PixelFormat(header["subsampling"], header["bit_depth"])
    w, h = header["width"], header["height"]
    ch, cw = fmt.chroma_shape(w, h)
    step = header["step"]
    per_frame = w * h + 2 * ch * cw
    frames = []
    for i in range(header["n_frames"]):
        chunk = samples[i * per_frame : (i + 1) * per_frame].astype(np.int64) * step
        chunk = np.minimum(chunk, fmt.max_value).astype(fmt.dtype)
        y = chunk[: w * h].reshape(h, w)
        u = chunk[w * h : w * h + ch * cw].reshape(ch, cw)
        v = chunk[w * h + ch * cw :].reshape(ch, cw)
        frames.append(Frame(y, u, v, fmt))
    write_y4m(VideoSequence(frames, Fraction(header["rate"])), output_path)


def main(args: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="stubcodec", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("copy", "encode", "decode"):
        p = sub.add_parser(mode)
        p.add_argument("--input", required=True, type=Path)
        p.add_argument("--output", required=True, type=Path)
        if mode == "encode":
            p.add_argument("--crf", required=True, type=int)
    ns = parser.parse_args(args)
    if ns.mode == "copy":
        shutil.copyfile(ns.input, ns.output)
    elif ns.mode == "encode":
        encode(ns.input, ns.output, ns.crf)
    else:
        decode(ns.input, ns.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
