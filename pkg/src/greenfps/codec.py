"""External encoder/decoder orchestration via configurable command templates.

Real codecs (x265, ffmpeg, ...) are external processes described by template
strings; the bitrate is derived from the bitstream size and the input clip's
display duration, so it is independent of wall-clock conditions.
"""

from __future__ import annotations

import shlex
import subprocess
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from greenfps.energy import CommandFailedError
from greenfps.video import probe_y4m

__all__ = ["CommandTemplate", "EncodeResult", "DecodeResult", "TemplateError", "run_encode", "run_decode"]


class TemplateError(ValueError):
    """Unresolvable placeholder in a command template."""


@dataclass(frozen=True)
class CommandTemplate:
    """Command line with {input},{output},{crf},{fps},{width},{height} slots."""

    template: str

    def render(self, **values) -> list[str]:
        try:
            line = self.template.format(**values)
        except (KeyError, IndexError) as exc:
            raise TemplateError(f"unresolved placeholder {exc} in {self.template!r}") from exc
        return shlex.split(line)


@dataclass(frozen=True)
class EncodeResult:
    bitstream_path: Path
    bitrate_kbps: float
    wall_time: float
    crf: int
    frame_rate: Fraction


@dataclass(frozen=True)
class DecodeResult:
    output_path: Path
    wall_time: float


def _run(argv: list[str]) -> float:
    start = time.monotonic()
    proc = subprocess.run(argv, capture_output=True, text=True)
    wall = time.monotonic() - start
    if proc.returncode != 0:
        raise CommandFailedError(argv, proc.returncode, proc.stderr)
    return wall


def bitrate_kbps(bitstream_path: Path, source_duration_s: Fraction) -> float:
    """Payload bits over display duration, in kilobits per second."""
    size = Path(bitstream_path).stat().st_size
    if size == 0:
        raise CommandFailedError(["<bitrate>"], 1, f"empty bitstream {bitstream_path}")
    return 8.0 * size / float(source_duration_s) / 1000.0


def run_encode(
    template: CommandTemplate,
    seq_path: Path,
    crf: int,
    output_path: Path,
) -> EncodeResult:
    """Encode a Y4M clip at the given CRF and harvest bitrate + wall time."""
    if not 0 <= crf <= 51:
        raise ValueError(f"crf {crf} outside [0, 51]")
    width, height, rate, n_frames = probe_y4m(seq_path)
    argv = template.render(
        input=seq_path, output=output_path, crf=crf, fps=rate, width=width, height=height
    )
    wall = _run(argv)
    output_path = Path(output_path)
    if not output_path.exists() or output_path.stat().st_size == 0:
        raise CommandFailedError(argv, 1, "encoder produced no output")
    duration = Fraction(n_frames) / rate
    return EncodeResult(output_path, bitrate_kbps(output_path, duration), wall, crf, rate)


def run_decode(
    template: CommandTemplate,
    bitstream_path: Path,
    output_path: Path,
) -> DecodeResult:
    """Decode a bitstream back to Y4M for quality evaluation."""
    bitstream_path = Path(bitstream_path)
    if not bitstream_path.exists():
        raise FileNotFoundError(bitstream_path)
    argv = template.render(input=bitstream_path, output=output_path)
    wall = _run(argv)
    output_path = Path(output_path)
    if not output_path.exists() or output_path.stat().st_size == 0:
        raise CommandFailedError(argv, 1, "decoder produced no output")
    return DecodeResult(output_path, wall)
