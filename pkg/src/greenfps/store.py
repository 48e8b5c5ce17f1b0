"""Append-only CSV store of measurement points, keyed (sequence, f, crf).

CSV is the canonical format: diff-able, resumable, and directly consumable by
the labeling stage. A JSON sidecar records the meter, host, and config hash so
rows from incompatible runs are never silently mixed.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from greenfps.pareto import RdePoint

__all__ = ["MeasurementStore", "StoreError"]

COLUMNS = ("sequence", "f", "crf", "mpsnr_db", "bitrate_kbps", "e_enc_j", "e_dec_j")


class StoreError(ValueError):
    """Duplicate keys or incompatible metadata."""


def _fps_str(rate: Fraction) -> str:
    return str(rate.numerator) if rate.denominator == 1 else str(rate)


def _float_str(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return repr(float(value))


class MeasurementStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.meta_path = self.path.with_suffix(".meta.json")
        self._rows: dict[tuple[str, str, int], RdePoint] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is not None and tuple(reader.fieldnames) != COLUMNS:
                raise StoreError(f"unexpected columns {reader.fieldnames} in {self.path}")
            for row in reader:
                point = RdePoint(
                    sequence=row["sequence"],
                    frame_rate=Fraction(row["f"]),
                    crf=int(row["crf"]),
                    mpsnr_db=float(row["mpsnr_db"]),
                    bitrate_kbps=float(row["bitrate_kbps"]),
                    e_enc_j=float(row["e_enc_j"]),
                    e_dec_j=float(row["e_dec_j"]),
                )
                self._rows[self._key(point)] = point

    @staticmethod
    def _key(point: RdePoint) -> tuple[str, str, int]:
        return (point.sequence, _fps_str(point.frame_rate), point.crf)

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, key: tuple[str, Fraction, int]) -> bool:
        sequence, rate, crf = key
        return (sequence, _fps_str(Fraction(rate)), int(crf)) in self._rows

    def points(self) -> list[RdePoint]:
        return list(self._rows.values())

    def for_sequence(self, sequence: str) -> list[RdePoint]:
        return [p for p in self._rows.values() if p.sequence == sequence]

    def sequences(self) -> list[str]:
        return sorted({p.sequence for p in self._rows.values()})

    def append(self, points: Iterable[RdePoint]) -> int:
        """Append new rows; duplicate keys are an error. Returns rows written."""
        fresh = []
        for point in points:
            key = self._key(point)
            if key in self._rows:
                raise StoreError(f"duplicate key {key}")
            self._rows[key] = point
            fresh.append(point)
        if not fresh:
            return 0
        new_file = not self.path.exists()
        with open(self.path, "a", newline="") as handle:
            writer = csv.writer(handle)
            if new_file:
                writer.writerow(COLUMNS)
            for p in fresh:
                writer.writerow(
                    (
                        p.sequence,
                        _fps_str(p.frame_rate),
                        p.crf,
                        _float_str(p.mpsnr_db),
                        _float_str(p.bitrate_kbps),
                        _float_str(p.e_enc_j),
                        _float_str(p.e_dec_j),
                    )
                )
        return len(fresh)

    def write_metadata(self, meter: str, config_hash: str, errors: list[str] | None = None) -> None:
        meta = {
            "meter": meter,
            "host": platform.node(),
            "config_hash": config_hash,
            "errors": errors or [],
        }
        if self.meta_path.exists():
            existing = json.loads(self.meta_path.read_text())
            if existing.get("config_hash") not in (None, config_hash):
                raise StoreError(
                    f"store was written with config {existing['config_hash']}, now {config_hash}"
                )
            meta["errors"] = existing.get("errors", []) + meta["errors"]
        self.meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
