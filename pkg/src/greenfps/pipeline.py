"""End-to-end orchestration: measure the (frame rate, CRF) grid, label
sequences with energy-aware policies, train/apply the frame-rate classifier,
and account for the selection overhead.

Everything downstream of measurement is a pure function of the store, so
reports are byte-identical across re-runs under the mock meter.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from greenfps import codec
from greenfps.bd import bd_triplet
from greenfps.config import RunConfig
from greenfps.energy import EnergyMeter, measure_command
from greenfps.features import FEATURE_COLUMNS, FeatureVector, extract_feature_vector
from greenfps.ml import Dataset, EnsembleModel, EvalReport, chi_square_scores, evaluate, fit_bagging, select_top_k
from greenfps.pareto import FrameRatePolicy, RdePoint, build_curves, select_policy
from greenfps.quality import mpsnr
from greenfps.resample import downsample
from greenfps.store import MeasurementStore
from greenfps.video import VideoSequence, read_y4m, write_y4m

log = logging.getLogger(__name__)

__all__ = [
    "pipeline_measure",
    "pipeline_label",
    "pipeline_train",
    "predict_frame_rate",
    "delta_e_select",
    "PolicyRow",
    "PolicyReport",
    "TrainResult",
    "DeltaEReport",
]


def _fps_str(rate: Fraction) -> str:
    return str(rate.numerator) if rate.denominator == 1 else str(rate)


def _load_sources(sequences, config: RunConfig) -> list[tuple[VideoSequence, Path]]:
    """Materialize sources as (sequence, y4m path) pairs inside the workdir."""
    out = []
    config.workdir.mkdir(parents=True, exist_ok=True)
    for item in sequences:
        if isinstance(item, VideoSequence):
            path = config.workdir / f"{item.name}_src.y4m"
            if not path.exists():
                write_y4m(item, path)
            out.append((item, path))
        else:
            path = Path(item)
            out.append((read_y4m(path), path))
    return out


def pipeline_measure(config: RunConfig, sequences, store: MeasurementStore) -> MeasurementStore:
    """Fill the store with one RdePoint per (sequence, frame rate, CRF).

    Cells already present are skipped, so interrupted runs resume; per-cell
    failures are recorded in the store metadata and do not abort the grid.
    """
    meter_name = config.meter
    errors: list[str] = []
    rows: list[RdePoint] = []
    encoder = config.encoder()
    decoder = config.decoder()

    for source, _src_path in _load_sources(sequences, config):
        rates = [f for f in config.ladder if f <= source.frame_rate]
        for rate in rates:
            tag = f"{source.name}_f{_fps_str(rate).replace('/', '-')}"
            ds_path = config.workdir / f"{tag}.y4m"
            if not ds_path.exists():
                write_y4m(downsample(source, rate), ds_path)
            for crf in config.crf_grid:
                if (source.name, rate, crf) in store:
                    continue
                try:
                    point = _measure_cell(
                        config, source, rate, crf, ds_path, tag, encoder, decoder
                    )
                    rows.append(point)
                except Exception as exc:  # record and continue with the grid
                    message = f"{source.name} f={_fps_str(rate)} crf={crf}: {exc}"
                    errors.append(message)
                    log.warning("cell failed: %s", message)
    rows.sort(key=lambda p: (p.sequence, -p.frame_rate, p.crf))
    store.append(rows)
    store.write_metadata(meter_name, config.config_hash(), errors)
    return store


def _measure_cell(
    config: RunConfig,
    source: VideoSequence,
    rate: Fraction,
    crf: int,
    ds_path: Path,
    tag: str,
    encoder,
    decoder,
) -> RdePoint:
    bitstream = config.workdir / f"{tag}_crf{crf}.bin"
    decoded_path = config.workdir / f"{tag}_crf{crf}_dec.y4m"
    enc_cmd = encoder.render(
        input=ds_path,
        output=bitstream,
        crf=crf,
        fps=rate,
        width=source.width,
        height=source.height,
    )
    dec_cmd = decoder.render(input=bitstream, output=decoded_path)

    meter = config.make_meter()
    if meter is None:
        codec._run(enc_cmd)
        e_enc = math.nan
        codec._run(dec_cmd)
        e_dec = math.nan
    else:
        e_enc = measure_command(meter, enc_cmd, config.ci).e_net
        e_dec = measure_command(meter, dec_cmd, config.ci).e_net

    n_ds = int(len(source) * rate / source.frame_rate)
    bitrate = codec.bitrate_kbps(bitstream, Fraction(n_ds) / rate)
    decoded = read_y4m(decoded_path)
    score = mpsnr(source, decoded)
    return RdePoint(
        sequence=source.name,
        frame_rate=rate,
        crf=crf,
        mpsnr_db=score.value,
        bitrate_kbps=bitrate,
        e_enc_j=e_enc,
        e_dec_j=e_dec,
    )


# --- labeling and the policy report -------------------------------------------


@dataclass(frozen=True)
class PolicyRow:
    sequence: str
    policy: FrameRatePolicy
    bdr: float
    bdee: float
    bdde: float


@dataclass
class PolicyReport:
    """Ground-truth table: one policy row per sequence plus group averages."""

    rows: list[PolicyRow]
    crf_subset: tuple[int, ...]
    native_rate: Fraction

    def averages(self) -> tuple[float, float, float]:
        return tuple(
            float(np.mean([getattr(r, m) for r in self.rows])) if self.rows else 0.0
            for m in ("bdr", "bdee", "bdde")
        )

    def downsampled_averages(self) -> tuple[float, float, float]:
        subset = [r for r in self.rows if not r.policy.is_all(self.native_rate)]
        if not subset:
            return (0.0, 0.0, 0.0)
        return tuple(float(np.mean([getattr(r, m) for r in subset])) for m in ("bdr", "bdee", "bdde"))


def pipeline_label(store: MeasurementStore, config: RunConfig) -> PolicyReport:
    """Select a policy per sequence and attach its BD triplet."""
    rows = []
    for name in store.sequences():
        points = store.for_sequence(name)
        policy = select_policy(points, config.crf_subset, config.energy_axis)
        bdr, bdee, bdde = bd_triplet(points, policy)
        rows.append(PolicyRow(name, policy, bdr, bdee, bdde))
    return PolicyReport(rows, tuple(sorted(config.crf_subset)), config.native_rate)


def render_policy_report_csv(report: PolicyReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("sequence", "policy", "bdr_percent", "bdee_percent", "bdde_percent"))
    for r in report.rows:
        writer.writerow((r.sequence, r.policy.braces(), f"{r.bdr:.2f}", f"{r.bdee:.2f}", f"{r.bdde:.2f}"))
    for label, avg in (
        ("All sequences", report.averages()),
        ("Downsampled sequences", report.downsampled_averages()),
    ):
        writer.writerow((label, "Average BD", f"{avg[0]:.2f}", f"{avg[1]:.2f}", f"{avg[2]:.2f}"))
    return buf.getvalue()


def parse_policy_report_csv(text: str, crf_subset=(18, 23, 28, 33)) -> PolicyReport:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[:2] != ["sequence", "policy"]:
        raise ValueError("not a policy report CSV")
    rows = []
    native = None
    for record in reader:
        sequence, policy_str, bdr, bdee, bdde = record
        if policy_str == "Average BD":
            continue
        rates = tuple(Fraction(tok) for tok in policy_str.strip("{}").split(","))
        policy = FrameRatePolicy(tuple(crf_subset), rates)
        native = max(native or rates[0], *rates)
        rows.append(PolicyRow(sequence, policy, float(bdr), float(bdee), float(bdde)))
    return PolicyReport(rows, tuple(crf_subset), native or Fraction(120))


def render_policy_report_json(report: PolicyReport) -> str:
    avg, davg = report.averages(), report.downsampled_averages()
    payload = {
        "crf_subset": list(report.crf_subset),
        "policies": [
            {
                "sequence": r.sequence,
                "frame_rates": {str(c): _fps_str(r.policy.rate_for(c)) for c in report.crf_subset},
                "bdr_percent": round(r.bdr, 2),
                "bdee_percent": round(r.bdee, 2),
                "bdde_percent": round(r.bdde, 2),
            }
            for r in report.rows
        ],
        "average_bd": {"bdr": round(avg[0], 2), "bdee": round(avg[1], 2), "bdde": round(avg[2], 2)},
        "downsampled_average_bd": {
            "bdr": round(davg[0], 2),
            "bdee": round(davg[1], 2),
            "bdde": round(davg[2], 2),
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_curve_data(store: MeasurementStore, outdir: Path, energy_axis: str = "enc") -> list[Path]:
    """Per-sequence CSV curve bundles (quality vs energy, one block per frame
    rate) ready for gnuplot-style plotting."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in store.sequences():
        curves = build_curves(store.for_sequence(name))
        path = outdir / f"{name}_curves.csv"
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(("frame_rate", "crf", "mpsnr_db", f"e_{energy_axis}_j", "bitrate_kbps"))
            for rate in sorted(curves, reverse=True):
                for p in curves[rate]:
                    writer.writerow(
                        (_fps_str(rate), p.crf, p.mpsnr_db, p.energy(energy_axis), p.bitrate_kbps)
                    )
        written.append(path)
    return written


# --- features and labels tables ------------------------------------------------


def write_features_csv(path: Path, table: dict[tuple[str, int], FeatureVector]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("sequence",) + FEATURE_COLUMNS)
        for (sequence, _crf), fv in sorted(table.items()):
            writer.writerow((sequence,) + tuple(repr(float(getattr(fv, c))) if c != "crf" else fv.crf for c in FEATURE_COLUMNS))


def read_features_csv(path: Path) -> dict[tuple[str, int], FeatureVector]:
    table = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            kwargs = {c: (int(row[c]) if c == "crf" else float(row[c])) for c in FEATURE_COLUMNS}
            fv = FeatureVector(**kwargs)
            table[(row["sequence"], fv.crf)] = fv
    return table


def write_labels_csv(path: Path, report: PolicyReport) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("sequence", "crf", "frame_rate"))
        for r in sorted(report.rows, key=lambda r: r.sequence):
            for c in report.crf_subset:
                writer.writerow((r.sequence, c, _fps_str(r.policy.rate_for(c))))


def read_labels_csv(path: Path) -> dict[tuple[str, int], Fraction]:
    labels = {}
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            labels[(row["sequence"], int(row["crf"]))] = Fraction(row["frame_rate"])
    return labels


# --- training --------------------------------------------------------------------


@dataclass
class TrainResult:
    model: EnsembleModel
    evaluation: EvalReport
    chi2_scores: np.ndarray
    selected: tuple[int, ...]


def build_dataset(
    features: dict[tuple[str, int], FeatureVector],
    labels: dict[tuple[str, int], Fraction],
) -> Dataset:
    keys = sorted(set(features) & set(labels))
    if not keys:
        raise ValueError("no overlapping (sequence, crf) keys between features and labels")
    X = np.stack([features[k].as_array() for k in keys])
    y = np.array([float(labels[k]) for k in keys])
    return Dataset(X, y, FEATURE_COLUMNS, keys=list(keys))


def pipeline_train(
    store: MeasurementStore,
    features: dict[tuple[str, int], FeatureVector],
    config: RunConfig,
    report: PolicyReport | None = None,
) -> TrainResult:
    """Chi-square selection, bagged-tree fit on all rows, and the repeated
    random-split evaluation."""
    if report is None:
        report = pipeline_label(store, config)
    labels = {
        (r.sequence, c): r.policy.rate_for(c) for r in report.rows for c in report.crf_subset
    }
    dataset = build_dataset(features, labels)
    ml = config.ml
    scores = chi_square_scores(dataset.features, dataset.labels, ml.chi2_bins)
    selected = select_top_k(scores, min(ml.top_k, dataset.features.shape[1]))
    model = fit_bagging(
        dataset,
        n_estimators=ml.n_estimators,
        seed=ml.seed,
        max_depth=ml.max_depth,
        min_leaf=ml.min_leaf,
        selected_features=selected,
    )
    evaluation = evaluate(
        dataset,
        n_iterations=ml.n_iterations,
        train_fraction=ml.train_fraction,
        seed=ml.seed,
        n_estimators=ml.n_estimators,
        max_depth=ml.max_depth,
        min_leaf=ml.min_leaf,
        selected_features=selected,
        protocol=ml.protocol,
    )
    return TrainResult(model, evaluation, scores, selected)


def _nearest_ladder_rate(value: float, ladder: tuple[Fraction, ...]) -> Fraction:
    return min(ladder, key=lambda r: abs(float(r) - value))


def predict_frame_rate(
    model: EnsembleModel, seq: VideoSequence, crf: int, config: RunConfig
) -> Fraction:
    """Recommend an energy-aware frame rate for one sequence/CRF pair."""
    fv = extract_feature_vector(seq, crf, config.features)
    return _nearest_ladder_rate(model.predict(fv.as_array()), config.ladder)


# --- selection-overhead accounting ---------------------------------------------


@dataclass
class DeltaEReport:
    rows: list[tuple[str, float]]

    def average(self) -> float:
        return float(np.mean([v for _, v in self.rows])) if self.rows else 0.0


def _overhead_energy(
    configured: float | None, command: str | None, meter: EnergyMeter | None, config: RunConfig
) -> float:
    if configured is not None:
        return configured
    if command is None or meter is None:
        raise ValueError("overhead energy not configured and no command/meter to measure it")
    return measure_command(meter, command, config.ci).e_net


def delta_e_select(
    store: MeasurementStore,
    model: EnsembleModel,
    sequence: str,
    features: dict[int, FeatureVector],
    config: RunConfig,
    feature_cmd: str | None = None,
    classify_cmd: str | None = None,
) -> float:
    """Relative energy of predict-then-encode versus native-rate encoding.

    Feature extraction is charged once per sequence (features do not depend
    on CRF); classification is charged once per CRF of the subset.
    """
    points = {(p.frame_rate, p.crf): p for p in store.for_sequence(sequence)}
    native = config.native_rate
    meter = config.make_meter()
    e_feat = _overhead_energy(config.feature_energy_j, feature_cmd, meter, config)
    e_classify = _overhead_energy(config.classify_energy_j, classify_cmd, meter, config)

    e_native = 0.0
    e_selected = e_feat
    for crf in sorted(config.crf_subset):
        if (native, crf) not in points:
            raise ValueError(f"missing native measurement for {sequence} crf={crf}")
        e_native += points[(native, crf)].e_enc_j
        predicted = _nearest_ladder_rate(model.predict(features[crf].as_array()), config.ladder)
        if (predicted, crf) not in points:
            raise ValueError(f"missing measurement for {sequence} f={predicted} crf={crf}")
        e_selected += e_classify + points[(predicted, crf)].e_enc_j
    return 100.0 * (e_selected - e_native) / e_native


def build_delta_e_report(
    store: MeasurementStore,
    model: EnsembleModel,
    features: dict[tuple[str, int], FeatureVector],
    config: RunConfig,
) -> DeltaEReport:
    rows = []
    for name in store.sequences():
        per_crf = {crf: fv for (seq, crf), fv in features.items() if seq == name}
        rows.append((name, delta_e_select(store, model, name, per_crf, config)))
    return DeltaEReport(rows)


def render_delta_e_csv(report: DeltaEReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("sequence", "delta_e_select_percent"))
    for name, value in report.rows:
        writer.writerow((name, f"{value:.2f}"))
    writer.writerow(("Average", f"{report.average():.2f}"))
    return buf.getvalue()


def parse_delta_e_csv(text: str) -> DeltaEReport:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != ["sequence", "delta_e_select_percent"]:
        raise ValueError("not a delta-e report CSV")
    rows = [(name, float(v)) for name, v in reader if name != "Average"]
    return DeltaEReport(rows)


def extract_features_for_store(
    sequences, config: RunConfig
) -> dict[tuple[str, int], FeatureVector]:
    """Feature vectors for every (source sequence, subset CRF) pair.

    The statistics are computed once per sequence on the native-rate source;
    only the CRF entry varies across the subset.
    """
    table: dict[tuple[str, int], FeatureVector] = {}
    for source, _path in _load_sources(sequences, config):
        crfs = sorted(config.crf_subset)
        base = extract_feature_vector(source, crfs[0], config.features)
        for crf in crfs:
            table[(source.name, crf)] = dataclasses.replace(base, crf=crf)
    return table
