"""Batch command-line interface.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 subprocess failure.
The meter backend can be forced with the GREENFPS_METER environment variable.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from fractions import Fraction
from pathlib import Path

from greenfps import pipeline
from greenfps.bd import RdCurve, bd_delta
from greenfps.config import METER_ENV_VAR, RunConfig, load_config
from greenfps.energy import CiPolicy, CommandFailedError, MeterError, measure_command
from greenfps.features import FEATURE_COLUMNS, extract_feature_vector
from greenfps.ml import EnsembleModel
from greenfps.quality import mpsnr, psnr
from greenfps.resample import downsample
from greenfps.store import COLUMNS as STORE_COLUMNS
from greenfps.store import MeasurementStore, StoreError
from greenfps.video import VideoFormatError, read_y4m, write_y4m

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SUBPROCESS = 3

_METRIC_COLUMN = {"rate": "bitrate_kbps", "enc": "e_enc_j", "dec": "e_dec_j"}


class _UsageError(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(EXIT_USAGE)


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="TOML run config")


def _cmd_downsample(ns) -> int:
    seq = read_y4m(ns.input)
    write_y4m(downsample(seq, Fraction(ns.fps_out)), ns.output)
    return EXIT_OK


def _cmd_quality(ns) -> int:
    ref = read_y4m(ns.ref)
    test = read_y4m(ns.test)
    score = psnr(ref, test) if ns.metric == "psnr" else mpsnr(ref, test)
    print(json.dumps({"value_db": score.value, "n_compared": score.n_compared}))
    return EXIT_OK


def _cmd_features(ns) -> int:
    config = load_config(ns.config)
    seq = read_y4m(ns.input)
    fv = extract_feature_vector(seq, ns.crf, config.features)
    out = open(ns.output, "w", newline="") if ns.output else sys.stdout
    writer = csv.writer(out)
    writer.writerow(("sequence",) + FEATURE_COLUMNS)
    writer.writerow((seq.name,) + tuple(getattr(fv, c) for c in FEATURE_COLUMNS))
    if ns.output:
        out.close()
    return EXIT_OK


def _cmd_measure(ns) -> int:
    config = load_config(ns.config)
    meter = config.make_meter()
    if meter is None:
        raise MeterError("measuring requires a meter backend (mock or rapl)")
    policy = config.ci
    if ns.reps_max is not None:
        policy = CiPolicy(
            alpha=policy.alpha,
            beta=policy.beta,
            min_reps=policy.min_reps,
            max_reps=ns.reps_max,
            cache_idle=policy.cache_idle,
            idle_cache_ttl_s=policy.idle_cache_ttl_s,
        )
    result = measure_command(meter, ns.cmd, policy)
    print(json.dumps(dataclasses.asdict(result)))
    return EXIT_OK


def _cmd_pipeline_measure(ns) -> int:
    config = load_config(ns.config)
    store = MeasurementStore(ns.store)
    before = len(store)
    pipeline.pipeline_measure(config, ns.sequences, store)
    print(f"store {ns.store}: {len(store) - before} new rows, {len(store)} total")
    return EXIT_OK


def _cmd_label(ns) -> int:
    config = load_config(ns.config)
    store = MeasurementStore(ns.store)
    report = pipeline.pipeline_label(store, config)
    csv_text = pipeline.render_policy_report_csv(report)
    if ns.out_csv:
        Path(ns.out_csv).write_text(csv_text)
    if ns.out_json:
        Path(ns.out_json).write_text(pipeline.render_policy_report_json(report))
    if not ns.out_csv and not ns.out_json:
        sys.stdout.write(csv_text)
    return EXIT_OK


def _read_curve_csv(path: Path, metric: str) -> RdCurve:
    """Curve points from a store-format CSV or a plain (quality_db, metric) CSV."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        records = list(reader)
    if tuple(header) == STORE_COLUMNS:
        q_col = header.index("mpsnr_db")
        m_col = header.index(_METRIC_COLUMN[metric])
    elif header == ["quality_db", "metric"]:
        q_col, m_col = 0, 1
    else:
        raise ValueError(f"unrecognized curve CSV header in {path}")
    return RdCurve(tuple((float(r[q_col]), float(r[m_col])) for r in records))


def _cmd_bd(ns) -> int:
    ref = _read_curve_csv(ns.ref, ns.metric)
    test = _read_curve_csv(ns.test, ns.metric)
    result = bd_delta(ref, test, ns.interpolation)
    print(json.dumps({"bd_percent": result.bd_percent, "overlap_db": result.overlap_db}))
    return EXIT_OK


def _cmd_train(ns) -> int:
    config = load_config(ns.config)
    store = MeasurementStore(ns.store)
    features = pipeline.read_features_csv(ns.features)
    result = pipeline.pipeline_train(store, features, config)
    result.model.save(ns.model_out)
    evaluation = result.evaluation
    report = {
        "accuracy": evaluation.accuracy,
        "per_iteration": evaluation.per_iteration,
        "class_order": list(evaluation.class_order),
        "confusion": evaluation.confusion_rows(),
        "higher_rate_error_fraction": evaluation.higher_rate_error_fraction,
        "selected_features": [FEATURE_COLUMNS[i] for i in result.selected],
        "chi2_scores": {name: float(s) for name, s in zip(FEATURE_COLUMNS, result.chi2_scores)},
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if ns.report_out:
        Path(ns.report_out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_predict(ns) -> int:
    config = load_config(ns.config)
    model = EnsembleModel.load(ns.model)
    seq = read_y4m(ns.input)
    rate = pipeline.predict_frame_rate(model, seq, ns.crf, config)
    print(json.dumps({"sequence": seq.name, "crf": ns.crf, "frame_rate": str(rate)}))
    return EXIT_OK


def _cmd_delta_e(ns) -> int:
    config = load_config(ns.config)
    store = MeasurementStore(ns.store)
    model = EnsembleModel.load(ns.model)
    features = pipeline.read_features_csv(ns.features)
    if ns.sequence:
        per_crf = {crf: fv for (seq, crf), fv in features.items() if seq == ns.sequence}
        value = pipeline.delta_e_select(store, model, ns.sequence, per_crf, config)
        print(json.dumps({"sequence": ns.sequence, "delta_e_select_percent": value}))
    else:
        report = pipeline.build_delta_e_report(store, model, features, config)
        sys.stdout.write(pipeline.render_delta_e_csv(report))
    return EXIT_OK


def _cmd_report(ns) -> int:
    config = load_config(ns.config)
    store = MeasurementStore(ns.store)
    report = pipeline.pipeline_label(store, config)
    if ns.out_csv:
        Path(ns.out_csv).write_text(pipeline.render_policy_report_csv(report))
    if ns.out_json:
        Path(ns.out_json).write_text(pipeline.render_policy_report_json(report))
    if ns.curves_dir:
        pipeline.write_curve_data(store, ns.curves_dir, config.energy_axis)
    if not (ns.out_csv or ns.out_json or ns.curves_dir):
        sys.stdout.write(pipeline.render_policy_report_csv(report))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="greenfps", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("downsample", help="temporal downsample a Y4M clip")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--fps-out", required=True)
    p.add_argument("--out", dest="output", required=True, type=Path)
    p.set_defaults(func=_cmd_downsample)

    p = sub.add_parser("quality", help="PSNR/mPSNR of a test clip vs a reference")
    p.add_argument("--ref", required=True, type=Path)
    p.add_argument("--test", required=True, type=Path)
    p.add_argument("--metric", choices=("psnr", "mpsnr"), default="mpsnr")
    p.set_defaults(func=_cmd_quality)

    p = sub.add_parser("features", help="extract the feature vector of a clip")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--crf", required=True, type=int)
    p.add_argument("--out", dest="output", type=Path, default=None)
    _add_config_arg(p)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("measure", help="energy-measure a command under the meter")
    p.add_argument("--cmd", required=True)
    p.add_argument("--reps-max", type=int, default=None)
    _add_config_arg(p)
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("pipeline-measure", help="fill the measurement grid for clips")
    p.add_argument("sequences", nargs="+", type=Path, metavar="clip.y4m")
    p.add_argument("--store", required=True, type=Path)
    _add_config_arg(p)
    p.set_defaults(func=_cmd_pipeline_measure)

    p = sub.add_parser("label", help="derive energy-aware policies + BD table")
    p.add_argument("--store", required=True, type=Path)
    p.add_argument("--out-csv", type=Path, default=None)
    p.add_argument("--out-json", type=Path, default=None)
    _add_config_arg(p)
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("bd", help="BD difference between two curves")
    p.add_argument("--ref", required=True, type=Path)
    p.add_argument("--test", required=True, type=Path)
    p.add_argument("--metric", choices=tuple(_METRIC_COLUMN), default="rate")
    p.add_argument("--interpolation", choices=("pchip", "cubic"), default="pchip")
    p.set_defaults(func=_cmd_bd)

    p = sub.add_parser("train", help="train the frame-rate classifier")
    p.add_argument("--store", required=True, type=Path)
    p.add_argument("--features", required=True, type=Path)
    p.add_argument("--model-out", required=True, type=Path)
    p.add_argument("--report-out", type=Path, default=None)
    _add_config_arg(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="recommend a frame rate for a clip + CRF")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--crf", required=True, type=int)
    _add_config_arg(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("delta-e", help="selection-overhead energy accounting")
    p.add_argument("--store", required=True, type=Path)
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--features", required=True, type=Path)
    p.add_argument("--sequence", default=None)
    _add_config_arg(p)
    p.set_defaults(func=_cmd_delta_e)

    p = sub.add_parser("report", help="render policy/BD reports and curve data")
    p.add_argument("--store", required=True, type=Path)
    p.add_argument("--out-csv", type=Path, default=None)
    p.add_argument("--out-json", type=Path, default=None)
    p.add_argument("--curves-dir", type=Path, default=None)
    _add_config_arg(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except _UsageError as exc:
        return exc.code
    try:
        return ns.func(ns)
    except CommandFailedError as exc:
        print(f"greenfps: subprocess failed: {exc}", file=sys.stderr)
        return EXIT_SUBPROCESS
    except (VideoFormatError, StoreError, MeterError, ValueError, OSError, KeyError) as exc:
        print(f"greenfps: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
