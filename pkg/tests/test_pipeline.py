import dataclasses
import math
from fractions import Fraction

import numpy as np
import pytest

from greenfps import pipeline
from greenfps.config import MlParams, RunConfig, stub_decoder_template, stub_encoder_template
from greenfps.features import FEATURE_COLUMNS, FeatureVector
from greenfps.ml import fit_bagging, Dataset
from greenfps.pareto import FrameRatePolicy, RdePoint
from greenfps.store import MeasurementStore
from greenfps.video import generate_synthetic


def mini_config(workdir, ladder=(120, 60), crfs=(18, 23), identity=False, **overrides) -> RunConfig:
    options = dict(
        ladder=tuple(Fraction(f) for f in ladder),
        crf_grid=tuple(crfs),
        crf_subset=tuple(crfs),
        encoder_template=stub_encoder_template(identity),
        decoder_template=stub_decoder_template(identity),
        meter="mock",
        mock_base_s=0.01,
        mock_s_per_byte=2e-6,
        workdir=workdir,
        ml=MlParams(n_estimators=8, n_iterations=3, seed=0),
    )
    options.update(overrides)
    return RunConfig(**options)


def make_fv(crf: int, fd: float = 0.0, crest: float = 0.0) -> FeatureVector:
    values = {name: 0.0 for name in FEATURE_COLUMNS}
    values.update(meanFD=fd, meanSTD=crest, crf=crf)
    values["crf"] = crf
    return FeatureVector(**values)


def test_measure_grid_product(tmp_path):
    config = mini_config(tmp_path / "work")
    seq = generate_synthetic("global_translation", width=32, height=32, n_frames=8, name="clip")
    store = MeasurementStore(tmp_path / "store.csv")
    pipeline.pipeline_measure(config, [seq], store)
    assert len(store) == 4  # 2 rates x 2 CRFs
    assert store.sequences() == ["clip"]


def test_measure_is_idempotent(tmp_path):
    config = mini_config(tmp_path / "work")
    seq = generate_synthetic("global_translation", width=32, height=32, n_frames=8, name="clip")
    store = MeasurementStore(tmp_path / "store.csv")
    pipeline.pipeline_measure(config, [seq], store)
    first = (tmp_path / "store.csv").read_bytes()
    pipeline.pipeline_measure(config, [seq], store)
    assert (tmp_path / "store.csv").read_bytes() == first


def test_energy_decreases_with_frame_rate(tmp_path):
    config = mini_config(tmp_path / "work", ladder=(120, 60, 30, 15), crfs=(18,), identity=True)
    seq = generate_synthetic("global_translation", width=32, height=32, n_frames=16, name="clip")
    store = MeasurementStore(tmp_path / "store.csv")
    pipeline.pipeline_measure(config, [seq], store)
    by_rate = {p.frame_rate: p.e_enc_j for p in store.points()}
    ordered = [by_rate[Fraction(f)] for f in (120, 60, 30, 15)]
    assert ordered == sorted(ordered, reverse=True)
    assert ordered[0] > ordered[-1]


def test_measure_deterministic_across_runs(tmp_path):
    outputs = []
    for tag in ("one", "two"):
        config = mini_config(tmp_path / tag, crfs=(18, 23, 28))
        seq = generate_synthetic("local_motion", width=32, height=32, n_frames=8, name="clip", seed=5)
        store = MeasurementStore(tmp_path / f"{tag}.csv")
        pipeline.pipeline_measure(config, [seq], store)
        report = pipeline.pipeline_label(store, config)
        outputs.append(
            (tmp_path / f"{tag}.csv").read_bytes() + pipeline.render_policy_report_csv(report).encode()
        )
    assert outputs[0] == outputs[1]


def test_cell_failures_recorded_not_fatal(tmp_path):
    config = mini_config(tmp_path / "work", encoder_template="false {input} {output} {crf}")
    seq = generate_synthetic("constant", width=32, height=32, n_frames=8, name="clip")
    store = MeasurementStore(tmp_path / "store.csv")
    pipeline.pipeline_measure(config, [seq], store)
    assert len(store) == 0
    meta = store.meta_path.read_text()
    assert "crf=18" in meta


# --- labeling ----------------------------------------------------------------------


def planted_store(tmp_path, downsampling_pays=True) -> MeasurementStore:
    store = MeasurementStore(tmp_path / "planted.csv")
    rows = []
    for f in (120, 60, 30, 15):
        for crf in (18, 23, 28, 33):
            if downsampling_pays:
                q = 46.0 - 0.5 * crf - (0.5 if (f < 120 and crf == 18) else 0.0)
            else:
                q = 46.0 - 0.5 * crf + f / 240.0
            scale = f / 120.0
            rows.append(
                RdePoint("clip", Fraction(f), crf, q, 1000 * scale * (52 - crf), 100 * scale * (52 - crf) / 52, 40 * scale)
            )
    store.append(rows)
    return store


def test_label_all_native_gives_zero_bd(tmp_path):
    config = mini_config(tmp_path / "work", ladder=(120, 60, 30, 15), crfs=(18, 23, 28, 33))
    store = planted_store(tmp_path, downsampling_pays=False)
    report = pipeline.pipeline_label(store, config)
    row = report.rows[0]
    assert row.policy.braces() == "{120,120,120,120}"
    assert (row.bdr, row.bdee, row.bdde) == (0.0, 0.0, 0.0)
    assert report.averages() == (0.0, 0.0, 0.0)
    assert report.downsampled_averages() == (0.0, 0.0, 0.0)


def test_label_downsampling_saves_energy(tmp_path):
    config = mini_config(tmp_path / "work", ladder=(120, 60, 30, 15), crfs=(18, 23, 28, 33))
    store = planted_store(tmp_path, downsampling_pays=True)
    report = pipeline.pipeline_label(store, config)
    row = report.rows[0]
    assert row.policy.rate_for(33) < Fraction(120)
    assert row.bdee < 0


def test_report_averages_match_recomputation(tmp_path):
    rows = [
        pipeline.PolicyRow("a", FrameRatePolicy((18,), (Fraction(120),)), -16.03, -69.45, -64.60),
        pipeline.PolicyRow("b", FrameRatePolicy((18,), (Fraction(120),)), 0.0, 0.0, 0.0),
    ]
    report = pipeline.PolicyReport(rows, (18,), Fraction(120))
    avg = report.averages()
    assert avg == pytest.approx(((-16.03 + 0) / 2, (-69.45 + 0) / 2, (-64.60 + 0) / 2))


def test_policy_report_csv_round_trip():
    policy = FrameRatePolicy((18, 23, 28, 33), (Fraction(120), Fraction(30), Fraction(15), Fraction(15)))
    report = pipeline.PolicyReport(
        [pipeline.PolicyRow("catch", policy, -16.03, -69.45, -64.60)], (18, 23, 28, 33), Fraction(120)
    )
    text = pipeline.render_policy_report_csv(report)
    assert "catch,\"{120,30,15,15}\",-16.03,-69.45,-64.60" in text
    parsed = pipeline.parse_policy_report_csv(text)
    rendered = pipeline.render_policy_report_csv(parsed)
    assert rendered == text


def test_curve_data_emission(tmp_path):
    store = planted_store(tmp_path)
    paths = pipeline.write_curve_data(store, tmp_path / "curves")
    assert len(paths) == 1
    content = paths[0].read_text().splitlines()
    assert content[0] == "frame_rate,crf,mpsnr_db,e_enc_j,bitrate_kbps"
    assert len(content) == 1 + 16


# --- training and prediction -----------------------------------------------------


STILL_NAMES = tuple(f"still{i}" for i in range(6))
BUSY_NAMES = tuple(f"busy{i}" for i in range(6))


def planted_features() -> dict[tuple[str, int], FeatureVector]:
    """Frame difference cleanly separates the two content classes; small
    per-sequence jitter keeps rows distinct."""
    table = {}
    for crf in (18, 23, 28, 33):
        for i, name in enumerate(STILL_NAMES):
            table[(name, crf)] = make_fv(crf, fd=0.1 + 0.01 * i)
        for i, name in enumerate(BUSY_NAMES):
            table[(name, crf)] = make_fv(crf, fd=9.0 + 0.01 * i)
    return table


def planted_corpus_store(tmp_path) -> MeasurementStore:
    store = MeasurementStore(tmp_path / "corpus.csv")
    rows = []
    for f in (120, 60, 30, 15):
        for crf in (18, 23, 28, 33):
            scale = f / 120.0
            # still: averaging denoises, so quality inches up as the rate drops
            # (policy {15,15,15,15}); busy: quality collapses off-native
            q_still = 46.0 - 0.5 * crf + (120.0 - f) / 1000.0
            q_busy = 46.0 - 0.5 * crf - (6.0 if f < 120 else 0.0)
            for name in STILL_NAMES:
                rows.append(RdePoint(name, Fraction(f), crf, q_still, 900 * scale, 90 * scale, 30 * scale))
            for name in BUSY_NAMES:
                rows.append(RdePoint(name, Fraction(f), crf, q_busy, 1100 * scale, 110 * scale, 40 * scale))
    store.append(rows)
    return store


def test_pipeline_train_learns_planted_mapping(tmp_path):
    config = mini_config(tmp_path / "work", ladder=(120, 60, 30, 15), crfs=(18, 23, 28, 33))
    store = planted_corpus_store(tmp_path)
    result = pipeline.pipeline_train(store, planted_features(), config)
    assert result.evaluation.accuracy == 1.0
    assert len(result.selected) <= config.ml.top_k
    labels = pipeline.pipeline_label(store, config)
    for row in labels.rows:
        for crf in (18, 23, 28, 33):
            fv = planted_features()[(row.sequence, crf)]
            assert result.model.predict(fv.as_array()) == float(row.policy.rate_for(crf))


def test_model_reload_identical_predictions(tmp_path):
    config = mini_config(tmp_path / "work", ladder=(120, 60, 30, 15), crfs=(18, 23, 28, 33))
    store = planted_corpus_store(tmp_path)
    result = pipeline.pipeline_train(store, planted_features(), config)
    path = tmp_path / "model.json"
    result.model.save(path)
    from greenfps.ml import EnsembleModel

    clone = EnsembleModel.load(path)
    for fv in planted_features().values():
        assert clone.predict(fv.as_array()) == result.model.predict(fv.as_array())


def test_features_csv_round_trip(tmp_path):
    table = planted_features()
    path = tmp_path / "features.csv"
    pipeline.write_features_csv(path, table)
    back = pipeline.read_features_csv(path)
    assert back == table


def test_labels_csv_round_trip(tmp_path):
    policy = FrameRatePolicy((18, 23), (Fraction(120), Fraction(15)))
    report = pipeline.PolicyReport([pipeline.PolicyRow("clip", policy, 0, 0, 0)], (18, 23), Fraction(120))
    path = tmp_path / "labels.csv"
    pipeline.write_labels_csv(path, report)
    labels = pipeline.read_labels_csv(path)
    assert labels == {("clip", 18): Fraction(120), ("clip", 23): Fraction(15)}


# --- delta-E accounting ------------------------------------------------------------


def fixed_prediction_model(rate: float):
    data = Dataset(np.zeros((4, 25)), np.full(4, rate), FEATURE_COLUMNS)
    return fit_bagging(data, n_estimators=3, seed=0)


def test_delta_e_halved_energy(tmp_path):
    config = mini_config(
        tmp_path / "work",
        ladder=(120, 60, 30, 15),
        crfs=(18, 23, 28, 33),
        feature_energy_j=1.0,
        classify_energy_j=0.0,
    )
    store = MeasurementStore(tmp_path / "s.csv")
    rows = []
    for f in (120, 15):
        for crf in (18, 23, 28, 33):
            e = 100.0 if f == 120 else 50.0
            rows.append(RdePoint("clip", Fraction(f), crf, 40.0 - crf / 10, 100.0, e, e / 2))
    store.append(rows)
    model = fixed_prediction_model(15.0)
    features = {crf: make_fv(crf) for crf in (18, 23, 28, 33)}
    value = pipeline.delta_e_select(store, model, "clip", features, config)
    # E_b = 400, E_a = 1 + 4*50 = 201
    assert value == pytest.approx(100.0 * (201.0 - 400.0) / 400.0)


def test_delta_e_native_prediction_costs_overhead(tmp_path):
    config = mini_config(
        tmp_path / "work",
        ladder=(120, 60, 30, 15),
        crfs=(18, 23, 28, 33),
        feature_energy_j=2.0,
        classify_energy_j=0.5,
    )
    store = MeasurementStore(tmp_path / "s.csv")
    rows = [
        RdePoint("clip", Fraction(120), crf, 40.0 - crf / 10, 100.0, 100.0, 50.0)
        for crf in (18, 23, 28, 33)
    ]
    store.append(rows)
    model = fixed_prediction_model(120.0)
    features = {crf: make_fv(crf) for crf in (18, 23, 28, 33)}
    value = pipeline.delta_e_select(store, model, "clip", features, config)
    assert value == pytest.approx(100.0 * (2.0 + 4 * 0.5) / 400.0)
    assert value > 0


def test_delta_e_missing_cells_rejected(tmp_path):
    config = mini_config(tmp_path / "work", ladder=(120, 15), crfs=(18, 23))
    store = MeasurementStore(tmp_path / "s.csv")
    store.append([RdePoint("clip", Fraction(120), 18, 40.0, 100.0, 100.0, 50.0)])
    model = fixed_prediction_model(120.0)
    features = {crf: make_fv(crf) for crf in (18, 23)}
    with pytest.raises(ValueError, match="missing"):
        pipeline.delta_e_select(store, model, "clip", features, config)
