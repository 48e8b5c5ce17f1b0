"""Energy-aware frame rate selection toolkit.

Pipeline: temporally downsample a high-frame-rate source, encode/decode it
across a CRF grid while metering energy, score quality against the native-rate
reference, label each sequence with Pareto-derived energy-aware frame rates,
and train a classifier that predicts those frame rates from spatio-temporal
content features.

Submodules are imported lazily so lightweight entry points (the stub codec in
particular, which is spawned many times per pipeline run) stay cheap to start.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "Frame": "greenfps.video",
    "PixelFormat": "greenfps.video",
    "VideoSequence": "greenfps.video",
    "read_y4m": "greenfps.video",
    "write_y4m": "greenfps.video",
    "generate_synthetic": "greenfps.video",
    "WeightTable": "greenfps.resample",
    "generate_weights": "greenfps.resample",
    "downsample": "greenfps.resample",
    "QualityScore": "greenfps.quality",
    "psnr": "greenfps.quality",
    "mpsnr": "greenfps.quality",
    "FeatureVector": "greenfps.features",
    "extract_feature_vector": "greenfps.features",
    "farneback_flow": "greenfps.flow",
    "EnergyMeasurement": "greenfps.energy",
    "EnergyMeter": "greenfps.energy",
    "MockMeter": "greenfps.energy",
    "RaplMeter": "greenfps.energy",
    "ci_test": "greenfps.energy",
    "measure_command": "greenfps.energy",
    "RdePoint": "greenfps.pareto",
    "FrameRatePolicy": "greenfps.pareto",
    "pareto_front": "greenfps.pareto",
    "select_policy": "greenfps.pareto",
    "RdCurve": "greenfps.bd",
    "bd_delta": "greenfps.bd",
    "bd_triplet": "greenfps.bd",
    "EnsembleModel": "greenfps.ml",
    "chi_square_scores": "greenfps.ml",
    "fit_bagging": "greenfps.ml",
    "RunConfig": "greenfps.config",
    "load_config": "greenfps.config",
    "MeasurementStore": "greenfps.store",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module 'greenfps' has no attribute {name!r}")
    import importlib

    return getattr(importlib.import_module(module), name)
