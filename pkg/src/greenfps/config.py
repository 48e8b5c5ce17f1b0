"""Run configuration: the frame-rate ladder, CRF grids, codec templates,
meter selection, CI policy, and ML hyperparameters. TOML-backed."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from greenfps.codec import CommandTemplate
from greenfps.energy import CiPolicy, CommandClass, EnergyMeter, MockMeter, RaplMeter
from greenfps.features import FeatureConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

__all__ = ["MlParams", "RunConfig", "load_config", "stub_encoder_template", "stub_decoder_template"]

METER_ENV_VAR = "GREENFPS_METER"

DEFAULT_LADDER = ("120", "100", "60", "50", "40", "30", "25", "24", "15")

DEFAULT_CRF_SUBSET = (18, 23, 28, 33)

# the step-3 sweep used for energy-distortion curves, plus the selection CRFs
# (23/28/33 are off the step-3 comb but every selection CRF must be measured)
DEFAULT_CRF_GRID = tuple(sorted(set(range(0, 52, 3)) | set(DEFAULT_CRF_SUBSET)))


def stub_encoder_template(identity: bool = False) -> str:
    """Template for the in-package stub codec (tests, demos)."""
    mode = "copy" if identity else "encode"
    crf = "" if identity else " --crf {crf}"
    return f"{sys.executable} -m greenfps.stubcodec {mode} --input {{input}} --output {{output}}{crf}"


def stub_decoder_template(identity: bool = False) -> str:
    mode = "copy" if identity else "decode"
    return f"{sys.executable} -m greenfps.stubcodec {mode} --input {{input}} --output {{output}}"


@dataclass(frozen=True)
class MlParams:
    n_estimators: int = 100
    max_depth: int = 12
    min_leaf: int = 1
    top_k: int = 15
    chi2_bins: int = 10
    n_iterations: int = 12
    train_fraction: float = 0.8
    seed: int = 0
    protocol: str = "random"


@dataclass
class RunConfig:
    ladder: tuple[Fraction, ...] = tuple(Fraction(f) for f in DEFAULT_LADDER)
    crf_grid: tuple[int, ...] = DEFAULT_CRF_GRID
    crf_subset: tuple[int, ...] = DEFAULT_CRF_SUBSET
    encoder_template: str = field(default_factory=stub_encoder_template)
    decoder_template: str = field(default_factory=stub_decoder_template)
    meter: str = "mock"  # "mock" | "rapl" | "none"
    mock_active_watts: float = 30.0
    mock_idle_watts: float = 5.0
    mock_base_s: float = 0.05
    mock_s_per_byte: float = 0.0
    mock_classes: tuple[CommandClass, ...] = ()
    rapl_domain: str = RaplMeter.DEFAULT_DOMAIN
    ci: CiPolicy = CiPolicy()
    ml: MlParams = MlParams()
    features: FeatureConfig = FeatureConfig()
    energy_axis: str = "enc"
    workdir: Path = Path("greenfps-work")
    # overhead accounting for the selection pipeline: fixed joules, or None to
    # measure the corresponding command under the meter
    feature_energy_j: float | None = 1.0
    classify_energy_j: float | None = 0.05

    def __post_init__(self) -> None:
        self.ladder = tuple(Fraction(f) for f in self.ladder)
        if tuple(sorted(self.ladder, reverse=True)) != self.ladder:
            raise ValueError("ladder must be sorted descending")
        if not set(self.crf_subset) <= set(self.crf_grid):
            raise ValueError("crf_subset must be a subset of crf_grid")
        self.workdir = Path(self.workdir)

    @property
    def native_rate(self) -> Fraction:
        return self.ladder[0]

    def encoder(self) -> CommandTemplate:
        return CommandTemplate(self.encoder_template)

    def decoder(self) -> CommandTemplate:
        return CommandTemplate(self.decoder_template)

    def make_meter(self) -> EnergyMeter | None:
        """Instantiate the configured meter; GREENFPS_METER overrides."""
        choice = os.environ.get(METER_ENV_VAR, self.meter)
        if choice == "none":
            return None
        if choice == "mock":
            return MockMeter(
                active_watts=self.mock_active_watts,
                idle_watts=self.mock_idle_watts,
                base_s=self.mock_base_s,
                s_per_byte=self.mock_s_per_byte,
                classes=self.mock_classes,
            )
        if choice == "rapl":
            return RaplMeter(self.rapl_domain)
        raise ValueError(f"unknown meter backend {choice!r}")

    def canonical(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple) and value and isinstance(value[0], Fraction):
                value = [str(v) for v in value]
            elif dataclasses.is_dataclass(value) and not isinstance(value, type):
                value = dataclasses.asdict(value)
            elif isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = [dataclasses.asdict(v) if dataclasses.is_dataclass(v) else v for v in value]
            out[f.name] = value
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _from_dict(data: dict) -> RunConfig:
    kwargs: dict = {}
    plain = {f.name for f in dataclasses.fields(RunConfig)} - {
        "ladder",
        "ci",
        "ml",
        "features",
        "mock_classes",
        "workdir",
    }
    for key, value in data.items():
        if key == "ladder":
            kwargs["ladder"] = tuple(Fraction(str(v)) for v in value)
        elif key in ("crf_grid", "crf_subset"):
            kwargs[key] = tuple(int(v) for v in value)
        elif key == "ci":
            kwargs["ci"] = CiPolicy(**value)
        elif key == "ml":
            kwargs["ml"] = MlParams(**value)
        elif key == "features":
            kwargs["features"] = FeatureConfig(**value)
        elif key == "mock_classes":
            kwargs["mock_classes"] = tuple(CommandClass(**c) for c in value)
        elif key == "workdir":
            kwargs["workdir"] = Path(value)
        elif key in plain:
            kwargs[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    return RunConfig(**kwargs)


def load_config(path: str | Path | None) -> RunConfig:
    """RunConfig from a TOML file, or defaults when path is None."""
    if path is None:
        return RunConfig()
    with open(path, "rb") as handle:
        return _from_dict(tomllib.load(handle))
