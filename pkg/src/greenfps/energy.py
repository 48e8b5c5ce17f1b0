"""Process energy measurement: total-minus-idle with statistical repetition.

A measurement runs a command, reads a cumulative joule counter around it,
subtracts the idle energy of a window of equal length, and repeats until a
Student-t confidence interval on the net energies is tight enough. Meters:
RAPL powercap counters for real hardware, and a deterministic mock whose
virtual clock makes measurements a pure function of its power model (used
by all tests and anywhere results must be bit-reproducible).
"""

from __future__ import annotations

import abc
import contextlib
import logging
import math
import re
import shlex
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

log = logging.getLogger(__name__)

__all__ = [
    "CiPolicy",
    "EnergyMeasurement",
    "EnergyMeter",
    "MockMeter",
    "RaplMeter",
    "CommandFailedError",
    "MeterError",
    "read_energy_delta",
    "measure_idle_baseline",
    "measure_command",
    "ci_test",
]


class MeterError(RuntimeError):
    """Counter reads out of range or meter unavailable."""


class CommandFailedError(RuntimeError):
    def __init__(self, argv: list[str], returncode: int, stderr: str = ""):
        super().__init__(f"command failed with exit {returncode}: {shlex.join(argv)}")
        self.argv = argv
        self.returncode = returncode
        self.stderr = stderr


@dataclass(frozen=True)
class CiPolicy:
    """Repetition policy: repeat until the two-sided t-interval half-width is
    within ``beta`` of the mean at confidence ``alpha``."""

    alpha: float = 0.99
    beta: float = 0.02
    min_reps: int = 2
    max_reps: int = 20
    cache_idle: bool = True
    idle_cache_ttl_s: float = 600.0


@dataclass(frozen=True)
class EnergyMeasurement:
    e_total: float
    e_idle: float
    e_net: float
    duration: float
    n_repetitions: int
    passed_ci: bool


class EnergyMeter(abc.ABC):
    """Cumulative joule counter plus the plumbing to run/idle under it."""

    resolution: float
    max_range: float

    @abc.abstractmethod
    def read_joules(self) -> float:
        """Cumulative joules; wraps around at max_range."""

    @abc.abstractmethod
    def execute(self, argv: list[str]) -> float:
        """Run the command to completion, return its duration in meter time."""

    @abc.abstractmethod
    def sleep(self, duration_s: float) -> None:
        """Let meter time pass idly for duration_s."""

    def lock(self):
        """Exclusivity guard around a measurement session."""
        return contextlib.nullcontext()


def read_energy_delta(meter: EnergyMeter, t0: float, t1: float) -> float:
    """Counter difference t1-t0, corrected once for wraparound.

    A window long enough to wrap the counter twice is indistinguishable from
    a short one and must be avoided by the caller (split the measurement).
    """
    for reading in (t0, t1):
        if not 0.0 <= reading <= meter.max_range:
            raise MeterError(f"counter reading {reading} outside [0, {meter.max_range}]")
    delta = t1 - t0
    if delta < 0.0:
        delta += meter.max_range
    return delta


def measure_idle_baseline(meter: EnergyMeter, duration_s: float) -> float:
    """Energy over an idle window of duration_s (system quiesced by caller)."""
    if duration_s <= 0.0:
        raise ValueError("idle window duration must be positive")
    t0 = meter.read_joules()
    meter.sleep(duration_s)
    return read_energy_delta(meter, t0, meter.read_joules())


def ci_test(samples: list[float], alpha: float = 0.99, beta: float = 0.02) -> bool:
    """Bendat/Piersol-style check: t-interval half-width <= beta * mean."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    mean = float(np.mean(samples))
    if mean <= 0.0:
        raise ValueError("nonpositive sample mean")
    if math.isinf(beta):
        return True
    m = len(samples)
    s = float(np.std(samples, ddof=1))
    half_width = s * float(stats.t.ppf(1.0 - (1.0 - alpha) / 2.0, m - 1)) / math.sqrt(m)
    return half_width <= beta * mean


def measure_command(
    meter: EnergyMeter,
    command: str | list[str],
    policy: CiPolicy = CiPolicy(),
) -> EnergyMeasurement:
    """Repeatedly run ``command`` under the meter and net out idle energy.

    Repetitions stop once the CI criterion passes (never before min_reps) or
    at max_reps, in which case the result is flagged passed_ci=False.
    Reported figures are means over all completed runs.
    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    totals: list[float] = []
    idles: list[float] = []
    nets: list[float] = []
    durations: list[float] = []
    idle_power_cache: dict[float, tuple[float, float]] = {}

    def idle_energy(duration_s: float) -> float:
        if not policy.cache_idle:
            return measure_idle_baseline(meter, duration_s)
        bucket = round(duration_s, 1)
        cached = idle_power_cache.get(bucket)
        if cached is not None and time.monotonic() - cached[1] < policy.idle_cache_ttl_s:
            return cached[0] * duration_s
        energy = measure_idle_baseline(meter, duration_s)
        idle_power_cache[bucket] = (energy / duration_s, time.monotonic())
        return energy

    passed = False
    with meter.lock():
        while True:
            t0 = meter.read_joules()
            duration = meter.execute(argv)
            e_total = read_energy_delta(meter, t0, meter.read_joules())
            e_idle = idle_energy(duration) if duration > 0.0 else 0.0
            e_net = e_total - e_idle
            if e_net < 0.0:
                log.warning("negative net energy %.3f J (noise); reporting as-is", e_net)
            totals.append(e_total)
            idles.append(e_idle)
            nets.append(e_net)
            durations.append(duration)
            if len(nets) >= policy.min_reps:
                try:
                    passed = ci_test(nets, policy.alpha, policy.beta)
                except ValueError:
                    passed = False
                if passed or len(nets) >= policy.max_reps:
                    break
    mean_total = float(np.mean(totals))
    mean_idle = float(np.mean(idles))
    return EnergyMeasurement(
        e_total=mean_total,
        e_idle=mean_idle,
        e_net=mean_total - mean_idle,  # keeps the ledger identity bit-exact
        duration=float(np.mean(durations)),
        n_repetitions=len(nets),
        passed_ci=passed,
    )


# --- meters ------------------------------------------------------------------


@dataclass(frozen=True)
class CommandClass:
    """Mock power/duration overrides for commands matching ``pattern``."""

    pattern: str
    active_watts: float
    base_s: float = 0.0
    s_per_byte: float = 0.0


class MockMeter(EnergyMeter):
    """Deterministic meter driven by a virtual clock.

    Commands really run (their file side effects are needed downstream), but
    the reported duration comes from a byte-count model, not the wall clock:
    duration = base_s + s_per_byte * size of the command's input, where the
    input is the first argv token naming an existing file. Idle windows
    advance the virtual counter by idle_watts * duration without sleeping.
    Commands are assumed deterministic, so repetitions of one under the same
    meter execute the subprocess once and only advance the power model.
    """

    def __init__(
        self,
        active_watts: float = 30.0,
        idle_watts: float = 5.0,
        base_s: float = 0.05,
        s_per_byte: float = 0.0,
        classes: tuple[CommandClass, ...] = (),
        max_range: float = 262144.0,
        run_commands: bool = True,
    ):
        self.active_watts = active_watts
        self.idle_watts = idle_watts
        self.base_s = base_s
        self.s_per_byte = s_per_byte
        self.classes = classes
        self.max_range = max_range
        self.resolution = 1e-6
        self.run_commands = run_commands
        self._joules = 0.0
        self._executed: set[tuple[str, ...]] = set()

    def read_joules(self) -> float:
        return self._joules % self.max_range

    def _class_for(self, argv: list[str]) -> CommandClass:
        line = shlex.join(argv)
        for klass in self.classes:
            if re.search(klass.pattern, line):
                return klass
        return CommandClass("", self.active_watts, self.base_s, self.s_per_byte)

    def _input_bytes(self, argv: list[str]) -> int:
        for token in argv[1:]:  # argv[0] is the program, not input data
            p = Path(token)
            if p.is_file():
                return p.stat().st_size
        return 0

    def execute(self, argv: list[str]) -> float:
        klass = self._class_for(argv)
        duration = klass.base_s + klass.s_per_byte * self._input_bytes(argv)
        if self.run_commands and tuple(argv) not in self._executed:
            proc = subprocess.run(argv, capture_output=True, text=True)
            if proc.returncode != 0:
                raise CommandFailedError(argv, proc.returncode, proc.stderr)
            self._executed.add(tuple(argv))
        self._joules += klass.active_watts * duration
        return duration

    def sleep(self, duration_s: float) -> None:
        self._joules += self.idle_watts * duration_s


class RaplMeter(EnergyMeter):
    """Intel RAPL powercap counter (one domain), microjoule files."""

    DEFAULT_DOMAIN = "/sys/class/powercap/intel-rapl:0"

    def __init__(
        self,
        domain: str | Path = DEFAULT_DOMAIN,
        lock_path: str | Path = "/tmp/greenfps-meter.lock",
    ):
        self.domain = Path(domain)
        self.lock_path = Path(lock_path)
        energy_file = self.domain / "energy_uj"
        if not energy_file.exists():
            raise MeterError(f"no RAPL counter at {energy_file}")
        self.max_range = int((self.domain / "max_energy_range_uj").read_text()) / 1e6
        self.resolution = 1e-6

    @classmethod
    def available(cls, domain: str | Path = DEFAULT_DOMAIN) -> bool:
        return (Path(domain) / "energy_uj").exists()

    def read_joules(self) -> float:
        return int((self.domain / "energy_uj").read_text()) / 1e6

    def execute(self, argv: list[str]) -> float:
        start = time.monotonic()
        proc = subprocess.run(argv, capture_output=True, text=True)
        duration = time.monotonic() - start
        if proc.returncode != 0:
            raise CommandFailedError(argv, proc.returncode, proc.stderr)
        return duration

    def sleep(self, duration_s: float) -> None:
        time.sleep(duration_s)

    @contextlib.contextmanager
    def lock(self):
        # measurements demand machine exclusivity; flock serializes harnesses
        import fcntl

        self.lock_path.touch(exist_ok=True)
        with open(self.lock_path) as handle:
            fcntl.flock(handle, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(handle, fcntl.LOCK_UN)
