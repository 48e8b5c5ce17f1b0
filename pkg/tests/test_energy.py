import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from greenfps.energy import (
    CiPolicy,
    CommandClass,
    CommandFailedError,
    MeterError,
    MockMeter,
    ci_test,
    measure_command,
    measure_idle_baseline,
    read_energy_delta,
)

NOOP = [sys.executable, "-c", "pass"]


def test_delta_simple():
    meter = MockMeter()
    assert read_energy_delta(meter, 100.0, 160.0) == 60.0


def test_delta_wraparound():
    meter = MockMeter(max_range=262144.0)
    assert read_energy_delta(meter, 262140.0, 6.0) == pytest.approx(10.0)


def test_delta_zero():
    meter = MockMeter()
    assert read_energy_delta(meter, 42.0, 42.0) == 0.0


def test_delta_rejects_out_of_range_readings():
    meter = MockMeter(max_range=100.0)
    with pytest.raises(MeterError):
        read_energy_delta(meter, -1.0, 10.0)
    with pytest.raises(MeterError):
        read_energy_delta(meter, 10.0, 101.0)


def test_idle_baseline_power_times_duration():
    meter = MockMeter(idle_watts=5.0)
    assert measure_idle_baseline(meter, 10.0) == pytest.approx(50.0)


def test_idle_baseline_rejects_zero_duration():
    with pytest.raises(ValueError):
        measure_idle_baseline(MockMeter(), 0.0)


def test_idle_baseline_deterministic():
    meter = MockMeter(idle_watts=5.0)
    assert measure_idle_baseline(meter, 2.0) == measure_idle_baseline(meter, 2.0)


def test_measure_command_net_energy_exact():
    meter = MockMeter(active_watts=30.0, idle_watts=5.0, base_s=2.0)
    result = measure_command(meter, NOOP)
    assert result.e_net == 50.0  # (30 - 5) * 2, exactly
    assert result.e_total == 60.0
    assert result.e_idle == 10.0
    assert result.duration == 2.0
    assert result.passed_ci
    assert result.n_repetitions == CiPolicy().min_reps


def test_measure_command_ledger_identity():
    meter = MockMeter(active_watts=12.5, idle_watts=1.25, base_s=0.8)
    result = measure_command(meter, NOOP)
    assert result.e_net == result.e_total - result.e_idle


def test_measure_command_is_pure_under_mock():
    run1 = measure_command(MockMeter(base_s=1.5), NOOP)
    run2 = measure_command(MockMeter(base_s=1.5), NOOP)
    assert run1 == run2


def test_measure_command_failure():
    meter = MockMeter()
    with pytest.raises(CommandFailedError):
        measure_command(meter, [sys.executable, "-c", "raise SystemExit(9)"])


def test_command_class_overrides():
    meter = MockMeter(
        active_watts=30.0,
        base_s=1.0,
        classes=(CommandClass(pattern="heavy", active_watts=60.0, base_s=2.0),),
    )
    light = measure_command(MockMeter(active_watts=30.0, base_s=1.0), NOOP)
    heavy = measure_command(meter, NOOP + ["heavy"])
    assert light.e_total == 30.0
    assert heavy.e_total == 120.0


def test_input_bytes_scale_duration(tmp_path):
    payload = tmp_path / "input.bin"
    payload.write_bytes(bytes(1000))
    meter = MockMeter(active_watts=10.0, idle_watts=0.0, base_s=0.0, s_per_byte=0.001)
    result = measure_command(meter, NOOP + [str(payload)])
    assert result.duration == pytest.approx(1.0)
    assert result.e_net == pytest.approx(10.0)


# --- CI test -------------------------------------------------------------------


def test_ci_identical_samples_pass():
    assert ci_test([7.0, 7.0, 7.0])


def test_ci_hand_case_fails():
    samples = [100.0, 100.0, 100.0, 140.0]
    # direct t-interval: s * t_{0.995, 3} / sqrt(4) vs 0.02 * mean
    s = float(np.std(samples, ddof=1))
    half = s * stats.t.ppf(0.995, 3) / 2.0
    assert half > 0.02 * np.mean(samples)
    assert not ci_test(samples, alpha=0.99, beta=0.02)


def test_ci_infinite_beta_vacuous():
    assert ci_test([1.0, 2.0, 3.0], beta=math.inf)


def test_ci_validation():
    with pytest.raises(ValueError):
        ci_test([1.0])
    with pytest.raises(ValueError):
        ci_test([1.0, 2.0], alpha=1.5)
    with pytest.raises(ValueError):
        ci_test([0.0, 0.0])  # nonpositive mean
    with pytest.raises(ValueError):
        ci_test([1.0, 2.0], beta=-1.0)


def test_spread_needs_more_repetitions():
    def reps_until_pass(relative_spread: float) -> int:
        base = 100.0
        for m in range(2, 50):
            samples = [base + (relative_spread * base if i % 2 else 0.0) for i in range(m)]
            if ci_test(samples, alpha=0.99, beta=0.02):
                return m
        return 50

    assert reps_until_pass(0.10) > reps_until_pass(0.01)


@given(
    samples=st.lists(st.floats(min_value=1.0, max_value=1e6), min_size=2, max_size=12),
    alpha=st.sampled_from([0.9, 0.95, 0.99]),
    beta=st.sampled_from([0.01, 0.02, 0.1]),
)
@settings(max_examples=60, deadline=None)
def test_ci_monotone_in_mean_duplicates(samples, alpha, beta):
    if not ci_test(samples, alpha, beta):
        return
    extended = samples + [float(np.mean(samples))]
    assert ci_test(extended, alpha, beta)


def test_negative_net_energy_reported_as_is(caplog):
    # active power below idle: net energy is negative and must not be clamped
    meter = MockMeter(active_watts=1.0, idle_watts=5.0, base_s=1.0)
    result = measure_command(meter, NOOP)
    assert result.e_net == pytest.approx(-4.0)
