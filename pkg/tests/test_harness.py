import numpy as np
import pytest

from waveplatoon.errors import EmptyTrace, InvalidConfig
from waveplatoon.metrics import (
    MetricsReport,
    collided,
    maneuver_metrics,
    mse_velocity,
    noise_metrics,
    settling_time,
)
from waveplatoon.sim import NoiseSpec, PlatoonConfig, ScenarioSpec, SimulationTrace, run_scenario
from waveplatoon.sweep import acceleration_scenario, sweep, sweep_duration
from waveplatoon.verify import SUITES, verify


def make_trace(t, positions, velocities, variant="none"):
    positions = np.asarray(positions, dtype=float)
    velocities = np.asarray(velocities, dtype=float)
    commands = np.full((len(t), 2), np.nan)
    return SimulationTrace(
        t=np.asarray(t, dtype=float),
        positions=positions,
        velocities=velocities,
        commands=commands,
        variant=variant,
    )


def test_mse_velocity_exact_tracking():
    t = np.linspace(0, 9, 10)
    v = np.ones((10, 3))
    trace = make_trace(t, np.zeros((10, 3)), v)
    assert mse_velocity(trace, 1.0) == 0.0


def test_mse_velocity_hand_average():
    # two vehicles, one off by 1 m/s the whole run -> (1 + 0)/2
    t = np.linspace(0, 4, 5)
    v = np.column_stack([np.zeros(5), np.ones(5)])
    trace = make_trace(t, np.zeros((5, 2)), v)
    assert mse_velocity(trace, 1.0) == pytest.approx(0.5)


def test_mse_velocity_schedule_callable():
    t = np.linspace(0, 1, 11)
    v = np.outer(t, np.ones(2))
    trace = make_trace(t, np.zeros((11, 2)), v)
    assert mse_velocity(trace, lambda ti: ti) == 0.0


def test_mse_velocity_vehicle_permutation_invariant():
    rng = np.random.default_rng(17)
    t = np.linspace(0, 5, 50)
    v = rng.normal(size=(50, 6))
    trace = make_trace(t, np.zeros((50, 6)), v)
    shuffled = make_trace(t, np.zeros((50, 6)), v[:, rng.permutation(6)])
    assert mse_velocity(trace, 1.0) == pytest.approx(
        mse_velocity(shuffled, 1.0)
    )


def test_empty_trace_rejected():
    trace = make_trace(np.zeros(0), np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(EmptyTrace):
        mse_velocity(trace, 1.0)
    with pytest.raises(EmptyTrace):
        noise_metrics(trace)


def test_settling_time_cases():
    t = np.arange(0.0, 10.0, 1.0)
    in_band = make_trace(t, np.zeros((10, 2)), np.full((10, 2), 1.02))
    assert settling_time(in_band, 1.0) == 0.0

    v = np.full((10, 2), 1.0)
    v[:5, 1] = 0.5
    crossing = make_trace(t, np.zeros((10, 2)), v)
    assert settling_time(crossing, 1.0) == 5.0

    v = np.full((10, 2), 1.2)
    never = make_trace(t, np.zeros((10, 2)), v)
    assert settling_time(never, 1.0) is None

    with pytest.raises(InvalidConfig):
        settling_time(in_band, 0.0)


def test_settling_band_widening_monotone():
    cfg = PlatoonConfig(n_vehicles=4)
    spec = ScenarioSpec(duration=60.0, events=((0.0, "set_v_ref", 1.0),))
    trace = run_scenario(cfg, spec)
    wide = settling_time(trace, 1.0, band=0.10)
    narrow = settling_time(trace, 1.0, band=0.05)
    assert wide is not None and narrow is not None
    assert wide <= narrow


def test_collision_detection():
    t = np.arange(0.0, 3.0, 1.0)
    x = np.array([[1.0, 0.0], [0.5, 0.0], [-0.1, 0.0]])
    trace = make_trace(t, x, np.zeros((3, 2)))
    assert collided(trace)
    assert not collided(make_trace(t, x[:2], np.zeros((2, 2))))


def test_zero_noise_rest_metrics_vanish():
    cfg = PlatoonConfig(n_vehicles=4, d_ref0=0.0, v_ref=0.0)
    spec = ScenarioSpec(duration=5.0)
    report = noise_metrics(run_scenario(cfg, spec))
    assert report.mse_pos == 0.0
    assert report.mean_pos == 0.0
    assert report.mse_dist == 0.0
    assert report.max_dist == 0.0
    assert report.mse_velocity == 0.0
    assert not report.collided


def test_noisy_rest_metrics_populated():
    cfg = PlatoonConfig(n_vehicles=4, d_ref0=0.0, v_ref=0.0)
    spec = ScenarioSpec(duration=20.0, noise=NoiseSpec(variance=0.1, seed=9))
    report = noise_metrics(run_scenario(cfg, spec))
    assert report.mse_pos > 0.0
    assert report.mse_dist > 0.0
    assert report.max_dist > 0.0
    assert report.settling_time is None
    assert set(report.as_dict()) == {
        "mse_velocity", "settling_time", "mse_pos", "mean_pos",
        "mse_dist", "max_dist", "collided",
    }


def test_maneuver_metrics_fields():
    cfg = PlatoonConfig(n_vehicles=3)
    spec = ScenarioSpec(duration=40.0, events=((0.0, "set_v_ref", 1.0),))
    report = maneuver_metrics(run_scenario(cfg, spec), 1.0)
    assert isinstance(report, MetricsReport)
    assert report.mse_velocity > 0.0
    assert report.settling_time is not None
    assert report.settling_time <= 40.0
    assert report.mse_pos is None


def test_sweep_duration_envelopes():
    assert sweep_duration("none", 10) > sweep_duration("front", 10)
    assert sweep_duration("front", 20) > sweep_duration("front", 10)


def test_sweep_small_grid():
    result = sweep(
        (3, 5),
        variants=("none", "front"),
        durations={"none": 40.0, "front": 40.0},
        out_every=10,
    )
    assert len(result.cells) == 4
    pairs = [(c.variant, c.n_vehicles) for c in result.cells]
    assert pairs == sorted(pairs)
    assert result.cell(3, "none").metrics is not None
    assert set(result.slopes) == {"none", "front"}
    for slope in result.slopes.values():
        assert slope is not None and np.isfinite(slope)
    with pytest.raises(KeyError):
        result.cell(99, "none")


def test_sweep_reports_cell_errors():
    result = sweep(
        (3, 4),
        variants=("none",),
        ki=-50.0,
        durations={"none": 30.0},
    )
    assert all(c.error for c in result.cells)
    assert all(c.metrics is None for c in result.cells)
    assert result.slopes["none"] is None


def test_sweep_requires_sizes():
    with pytest.raises(ValueError):
        sweep(())


def test_acceleration_scenario_shape():
    spec = acceleration_scenario(30.0, v_ref=2.0, variant="rear")
    assert spec.events[0].kind == "set_v_ref"
    assert spec.events[0].value == 2.0
    assert spec.variant == "rear"


def test_verify_nominal_passes():
    report = verify()
    assert report.passed
    assert {c.suite for c in report.checks} == set(SUITES)
    assert all(line.startswith("[pass]") for line in report.lines())


def test_verify_subset_and_unknown():
    report = verify("quadratic")
    assert report.passed
    assert {c.suite for c in report.checks} == {"quadratic"}
    with pytest.raises(ValueError):
        verify(("nonsense",))


def test_verify_unstable_gains_reported_not_raised():
    report = verify(kp=4.0, ki=-4.0, xi=4.0)
    assert not report.passed
    failed = {c.suite for c in report.checks if not c.passed}
    assert "stability" in failed
    assert "end_gains" in failed


def test_verify_flags_short_approximant():
    report = verify(("approximation", "chain_oracle"), iterations=2)
    assert not report.passed
    assert all(not c.passed for c in report.checks)


def test_verify_report_dict():
    report = verify(("fir",))
    payload = report.as_dict()
    assert payload["passed"] is True
    assert all(
        {"suite", "name", "passed", "measured", "threshold", "detail"}
        <= set(entry) for entry in payload["checks"]
    )
