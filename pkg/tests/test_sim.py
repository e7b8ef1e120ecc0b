import math

import numpy as np
import pytest

from lieavg.sim import (
    Trajectory,
    compare,
    efforts,
    integrate,
    read_trajectory_csv,
    simulate_original,
    step_for_original,
    write_trajectory_csv,
)


def test_zero_rhs_constant_trajectory():
    traj = integrate(lambda t, x: np.zeros_like(x), (4.0, 0.0), (0.0, 2.0), 0.1)
    assert np.allclose(traj.states, [4.0, 0.0])
    assert not traj.diverged


def test_exponential_decay_accuracy():
    traj = integrate(lambda t, x: -x, (1.0,), (0.0, 1.0), 1e-3)
    assert abs(traj.states[-1, 0] - math.exp(-1.0)) < 1e-9


def test_rk4_order():
    def endpoint_err(dt):
        traj = integrate(lambda t, x: -x, (1.0,), (0.0, 1.0), dt)
        return abs(traj.states[-1, 0] - math.exp(-1.0))

    ratio = endpoint_err(0.02) / endpoint_err(0.01)
    assert 12.0 <= ratio <= 20.0


def test_divergence_marker():
    traj = integrate(lambda t, x: x**2, (1.0,), (0.0, 2.0), 1e-3)
    assert traj.diverged
    assert traj.t_final < 2.0
    assert np.all(np.isfinite(traj.states[:-1]))


def test_step_rule(example1):
    sys = example1.system
    assert step_for_original(sys) == pytest.approx(2 * math.pi / (20.0 * 1.0 * 40))
    assert step_for_original(sys, 1e-4) == 1e-4  # user step wins when finer


def test_example1_converges_to_neighborhood(example1):
    traj = simulate_original(example1.system, example1.x0, 50.0)
    # period-averaged endpoint within the documented neighborhood
    period = 2 * math.pi / example1.system.omega
    wlen = max(1, round(period / (traj.t[1] - traj.t[0])))
    tail = traj.states[-wlen:, 0]
    assert abs(float(np.mean(tail)) - 1.0) < 0.2


# ---------------------------------------------------------------------------
# comparison metrics


def test_compare_identical_zero():
    t = np.linspace(0.0, 1.0, 101)
    x = np.column_stack([np.sin(t), np.cos(t)])
    a = Trajectory(t, x)
    m = compare(a, Trajectory(t.copy(), x.copy()))
    assert m["d_sup"] == 0.0 and m["d_rms"] == 0.0


def test_compare_constant_offset():
    t = np.linspace(0.0, 1.0, 11)
    a = Trajectory(t, np.zeros((11, 1)))
    b = Trajectory(t, np.ones((11, 1)))
    m = compare(a, b)
    assert m["d_sup"] == pytest.approx(1.0) and m["d_rms"] == pytest.approx(1.0)


def test_compare_symmetric_on_aligned_grids():
    t = np.linspace(0.0, 2.0, 201)
    a = Trajectory(t, np.column_stack([np.sin(t)]))
    b = Trajectory(t, np.column_stack([np.sin(t) + 0.1 * np.cos(3 * t)]))
    ab = compare(a, b)
    ba = compare(b, a)
    assert abs(ab["d_sup"] - ba["d_sup"]) <= 1e-9
    assert abs(ab["d_rms"] - ba["d_rms"]) <= 1e-9


def test_compare_resamples_cubic():
    ta = np.linspace(0.0, 1.0, 201)
    tb = np.linspace(0.0, 1.0, 77)
    a = Trajectory(ta, np.column_stack([np.sin(2 * ta)]))
    b = Trajectory(tb, np.column_stack([np.sin(2 * tb)]))
    m = compare(a, b)
    assert m["d_sup"] < 1e-6  # cubic interpolation error only


def test_compare_disjoint_spans():
    a = Trajectory(np.linspace(0.0, 1.0, 5), np.zeros((5, 1)))
    b = Trajectory(np.linspace(2.0, 3.0, 5), np.zeros((5, 1)))
    with pytest.raises(ValueError):
        compare(a, b)


# ---------------------------------------------------------------------------
# efforts


def test_efforts_zero_inputs():
    t = np.linspace(0.0, 1.0, 11)
    traj = Trajectory(t, np.ones((11, 1)), inputs=np.zeros((11, 1)))
    e = efforts(traj)
    assert np.allclose(e["control_effort"], 0.0)
    assert e["state_effort"][-1] == pytest.approx(1.0)


def test_effort_single_sine_over_period():
    period = 0.35
    t = np.linspace(0.0, period, 4001)
    u = np.sin(2 * math.pi * t / period)[:, None]
    traj = Trajectory(t, np.zeros((len(t), 1)), inputs=u)
    e = efforts(traj)
    assert e["control_effort"][-1] == pytest.approx(period / 2.0, rel=1e-6)


def test_efforts_monotone(example3):
    traj = simulate_original(example3.system, example3.x0, 2.0)
    e = efforts(traj, example3.system)
    assert np.all(np.diff(e["control_effort"]) >= -1e-15)
    assert np.all(np.diff(e["state_effort"]) >= -1e-15)


def test_efforts_requires_inputs():
    t = np.linspace(0.0, 1.0, 5)
    traj = Trajectory(t, np.zeros((5, 1)))
    with pytest.raises(ValueError):
        efforts(traj)


def test_full_state_switch():
    t = np.linspace(0.0, 1.0, 101)
    states = np.column_stack([np.ones_like(t), 2.0 * np.ones_like(t)])
    traj = Trajectory(t, states, inputs=np.zeros((101, 1)))
    first = efforts(traj)["state_effort"][-1]
    full = efforts(traj, full_state=True)["state_effort"][-1]
    assert first == pytest.approx(1.0)
    assert full == pytest.approx(5.0)


# ---------------------------------------------------------------------------
# CSV round trip


def test_trajectory_csv_round_trip(tmp_path):
    t = np.linspace(0.0, 1.0, 7)
    states = np.column_stack([np.sin(t), np.cos(t)])
    inputs = np.column_stack([np.sin(3 * t)])
    traj = Trajectory(t, states, inputs=inputs)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,x1,x2,u1"
    back = read_trajectory_csv(path)
    assert np.array_equal(back.t, t)
    assert np.array_equal(back.states, states)
    assert np.array_equal(back.inputs, inputs)
