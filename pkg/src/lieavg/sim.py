"""Fixed-step trajectory integration, comparison metrics, and effort integrals.

Integration is classical fourth-order Runge-Kutta with a fixed step.  For
the oscillatory system the step honours the fastest input harmonic
(40 points per period of k_max * omega); autonomous averaged systems take
the caller's step directly.  Non-finite states terminate the record with a
divergence marker instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .system import ControlAffineSystem

__all__ = [
    "Trajectory",
    "integrate",
    "step_for_original",
    "simulate_original",
    "simulate_averaged",
    "compare",
    "efforts",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "DEFAULT_POINTS_PER_PERIOD",
]

DEFAULT_POINTS_PER_PERIOD = 40
_DEFAULT_AVERAGED_STEPS = 4000


@dataclass
class Trajectory:
    """Time-stamped state samples, optionally with per-channel input samples."""

    t: np.ndarray
    states: np.ndarray  # shape (len(t), n)
    inputs: np.ndarray | None = None  # shape (len(t), m)
    diverged: bool = False

    def __post_init__(self):
        if len(self.t) != len(self.states):
            raise ValueError("time and state sample counts differ")
        if len(self.t) > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("time grid must be strictly increasing")
        if self.inputs is not None and len(self.inputs) != len(self.t):
            raise ValueError("input sample count differs from time grid")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    def component(self, index: int) -> np.ndarray:
        return self.states[:, index]

    def exits_box(self, lower, upper) -> bool:
        lo = np.asarray(lower)
        hi = np.asarray(upper)
        return bool(np.any(self.states < lo) or np.any(self.states > hi))


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0,
    t_span: tuple[float, float],
    dt: float,
    inputs: Callable[[float], np.ndarray] | None = None,
) -> Trajectory:
    """Fixed-step RK4 over ``t_span``; records every step.

    The step is shrunk minimally so the span divides evenly.  If the state
    leaves the reals (nan/inf), the trajectory is truncated at the offending
    time and flagged diverged.
    """
    t0, tf = float(t_span[0]), float(t_span[1])
    if tf <= t0:
        raise ValueError("empty time span")
    if dt <= 0.0:
        raise ValueError("step must be positive")
    nsteps = max(1, int(math.ceil((tf - t0) / dt - 1e-12)))
    h = (tf - t0) / nsteps
    x = np.asarray(x0, dtype=float).copy()
    times = t0 + h * np.arange(nsteps + 1)
    times[-1] = tf
    states = np.empty((nsteps + 1, x.size))
    states[0] = x
    u_samples = None
    if inputs is not None:
        u0 = inputs(t0)
        u_samples = np.empty((nsteps + 1, u0.size))
        u_samples[0] = u0
    diverged = False
    last = nsteps
    t = t0
    half = h / 2.0
    sixth = h / 6.0
    for i in range(nsteps):
        try:
            k1 = rhs(t, x)
            k2 = rhs(t + half, x + half * k1)
            k3 = rhs(t + half, x + half * k2)
            k4 = rhs(t + h, x + h * k3)
            x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        except (ArithmeticError, ValueError, OverflowError):
            diverged = True
            last = i
            break
        t = t0 + (i + 1) * h
        states[i + 1] = x
        if u_samples is not None:
            u_samples[i + 1] = inputs(t)
        if not np.all(np.isfinite(x)):
            diverged = True
            last = i + 1
            break
    return Trajectory(
        times[: last + 1],
        states[: last + 1],
        u_samples[: last + 1] if u_samples is not None else None,
        diverged,
    )


def step_for_original(sys: ControlAffineSystem, user_dt: float | None = None) -> float:
    """Step rule for the oscillatory system: resolve the fastest harmonic."""
    k_max = max(float(ch.k) for ch in sys.channels)
    resolve = 2.0 * math.pi / (sys.omega * k_max * DEFAULT_POINTS_PER_PERIOD)
    if user_dt is None:
        return resolve
    return min(user_dt, resolve)


def simulate_original(
    sys: ControlAffineSystem,
    x0,
    t_final: float,
    dt: float | None = None,
    record_inputs: bool = True,
) -> Trajectory:
    rhs = sys.make_rhs()
    h = step_for_original(sys, dt)
    sampler = sys.make_input_sampler() if record_inputs else None
    return integrate(rhs, x0, (0.0, t_final), h, inputs=sampler)


def simulate_averaged(avg, x0, t_final: float, dt: float | None = None) -> Trajectory:
    """Integrate an assembled averaged system (time-invariant: user step)."""
    h = dt if dt is not None else t_final / _DEFAULT_AVERAGED_STEPS
    return integrate(avg.make_rhs(), x0, (0.0, t_final), h)


def compare(a: Trajectory, b: Trajectory) -> dict:
    """Sup and RMS Euclidean state distance over the common span.

    ``b`` is resampled onto ``a``'s grid by cubic interpolation (exact when
    the grids already coincide).
    """
    t0 = max(a.t[0], b.t[0])
    tf = min(a.t_final, b.t_final)
    if tf <= t0:
        raise ValueError("trajectories do not overlap in time")
    sel = (a.t >= t0 - 1e-15) & (a.t <= tf + 1e-15)
    ta = a.t[sel]
    xa = a.states[sel]
    if len(b.t) == len(ta) and np.allclose(b.t, ta, rtol=0.0, atol=1e-12):
        xb = b.states
    else:
        spline = CubicSpline(b.t, b.states, axis=0)
        xb = spline(ta)
    dist = np.linalg.norm(xa - xb, axis=1)
    return {
        "t": ta,
        "distance": dist,
        "d_sup": float(np.max(dist)),
        "d_rms": float(np.sqrt(np.mean(dist**2))),
        "t0": float(t0),
        "t_final": float(tf),
        "samples": int(len(ta)),
    }


def _cumulative_trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t), out=out[1:])
    return out


def efforts(traj: Trajectory, sys: ControlAffineSystem | None = None, full_state: bool = False) -> dict:
    """Cumulative control effort (integral of sum u_i^2) and state effort.

    State effort integrates the squared first state component by default,
    matching the scalar-plant usage; ``full_state`` switches to the squared
    Euclidean norm.  Input samples must have been recorded.
    """
    if traj.inputs is None:
        raise ValueError("trajectory has no recorded input samples")
    usq = np.sum(traj.inputs**2, axis=1)
    if full_state:
        xsq = np.sum(traj.states**2, axis=1)
    else:
        xsq = traj.states[:, 0] ** 2
    return {
        "t": traj.t,
        "control_effort": _cumulative_trapezoid(usq, traj.t),
        "state_effort": _cumulative_trapezoid(xsq, traj.t),
    }


# --------------------------------------------------------------------------
# CSV round trip (full double precision)


def write_trajectory_csv(traj: Trajectory, path, stride: int = 1) -> None:
    """One row per sample (every ``stride``-th, endpoint always included)."""
    n = traj.dim
    m = traj.inputs.shape[1] if traj.inputs is not None else 0
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
    rows = list(range(0, len(traj.t), max(1, stride)))
    if rows[-1] != len(traj.t) - 1:
        rows.append(len(traj.t) - 1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [f"{traj.t[row]:.17g}"]
            cells += [f"{v:.17g}" for v in traj.states[row]]
            if traj.inputs is not None:
                cells += [f"{v:.17g}" for v in traj.inputs[row]]
            fh.write(",".join(cells) + "\n")


def read_trajectory_csv(path) -> Trajectory:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    n = sum(1 for h in header if h.startswith("x"))
    m = sum(1 for h in header if h.startswith("u"))
    t = data[:, 0]
    states = data[:, 1 : 1 + n]
    inputs = data[:, 1 + n : 1 + n + m] if m else None
    return Trajectory(t, states, inputs)
