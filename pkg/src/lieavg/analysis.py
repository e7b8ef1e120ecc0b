"""Design-condition checking and empirical error-decay estimation.

The feasibility report ties together the admissible scaling window for the
internal exponent p_star, the O(epsilon) ordering condition, and the two
routes to a *complete averaging asymptote* (a finite truncation that captures
the large-omega behaviour): either every exponent stays below r/(r+1) with
all retained coefficients omega-free, or the exponents sum to m-1 so that
every order beyond m carries a negative omega power.  Verdicts derive only
from the exponents, channel count and coefficient classes, never from
trajectories.

The omega sweep measures the trajectory distance between the oscillatory
system and its truncation as omega grows, together with a least-squares
slope of log(distance) against log(epsilon), epsilon = omega**(max_p - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientTable
from .lbs import FAMILY_ORDER, assemble
from .sim import Trajectory, compare, simulate_averaged, simulate_original
from .system import ControlAffineSystem
from ._util import parallel_map, worker_count

__all__ = [
    "DesignReport",
    "check_design",
    "SweepPoint",
    "SweepResult",
    "sweep_omega",
    "settle_time",
    "COR4_SUM_TOL",
]

COR4_SUM_TOL = 1e-9
_LIMIT_VALUE_TOL = 1e-12


@dataclass
class DesignReport:
    order: int
    m: int
    p_values: tuple[float, ...]
    omega: float
    p_star: float
    epsilon: float
    scaling_interval: tuple[float, float]  # admissible (0, min(p_i/2 + 1/2))
    order_epsilon_interval: tuple[float, float]  # [max p, 1) for O(epsilon)
    order_epsilon_feasible: bool
    alt_order_threshold: float  # p_star >= 2*max(p) - 1 gives O(sqrt(epsilon))
    prop_exponent_feasible: bool  # max p < r/(r+1)
    prop_coefficients_bounded: bool
    prop_unbounded_terms: list[str]
    prop_satisfied: bool
    joint_infeasible: bool  # O(epsilon) window and exponent window disjoint
    sum_p: float
    sum_residual: float
    sum_condition_met: bool
    low_orders_bounded: bool
    cor_satisfied: bool
    complete_averaging: bool
    class_counts: dict[str, dict[str, int]]

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "m": self.m,
            "p_values": list(self.p_values),
            "omega": self.omega,
            "p_star": self.p_star,
            "epsilon": self.epsilon,
            "scaling_interval": list(self.scaling_interval),
            "order_epsilon_interval": list(self.order_epsilon_interval),
            "order_epsilon_feasible": self.order_epsilon_feasible,
            "alt_order_threshold": self.alt_order_threshold,
            "exponent_window": {
                "feasible": self.prop_exponent_feasible,
                "coefficients_bounded": self.prop_coefficients_bounded,
                "unbounded_terms": self.prop_unbounded_terms,
                "satisfied": self.prop_satisfied,
                "joint_infeasible_with_order_epsilon": self.joint_infeasible,
            },
            "sum_rule": {
                "sum_p": self.sum_p,
                "target": self.m - 1.0,
                "residual": self.sum_residual,
                "tolerance": COR4_SUM_TOL,
                "sum_condition_met": self.sum_condition_met,
                "low_orders_bounded": self.low_orders_bounded,
                "satisfied": self.cor_satisfied,
            },
            "complete_averaging": self.complete_averaging,
            "class_counts": self.class_counts,
        }


def check_design(
    sys: ControlAffineSystem, r: int, table: CoefficientTable | None = None
) -> DesignReport:
    """Evaluate every scaling/design condition for truncation order ``r``."""
    if table is None:
        table = CoefficientTable.build(sys, r)
    ps = sys.p_values
    max_p = max(ps)
    scaling_hi = min(p / 2.0 + 0.5 for p in ps)

    counts: dict[str, dict[str, int]] = {}
    unbounded: list[str] = []
    low_bounded = True
    prop_bounded = True
    for coeff in table.rows():
        fam_counts = counts.setdefault(coeff.family, {"vanishing": 0, "bounded": 0, "unbounded": 0})
        fam_counts[coeff.boundedness] += 1
        genuinely_unbounded = (
            coeff.boundedness == "unbounded" and abs(coeff.value) > _LIMIT_VALUE_TOL
        )
        if genuinely_unbounded:
            unbounded.append(f"{coeff.family}{coeff.indices}")
            if FAMILY_ORDER[coeff.family] <= r:
                prop_bounded = False
            if FAMILY_ORDER[coeff.family] <= sys.m:
                low_bounded = False

    prop_exponent = max_p < r / (r + 1.0)
    prop_ok = prop_exponent and prop_bounded
    joint_infeasible = not (max_p < r / (r + 1.0))  # [max p, 1) vs (0, r/(r+1))

    sum_p = float(sum(ps))
    residual = abs(sum_p - (sys.m - 1.0))
    sum_ok = residual <= COR4_SUM_TOL
    cor_ok = sum_ok and low_bounded

    return DesignReport(
        order=r,
        m=sys.m,
        p_values=ps,
        omega=sys.omega,
        p_star=max_p,
        epsilon=sys.omega ** (max_p - 1.0),
        scaling_interval=(0.0, scaling_hi),
        order_epsilon_interval=(max_p, 1.0),
        order_epsilon_feasible=max_p < 1.0,
        alt_order_threshold=2.0 * max_p - 1.0,
        prop_exponent_feasible=prop_exponent,
        prop_coefficients_bounded=prop_bounded,
        prop_unbounded_terms=unbounded,
        prop_satisfied=prop_ok,
        joint_infeasible=joint_infeasible,
        sum_p=sum_p,
        sum_residual=residual,
        sum_condition_met=sum_ok,
        low_orders_bounded=low_bounded,
        cor_satisfied=cor_ok,
        complete_averaging=prop_ok or cor_ok,
        class_counts=counts,
    )


# --------------------------------------------------------------------------
# omega sweep


@dataclass(frozen=True)
class SweepPoint:
    omega: float
    epsilon: float
    d_sup: float
    d_rms: float
    diverged: bool


@dataclass
class SweepResult:
    order: int
    p_star: float
    points: list[SweepPoint]
    slope: float
    slope_stderr: float
    slope_band: tuple[float, float]

    def as_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else None

        return {
            "order": self.order,
            "p_star": self.p_star,
            "points": [
                {
                    "omega": p.omega,
                    "epsilon": p.epsilon,
                    "d_sup": num(p.d_sup),
                    "d_rms": num(p.d_rms),
                    "diverged": p.diverged,
                }
                for p in self.points
            ],
            "slope": num(self.slope),
            "slope_stderr": num(self.slope_stderr),
            "slope_band": [num(v) for v in self.slope_band],
        }

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("omega,epsilon,d_sup,d_rms\n")
            for p in self.points:
                fh.write(f"{p.omega:.17g},{p.epsilon:.17g},{p.d_sup:.17g},{p.d_rms:.17g}\n")


def _sweep_one(args) -> SweepPoint:
    sys, r, table, omega, x0, t_final, dt, dt_lbs, p_star, t_burn = args
    sw = sys.with_omega(omega)
    epsilon = omega ** (p_star - 1.0)
    try:
        original = simulate_original(sw, x0, t_final, dt)
        averaged = simulate_averaged(assemble(sw, r, table), x0, t_final, dt_lbs)
        if original.diverged or averaged.diverged:
            return SweepPoint(omega, epsilon, math.inf, math.inf, True)
        metrics = compare(original, averaged)
    except (ArithmeticError, ValueError):
        return SweepPoint(omega, epsilon, math.inf, math.inf, True)
    if t_burn > 0.0:
        sel = metrics["t"] >= t_burn
        dist = metrics["distance"][sel]
        return SweepPoint(
            omega,
            epsilon,
            float(np.max(dist)),
            float(np.sqrt(np.mean(dist**2))),
            False,
        )
    return SweepPoint(omega, epsilon, metrics["d_sup"], metrics["d_rms"], False)


def sweep_omega(
    sys: ControlAffineSystem,
    r: int,
    omegas,
    x0,
    t_final: float,
    dt: float | None = None,
    dt_lbs: float | None = None,
    table: CoefficientTable | None = None,
    t_burn: float = 0.0,
) -> SweepResult:
    """Distance between original and order-``r`` trajectories across omegas.

    Omegas must be strictly increasing (at least three).  Divergence at one
    omega is recorded for that point and the sweep continues.  Points run in
    parallel when LIEAVG_THREADS > 1; the result is order-deterministic.

    ``t_burn`` excludes an initial window from the distance metrics.  Filter
    states initialised away from their quasi-steady values produce an O(1)
    layer whose peak is phase-dependent rather than amplitude-ordered; the
    decay law is cleanly visible only after that layer.
    """
    omegas = [float(w) for w in omegas]
    if len(omegas) < 3:
        raise ValueError("need at least three omega values")
    if any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("omega values must be strictly increasing")
    if table is None:
        table = CoefficientTable.build(sys, r)
    p_star = max(sys.p_values)
    jobs = [
        (sys, r, table, w, tuple(x0), t_final, dt, dt_lbs, p_star, float(t_burn))
        for w in omegas
    ]
    points = parallel_map(_sweep_one, jobs) if worker_count() > 1 else [
        _sweep_one(j) for j in jobs
    ]
    good = [p for p in points if not p.diverged and p.d_sup > 0.0]
    if len(good) >= 2:
        lx = np.log([p.epsilon for p in good])
        ly = np.log([p.d_sup for p in good])
        slope, intercept = np.polyfit(lx, ly, 1)
        resid = ly - (slope * lx + intercept)
        dof = max(1, len(good) - 2)
        sxx = float(np.sum((lx - lx.mean()) ** 2))
        stderr = math.sqrt(float(np.sum(resid**2)) / dof / sxx) if sxx > 0 else math.inf
    else:
        slope, stderr = math.nan, math.nan
    band = (slope - 1.96 * stderr, slope + 1.96 * stderr)
    return SweepResult(r, p_star, points, float(slope), float(stderr), band)


# --------------------------------------------------------------------------
# settle-time metric


def settle_time(
    traj: Trajectory,
    target: float,
    radius: float,
    component: int = 0,
    smooth_window: float | None = None,
) -> float:
    """Earliest time after which the (optionally smoothed) component stays
    within ``radius`` of ``target``; ``inf`` if it never settles.

    ``smooth_window`` applies a trailing moving average of that many seconds
    before thresholding, which removes the bounded input ripple when judging
    convergence of an oscillatory trajectory.
    """
    t = traj.t
    x = traj.states[:, component]
    if smooth_window and len(t) > 1:
        dt = float(t[1] - t[0])
        wlen = max(1, int(round(smooth_window / dt)))
        if wlen > 1:
            kernel = np.full(wlen, 1.0 / wlen)
            x = np.convolve(x, kernel, mode="valid")
            t = t[wlen - 1 :]
    outside = np.abs(x - target) >= radius
    if not outside.any():
        return float(t[0])
    last = int(np.nonzero(outside)[0][-1])
    if last + 1 >= len(t):
        return math.inf
    return float(t[last + 1])
