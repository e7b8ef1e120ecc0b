"""Bundled example systems with their published-style parameter sets.

Six presets ship with the package:

``example1``
    Scalar plant with a washout filter, two unit-frequency inputs at
    exponent 1/2, quartic objective.  Its order-2 truncation is the gradient
    flow  dz1/dt = (a/2) * dJ/dz1  (the sum rule p1 + p2 = m - 1 holds, so
    order 2 already captures the large-omega behaviour).

``example2``
    Newton-style seeker with gradient and curvature demodulation channels.
    Its order-3 limit truncation is  b0 + (0, 0, wy * J', wz * J'');
    truncating at order 2 loses the curvature estimate and the closed loop
    goes unstable.

``example3`` / ``example3_baseline``
    Four-input seeker whose order-4 truncation carries third-derivative
    content, against a Newton-style baseline on the same concave quartic
    objective (gain signs oriented for maximum seeking).

``example4`` / ``example4_baseline``
    Input-vanishing-amplitude design (four inputs, exponents 0.99/0.01 and
    frequency ratios 1 and 1/4) against its classical two-input version at
    exponent 1/2.  The fields are defined piecewise: they switch off on the
    zero set of the objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .jetexpr import parse
from .system import Box, ControlAffineSystem, ControlChannel, Waveform

__all__ = ["Preset", "build", "PRESET_NAMES"]

PRESET_NAMES = (
    "example1",
    "example2",
    "example3",
    "example3_baseline",
    "example4",
    "example4_baseline",
)

_SIN = ("sin(s)", "-cos(s)")
_COS = ("cos(s)", "sin(s)")


@dataclass
class Preset:
    name: str
    system: ControlAffineSystem
    x0: tuple[float, ...]
    t_final: float
    dt: float | None  # oscillatory-system step; None = harmonic rule
    dt_lbs: float  # step for the autonomous truncations
    notes: str = ""

    def closed_form_rhs(self, z) -> np.ndarray | None:
        """Documented closed form of the relevant truncation, where one exists."""
        z = np.asarray(z, dtype=float)
        p = self.system.params
        if self.name == "example1":
            # order-2: gradient ascent at rate a/2 plus the filter dynamics
            grad = -4.0 * p["H"] * (z[0] - 1.0) ** 3
            obj = -p["H"] * (z[0] - 1.0) ** 4
            return np.array([0.5 * p["a"] * grad, p["h"] * (obj - z[1])])
        if self.name == "example2":
            # order-3 limit: b0 + (0, 0, wy * J', wz * J'')
            grad = 2.0 * p["H"] * (z[0] - 1.0)
            hess = 2.0 * p["H"]
            return np.array(
                [
                    p["rho"] * z[1],
                    -p["omega_d"] * (z[2] + z[3] * z[1]),
                    -p["omega_y"] * z[2] + p["omega_y"] * grad,
                    -p["omega_z"] * z[3] + p["omega_z"] * hess,
                ]
            )
        return None


def _channel(i, field, p, k, wave):
    expr, anti = wave
    return ControlChannel(
        index=i,
        p=p,
        k=Fraction(k),
        waveform=Waveform.from_text(expr, anti),
        field=tuple(parse(c) for c in field),
    )


def _scalar_washout(params, channels, omega, box) -> ControlAffineSystem:
    return ControlAffineSystem(
        dim=2,
        drift=(parse("0"), parse("h*(-H*(x1-1)^4 - x2)")),
        channels=channels,
        omega=omega,
        params=params,
        domain=box,
    )


def _newton_seeker(params, objective, omega, box) -> ControlAffineSystem:
    """Gradient/curvature demodulation structure shared by example2 and the
    example3 baseline.  The z-filter is stabilising (-omega_z * z): the
    curvature estimate must settle for the update d -> -y/z to make sense.
    """
    return ControlAffineSystem(
        dim=4,
        drift=(
            parse("rho*x2"),
            parse("-omega_d*(x3 + x4*x2)"),
            parse("-omega_y*x3"),
            parse("-omega_z*x4"),
        ),
        channels=(
            _channel(1, ("1", "0", "0", "0"), params["p1"], 1, _SIN),
            _channel(2, ("0", "0", f"a2*({objective})", "0"), params["p2"], 1, _COS),
            _channel(3, ("0", "0", "0", f"a3*({objective})"), params["p3"], 2, _COS),
        ),
        omega=omega,
        params={k: v for k, v in params.items() if k not in ("p1", "p2", "p3")},
        domain=box,
    )


def _vanishing_amplitude(params, channels, omega, box) -> ControlAffineSystem:
    return ControlAffineSystem(
        dim=1,
        drift=(parse("0"),),
        channels=channels,
        omega=omega,
        params=params,
        domain=box,
        zero_guard=parse("H*(x1-1)^4"),
    )


def build(name: str) -> Preset:
    """Construct a preset by name; raises ``KeyError`` for unknown names."""
    if name == "example1":
        params = {"H": 0.1, "h": 5.0, "a": 1.0}
        sys = _scalar_washout(
            params,
            (
                _channel(1, ("-H*(x1-1)^4 - x2", "0"), 0.5, 1, _SIN),
                _channel(2, ("a", "0"), 0.5, 1, _COS),
            ),
            omega=20.0,
            box=Box((-1.0, -10.0), (5.0, 2.0)),
        )
        return Preset(
            name,
            sys,
            x0=(4.0, 0.0),
            t_final=50.0,
            dt=None,
            dt_lbs=0.01,
            notes="two inputs at exponent 1/2; order 2 is already complete",
        )

    if name == "example2":
        params = {
            "H": 2.0,
            "rho": 0.3,
            "omega_d": 0.5,
            "omega_y": 20.0,
            "omega_z": 0.5,
            "a2": -2.0 * 1.0 * 20.0,
            "a3": 8.0 * 1.0**2 * 0.5,
            "p1": 0.51,
            "p2": 0.49,
            "p3": 0.98,
        }
        sys = _newton_seeker(
            params,
            "H*(x1-1)^2",
            omega=20.0,
            box=Box((-1.5, -60.0, -300.0, -10.0), (3.5, 60.0, 300.0, 10.0)),
        )
        return Preset(
            name,
            sys,
            x0=(2.0, 0.0, 0.0, 0.0),
            t_final=100.0,
            dt=None,
            dt_lbs=0.01,
            notes=(
                "convex quadratic objective; order 3 (limit) is the Newton "
                "closed form, order 2 loses the curvature channel and the "
                "d-loop turns unstable"
            ),
        )

    if name == "example3":
        params = {"H": 0.2, "h": 5.0, "a": 1.0}
        sys = _scalar_washout(
            params,
            (
                _channel(1, ("-H*(x1-1)^4 - x2", "0"), 0.5, 1, _SIN),
                _channel(2, ("a", "0"), 0.5, 1, _COS),
                _channel(3, ("a", "0"), 0.5, Fraction(1, 3), _SIN),
                _channel(4, ("a", "0"), 0.99, Fraction(3, 2), _COS),
            ),
            omega=100.0,
            box=Box((-1.0, -25.0), (5.0, 2.0)),
        )
        return Preset(
            name,
            sys,
            x0=(3.0, 0.0),
            t_final=40.0,
            dt=None,
            dt_lbs=0.01,
            notes="four inputs; order 4 carries third-derivative content",
        )

    if name == "example3_baseline":
        params = {
            "H": 0.2,
            "rho": 0.3,
            "omega_d": 0.5,
            "omega_y": 20.0,
            "omega_z": 0.5,
            # gain signs flipped relative to example2: the objective is
            # concave (maximum seeking), so the filters must track -J' and
            # -J'' to keep the d-loop stable
            "a2": 2.0 * 1.0 * 20.0,
            "a3": -8.0 * 1.0**2 * 0.5,
            "p1": 0.51,
            "p2": 0.49,
            "p3": 0.98,
        }
        sys = _newton_seeker(
            params,
            "-H*(x1-1)^4",
            omega=100.0,
            box=Box((-3.0, -60.0, -300.0, -10.0), (8.0, 60.0, 300.0, 90.0)),
        )
        return Preset(
            name,
            sys,
            x0=(4.0, 26.6, 0.0, 0.0),
            t_final=40.0,
            dt=None,
            dt_lbs=0.005,
            notes="Newton-style baseline on the concave quartic objective",
        )

    if name in ("example4", "example4_baseline"):
        params = {"H": 1.0 / 3.0}
        obj = "H*(x1-1)^4"
        amp = f"sqrt((1 - exp(-({obj})))/(1 + exp({obj})))"
        phase = f"exp({obj}) + 2*log(exp({obj}) - 1)"
        b_sin = (f"{amp}*sin({phase})",)
        b_cos = (f"{amp}*cos({phase})",)
        box = Box((0.0,), (2.6,))
        if name == "example4":
            channels = (
                _channel(1, b_sin, 0.99, 1, _COS),
                _channel(2, b_cos, 0.01, 1, _SIN),
                _channel(3, b_sin, 0.99, Fraction(1, 4), _COS),
                _channel(4, b_cos, 0.01, Fraction(1, 4), _SIN),
            )
            notes = "input-vanishing amplitude, four inputs (0.99/0.01 exponents)"
        else:
            channels = (
                _channel(1, b_sin, 0.5, 1, _COS),
                _channel(2, b_cos, 0.5, 1, _SIN),
            )
            notes = "two-input classical version of the vanishing-amplitude design"
        sys = _vanishing_amplitude(params, channels, omega=100.0, box=box)
        return Preset(
            name,
            sys,
            x0=(2.0,),
            t_final=20.0,
            dt=None,
            dt_lbs=0.005,
            notes=notes,
        )

    raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")
