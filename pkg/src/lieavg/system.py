"""Data model for oscillatory control-affine systems and its validity checks.

A system couples a drift field with ``m`` control channels

    dx/dt = b0(x) + sum_i  omega^{p_i} * b_i(x) * u_i(k_i * omega * t)

where each input ``u_i`` is a bounded, zero-mean, 2*pi-periodic waveform in
its phase, ``p_i`` lies strictly between 0 and 1 and ``k_i`` is an exact
positive rational.  The averaging machinery downstream needs smooth fields
(jets up to order 3) and exact period arithmetic, which is why ``k_i`` is
kept as a :class:`fractions.Fraction` end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import jetexpr
from .jetexpr import (
    EvalDomainError,
    Expr,
    ExpressionError,
    UnknownIdentifierError,
    compile_array,
    compile_scalar,
    eval_jet,
    variables,
)
from ._util import halton_points

__all__ = [
    "Waveform",
    "ControlChannel",
    "Box",
    "ControlAffineSystem",
    "CheckResult",
    "ValidationReport",
    "validate",
    "rhs_original",
    "ZERO_GUARD_TOL",
]

TWO_PI = 2.0 * math.pi

# |guard expression| at or below this value switches the control fields off
# (piecewise-defined systems whose inputs vanish on a level set).
ZERO_GUARD_TOL = 1e-12

_PERIODICITY_TOL = 1e-9
_ZERO_MEAN_TOL = 1e-8
_BOUNDED_GRID = 4096
_PERIOD_PROBES = 16


@dataclass(frozen=True)
class Waveform:
    """2*pi-periodic scalar input, optionally with a closed-form antiderivative.

    ``expr`` is a function of the phase variable ``s`` (plus named
    parameters).  When ``antiderivative`` is supplied (d/ds antiderivative =
    expr), downstream quadrature uses it instead of a numeric prefix
    integral, removing one layer of discretisation error.
    """

    expr: Expr
    antiderivative: Expr | None = None

    @staticmethod
    def from_text(expr: str, antiderivative: str | None = None) -> "Waveform":
        return Waveform(
            jetexpr.parse(expr),
            jetexpr.parse(antiderivative) if antiderivative else None,
        )


@dataclass(frozen=True)
class ControlChannel:
    """One control input: amplitude exponent, frequency ratio, waveform, field."""

    index: int  # 1-based, matching coefficient subscripts
    p: float
    k: Fraction
    waveform: Waveform
    field: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "k", Fraction(self.k))


@dataclass(frozen=True)
class Box:
    """Compact axis-aligned box used for validation probes and exit checks."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds must have equal lengths")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box lower bound exceeds upper bound")

    def sample(self, count: int) -> list[tuple[float, ...]]:
        center = tuple((lo + hi) / 2.0 for lo, hi in zip(self.lower, self.upper))
        return [center] + halton_points(count - 1, self.lower, self.upper)

    def contains(self, x: Sequence[float]) -> bool:
        return all(lo <= v <= hi for v, lo, hi in zip(x, self.lower, self.upper))


@dataclass
class ControlAffineSystem:
    """Immutable-by-convention container for one control-affine system."""

    dim: int
    drift: tuple[Expr, ...]
    channels: tuple[ControlChannel, ...]
    omega: float
    params: Mapping[str, float] = field(default_factory=dict)
    domain: Box | None = None
    zero_guard: Expr | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("state dimension must be >= 1")
        if len(self.drift) != self.dim:
            raise ValueError("drift needs one component per state")
        if not self.channels:
            raise ValueError("need at least one control channel")
        for ch in self.channels:
            if len(ch.field) != self.dim:
                raise ValueError(f"channel {ch.index} field needs {self.dim} components")
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        self.drift = tuple(self.drift)
        self.channels = tuple(self.channels)
        self.params = dict(self.params)
        self._compiled = None

    # compiled callables are a cache and cannot cross process boundaries
    def __getstate__(self):
        state = self.__dict__.copy()
        state["_compiled"] = None
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)

    # ------------------------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.channels)

    @property
    def state_names(self) -> tuple[str, ...]:
        return tuple(f"x{i + 1}" for i in range(self.dim))

    @property
    def k_values(self) -> tuple[Fraction, ...]:
        return tuple(ch.k for ch in self.channels)

    @property
    def p_values(self) -> tuple[float, ...]:
        return tuple(ch.p for ch in self.channels)

    def with_omega(self, omega: float) -> "ControlAffineSystem":
        return replace(self, omega=float(omega))

    def field_exprs(self, index: int) -> tuple[Expr, ...]:
        """Vector field by index: 0 is the drift, 1..m the control fields."""
        if index == 0:
            return self.drift
        return self.channels[index - 1].field

    def default_box(self) -> Box:
        if self.domain is not None:
            return self.domain
        return Box((-1.0,) * self.dim, (1.0,) * self.dim)

    # ------------------------------------------------------------------
    def _compile(self):
        if self._compiled is None:
            names = self.state_names
            drift = [compile_scalar(e, names, self.params) for e in self.drift]
            fields = [
                [compile_scalar(e, names, self.params) for e in ch.field]
                for ch in self.channels
            ]
            waves = [
                compile_scalar(ch.waveform.expr, ("s",), self.params)
                for ch in self.channels
            ]
            guard = (
                compile_scalar(self.zero_guard, names, self.params)
                if self.zero_guard is not None
                else None
            )
            self._compiled = (drift, fields, waves, guard)
        return self._compiled

    def guard_active(self, x: Sequence[float]) -> bool:
        if self.zero_guard is None:
            return False
        _, _, _, guard = self._compile()
        return abs(guard(tuple(x))) <= ZERO_GUARD_TOL

    def input_values(self, t: float) -> np.ndarray:
        """u_i(k_i * omega * t) for every channel."""
        _, _, waves, _ = self._compile()
        w = self.omega
        return np.array([waves[i]((float(ch.k) * w * t,)) for i, ch in enumerate(self.channels)])

    def make_rhs(self):
        """Fast time-dependent right-hand side f(t, x) -> ndarray."""
        drift, fields, waves, guard = self._compile()
        omega = self.omega
        kw = [float(ch.k) * omega for ch in self.channels]
        amp = [omega**ch.p for ch in self.channels]
        dim = self.dim
        m = self.m

        def rhs(t: float, x: np.ndarray) -> np.ndarray:
            xt = tuple(x)
            out = np.empty(dim)
            for c in range(dim):
                out[c] = drift[c](xt)
            if guard is not None and abs(guard(xt)) <= ZERO_GUARD_TOL:
                return out
            for i in range(m):
                coef = amp[i] * waves[i]((kw[i] * t,))
                fi = fields[i]
                for c in range(dim):
                    out[c] += coef * fi[c](xt)
            return out

        return rhs

    def make_input_sampler(self):
        _, _, waves, _ = self._compile()
        kw = [float(ch.k) * self.omega for ch in self.channels]
        m = self.m

        def inputs(t: float) -> np.ndarray:
            return np.array([waves[i]((kw[i] * t,)) for i in range(m)])

        return inputs


def rhs_original(sys: ControlAffineSystem, t: float, x) -> np.ndarray:
    """State derivative of the oscillatory system at time ``t`` and state ``x``.

    Evaluation errors are re-raised with the offending channel index attached.
    """
    x = np.asarray(x, dtype=float)
    drift, fields, waves, guard = sys._compile()
    xt = tuple(x)
    try:
        out = np.array([f(xt) for f in drift])
    except (ExpressionError, ZeroDivisionError, ValueError) as err:
        raise EvalDomainError(f"drift evaluation failed: {err}") from err
    if guard is not None and abs(guard(xt)) <= ZERO_GUARD_TOL:
        return out
    for i, ch in enumerate(sys.channels):
        try:
            coef = sys.omega**ch.p * waves[i]((float(ch.k) * sys.omega * t,))
            out += coef * np.array([f(xt) for f in fields[i]])
        except (ExpressionError, ZeroDivisionError, ValueError) as err:
            raise EvalDomainError(f"channel {ch.index} evaluation failed: {err}") from err
    return out


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    channel: int | None = None
    measured: Mapping[str, float] = field(default_factory=dict)
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "channel": self.channel,
            "measured": {k: float(v) for k, v in self.measured.items()},
            "note": self.note,
        }


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def caveats(self) -> list[CheckResult]:
        return [c for c in self.checks if c.note]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.as_dict() for c in self.checks]}

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            where = f" ch{c.channel}" if c.channel is not None else ""
            lines.append(f"[{tag}] {c.name}{where} {dict(c.measured)} {c.note}".rstrip())
        return "\n".join(lines)


def _waveform_checks(sys: ControlAffineSystem, i: int, ch: ControlChannel) -> list[CheckResult]:
    out = []
    try:
        u = compile_array(ch.waveform.expr, ("s",), sys.params)
    except ExpressionError as err:
        return [CheckResult("waveform_evaluable", False, ch.index, note=str(err))]
    extra = set(variables(ch.waveform.expr)) - {"s"} - set(sys.params)
    if extra:
        return [
            CheckResult(
                "waveform_evaluable", False, ch.index, note=f"unbound names {sorted(extra)}"
            )
        ]

    grid = np.linspace(0.0, TWO_PI, _BOUNDED_GRID, endpoint=False)
    vals = u(grid)
    finite = bool(np.all(np.isfinite(vals)))
    sup = float(np.max(np.abs(vals))) if finite else math.inf
    out.append(
        CheckResult(
            "waveform_bounded", finite, ch.index, {"sup": sup, "grid": _BOUNDED_GRID}
        )
    )
    if not finite:
        return out

    probes = np.linspace(0.0, TWO_PI, _PERIOD_PROBES, endpoint=False)
    residual = float(np.max(np.abs(u(probes + TWO_PI) - u(probes))))
    out.append(
        CheckResult(
            "waveform_periodic",
            residual <= _PERIODICITY_TOL,
            ch.index,
            {"residual": residual, "tol": _PERIODICITY_TOL},
        )
    )

    # zero mean over one period, composite Simpson on the boundedness grid
    closed = np.append(vals, u(np.array([TWO_PI])))
    h = TWO_PI / _BOUNDED_GRID
    mean = float(
        (h / 3.0)
        * (closed[0] + closed[-1] + 4 * closed[1:-1:2].sum() + 2 * closed[2:-1:2].sum())
        / TWO_PI
    )
    out.append(
        CheckResult(
            "waveform_zero_mean",
            abs(mean) <= _ZERO_MEAN_TOL,
            ch.index,
            {"mean": mean, "tol": _ZERO_MEAN_TOL},
        )
    )

    if ch.waveform.antiderivative is not None:
        try:
            anti = compile_array(ch.waveform.antiderivative, ("s",), sys.params)
            h_fd = 1e-6
            deriv = (anti(probes + h_fd) - anti(probes - h_fd)) / (2 * h_fd)
            err = float(np.max(np.abs(deriv - u(probes))))
            scale = max(1.0, sup)
            out.append(
                CheckResult(
                    "waveform_antiderivative",
                    err <= 1e-5 * scale,
                    ch.index,
                    {"residual": err},
                )
            )
        except ExpressionError as exc:
            out.append(CheckResult("waveform_antiderivative", False, ch.index, note=str(exc)))
    return out


def validate(sys: ControlAffineSystem, probes: int = 64) -> ValidationReport:
    """Check the standing assumptions on a structurally complete system.

    Each entry of the report covers one property: channel exponents in (0,1),
    positive rational frequency ratios, waveform boundedness / periodicity /
    zero mean, and smoothness of every field (order-3 jet evaluation over a
    probe grid in the declared compact box).  Failures are report entries,
    never exceptions.
    """
    checks: list[CheckResult] = []

    for ch in sys.channels:
        checks.append(
            CheckResult(
                "exponent_in_unit_interval",
                0.0 < ch.p < 1.0,
                ch.index,
                {"p": ch.p},
            )
        )
        checks.append(
            CheckResult(
                "frequency_ratio_positive_rational",
                ch.k > 0,
                ch.index,
                {"num": ch.k.numerator, "den": ch.k.denominator},
            )
        )
        checks.extend(_waveform_checks(sys, ch.index - 1, ch))

    box = sys.default_box()
    points = box.sample(max(2, probes))
    guard_skips = 0
    for idx in range(0, sys.m + 1):
        exprs = sys.field_exprs(idx)
        label = "drift" if idx == 0 else f"field_{idx}"
        bad: str | None = None
        worst = 0.0
        for comp, exprc in enumerate(exprs):
            unbound = set(variables(exprc)) - set(sys.state_names) - set(sys.params)
            if unbound:
                bad = f"component {comp + 1}: unbound names {sorted(unbound)}"
                break
            for pt in points:
                if idx > 0 and sys.zero_guard is not None and sys.guard_active(pt):
                    guard_skips += 1
                    continue
                try:
                    jet = eval_jet(exprc, pt, sys.params, order=3, var_names=sys.state_names)
                except ExpressionError as err:
                    bad = f"component {comp + 1} at {tuple(round(v, 6) for v in pt)}: {err}"
                    break
                if not np.all(np.isfinite(jet.coeffs)):
                    bad = f"component {comp + 1}: non-finite jet at {tuple(round(v, 6) for v in pt)}"
                    break
                worst = max(worst, float(np.max(np.abs(jet.coeffs))))
            if bad:
                break
        checks.append(
            CheckResult(
                f"smooth_{label}",
                bad is None,
                None if idx == 0 else idx,
                {"max_jet_coeff": worst, "probes": len(points)},
                note=bad or "",
            )
        )

    if sys.zero_guard is not None:
        checks.append(
            CheckResult(
                "piecewise_guard_caveat",
                True,
                None,
                {"skipped_probes": guard_skips, "guard_tol": ZERO_GUARD_TOL},
                note=(
                    "control fields are switched off where the guard expression "
                    "vanishes; smoothness is not certified on that set"
                ),
            )
        )
    return ValidationReport(checks)
