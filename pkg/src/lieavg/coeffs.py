"""Period-averaged iterated-integral coefficients of the averaged system.

All production integrals run in the fast time scale tau = omega * t, where
the integrands are omega-free; omega enters a coefficient only through the
stored exponent (``numeric value = value * omega**omega_exponent``), so one
table serves a whole omega sweep.  The common period is

    T' = 2*pi * LCM(1/k_1, ..., 1/k_m)

computed exactly over the rationals.  Nested integrals are evaluated by
cumulative prefix integration on a uniform grid: composite Simpson panels
with a quadratic (5, 8, -1)/12 half-panel rule at odd points, giving O(h^4)
accuracy at every grid point with one O(N) pass per nesting level.  Each
coefficient is accepted only when doubling the grid moves it by less than a
relative 1e-8, otherwise it is flagged unconverged.

The second-order "legacy" coefficient forms that older averaged systems use
are also provided; they integrate on the slow time grid at a concrete omega
and serve as an independent cross-check of the tau-scale bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .jetexpr import compile_array
from .system import ControlAffineSystem
from .geometry import BracketTerm, enumerate_brackets

__all__ = [
    "TWO_PI",
    "CommonPeriod",
    "common_period",
    "Coefficient",
    "CoefficientTable",
    "nu2",
    "nu3",
    "beta",
    "nu2_legacy",
    "nu3_legacy",
    "cumulative_integral",
    "simpson_total",
    "coefficient_class",
    "DEFAULT_GRID",
    "MAX_GRID",
    "CONVERGENCE_RTOL",
    "BOUNDED_EXPONENT_TOL",
]

TWO_PI = 2.0 * math.pi

DEFAULT_GRID = 4096
MAX_GRID = 65536
CONVERGENCE_RTOL = 1e-8
# |omega exponent| at or below this counts as omega-free ("bounded" class)
BOUNDED_EXPONENT_TOL = 1e-9


# --------------------------------------------------------------------------
# common period


@dataclass(frozen=True)
class CommonPeriod:
    """T' as an exact rational multiple of 2*pi plus its float value."""

    multiplier: Fraction  # T' = 2*pi * multiplier
    value: float

    def __float__(self) -> float:
        return self.value


def common_period(ks: Iterable[Fraction]) -> CommonPeriod:
    """Least common period of the phases k_i * tau, exact over the rationals.

    The least common multiple of the inverse ratios 1/k_i is
    lcm(denominators of k) / gcd(numerators of k).
    """
    ks = [Fraction(k) for k in ks]
    if not ks:
        raise ValueError("need at least one frequency ratio")
    if any(k <= 0 for k in ks):
        raise ValueError("frequency ratios must be positive")
    lcm_den = math.lcm(*(k.denominator for k in ks))
    gcd_num = math.gcd(*(k.numerator for k in ks))
    mult = Fraction(lcm_den, gcd_num)
    return CommonPeriod(mult, TWO_PI * float(mult))


# --------------------------------------------------------------------------
# quadrature primitives


def simpson_total(y: np.ndarray, h: float) -> float:
    """Composite Simpson over the whole (even-panelled) grid."""
    n = len(y) - 1
    if n % 2:
        raise ValueError("need an even number of panels")
    return float((h / 3.0) * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def cumulative_integral(y: np.ndarray, h: float) -> np.ndarray:
    """All-points prefix integral of samples ``y`` on a uniform grid.

    Even points accumulate composite Simpson panels; odd points add the
    quadratic half-panel rule h*(5*y0 + 8*y1 - y2)/12, keeping every prefix
    value at O(h^4).
    """
    n = len(y) - 1
    if n % 2:
        raise ValueError("need an even number of panels")
    out = np.empty_like(y)
    out[0] = 0.0
    panels = (h / 3.0) * (y[0:-2:2] + 4.0 * y[1:-1:2] + y[2::2])
    out[2::2] = np.cumsum(panels)
    out[1::2] = out[0:-1:2] + (h / 12.0) * (5.0 * y[0:-1:2] + 8.0 * y[1::2] - y[2::2])
    return out


# --------------------------------------------------------------------------
# sampled waveforms over one common period


class ChannelGrids:
    """u_i(k_i tau) and the running integrals U_i(tau) on one shared grid."""

    def __init__(self, sys: ControlAffineSystem, n: int, scale: np.ndarray | None = None):
        if n % 2:
            raise ValueError("grid size must be even")
        self.period = common_period(sys.k_values)
        self.n = n
        tp = self.period.value
        self.tau = np.linspace(0.0, tp, n + 1)
        self.h = tp / n
        self.u: dict[int, np.ndarray] = {}
        self.U: dict[int, np.ndarray] = {}
        for i, ch in enumerate(sys.channels, start=1):
            k = float(ch.k)
            ufun = compile_array(ch.waveform.expr, ("s",), sys.params)
            u = ufun(k * self.tau)
            if ch.waveform.antiderivative is not None:
                afun = compile_array(ch.waveform.antiderivative, ("s",), sys.params)
                big_u = (afun(k * self.tau) - afun(np.zeros(1))[0]) / k
            else:
                big_u = cumulative_integral(u, self.h)
            if scale is not None:
                u = scale[i - 1] * u
                big_u = scale[i - 1] * big_u
            self.u[i] = u
            self.U[i] = big_u


def _raw_nu2(g: ChannelGrids, j1: int, j2: int) -> float:
    integrand = g.u[j2] * g.U[j1] - g.u[j1] * g.U[j2]
    return simpson_total(integrand, g.h) / (2.0 * g.period.value)


def _raw_nu3(g: ChannelGrids, j1: int, j2: int, j3: int) -> float:
    integrand = (g.u[j2] * g.U[j1] - g.u[j1] * g.U[j2]) * g.U[j3]
    return simpson_total(integrand, g.h) / (3.0 * g.period.value)


def _raw_beta(g: ChannelGrids, j1: int, j2: int, j3: int, j4: int, family: str) -> float:
    inner = g.u[j2] * g.U[j1] - g.u[j1] * g.U[j2]
    inner2 = cumulative_integral(inner, g.h)
    if family == "beta1":
        c1 = cumulative_integral(g.u[j3] * inner2, g.h)
        c2 = cumulative_integral(g.u[j4] * inner2, g.h)
        integrand = g.u[j4] * c1 - g.u[j3] * c2
    elif family == "beta2":
        c1 = cumulative_integral(g.u[j3] * inner2, g.h)
        e = cumulative_integral(inner * g.U[j4], g.h)
        integrand = g.u[j4] * c1 - g.u[j3] * e
    else:
        raise ValueError(f"unknown quartic family {family!r}")
    return simpson_total(integrand, g.h) / (12.0 * g.period.value)


# --------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class Coefficient:
    """One period-averaged coefficient: omega-free value plus omega bookkeeping."""

    family: str
    indices: tuple[int, ...]
    value: float
    omega_exponent: float
    converged: bool
    grid: int

    @property
    def boundedness(self) -> str:
        return coefficient_class(self.omega_exponent)

    def numeric(self, omega: float) -> float:
        return self.value * omega**self.omega_exponent

    def limit_weight(self, zero_tol: float = 1e-12) -> float:
        """Weight as omega -> infinity; unbounded nonzero values have none."""
        if self.omega_exponent < -BOUNDED_EXPONENT_TOL:
            return 0.0
        if self.omega_exponent <= BOUNDED_EXPONENT_TOL:
            return self.value
        if abs(self.value) <= zero_tol:
            return 0.0
        raise ArithmeticError(
            f"{self.family}{self.indices}: positive omega exponent "
            f"{self.omega_exponent:g} with nonzero value {self.value:g}"
        )


def coefficient_class(omega_exponent: float) -> str:
    if omega_exponent < -BOUNDED_EXPONENT_TOL:
        return "vanishing"
    if omega_exponent <= BOUNDED_EXPONENT_TOL:
        return "bounded"
    return "unbounded"


def _converge(
    raw: Callable[[int], float], n_start: int, n_max: int
) -> tuple[float, bool, int]:
    n = n_start
    prev = raw(n)
    while 2 * n <= n_max:
        cur = raw(2 * n)
        if abs(cur - prev) <= CONVERGENCE_RTOL * max(1.0, abs(cur)):
            return cur, True, 2 * n
        n *= 2
        prev = cur
    return prev, False, n


class _GridCache:
    def __init__(self, sys: ControlAffineSystem, scale: np.ndarray | None = None):
        self.sys = sys
        self.scale = scale
        self._grids: dict[int, ChannelGrids] = {}

    def __call__(self, n: int) -> ChannelGrids:
        g = self._grids.get(n)
        if g is None:
            g = ChannelGrids(self.sys, n, self.scale)
            self._grids[n] = g
        return g


def _exponent(sys: ControlAffineSystem, indices: Sequence[int]) -> float:
    ps = sys.p_values
    return float(sum(ps[j - 1] for j in indices) - (len(indices) - 1))


def _make_coefficient(
    sys: ControlAffineSystem,
    family: str,
    indices: tuple[int, ...],
    raw: Callable[[ChannelGrids], float],
    n: int | None,
    grids: _GridCache | None = None,
) -> Coefficient:
    grids = grids or _GridCache(sys)
    value, ok, used = _converge(lambda nn: raw(grids(nn)), n or DEFAULT_GRID, MAX_GRID)
    return Coefficient(family, indices, value, _exponent(sys, indices), ok, used)


def nu2(sys: ControlAffineSystem, j1: int, j2: int, n: int | None = None) -> Coefficient:
    """Quadratic coefficient: average of u_{j2} U_{j1} - u_{j1} U_{j2} over 2 T'.

    Repeated indices are admitted and give an exact zero (the integrand is
    antisymmetric in the pair).
    """
    if not 1 <= j1 <= j2 <= sys.m:
        raise ValueError("need 1 <= j1 <= j2 <= m")
    return _make_coefficient(sys, "nu2", (j1, j2), lambda g: _raw_nu2(g, j1, j2), n)


def nu3(sys: ControlAffineSystem, j1: int, j2: int, j3: int, n: int | None = None) -> Coefficient:
    """Cubic coefficient: the quadratic integrand weighted by U_{j3}, over 3 T'."""
    if not 1 <= j1 <= j2 <= sys.m:
        raise ValueError("need 1 <= j1 <= j2 <= m")
    if not 1 <= j3 <= sys.m:
        raise ValueError("j3 out of range")
    return _make_coefficient(sys, "nu3", (j1, j2, j3), lambda g: _raw_nu3(g, j1, j2, j3), n)


def beta(
    sys: ControlAffineSystem,
    j1: int,
    j2: int,
    j3: int,
    j4: int,
    family: str = "beta1",
    n: int | None = None,
) -> Coefficient:
    """Quartic coefficients for the order-4 bracket families.

    ``beta1`` weights [[b_{j1},b_{j2}],[b_{j3},b_{j4}]] (j3 < j4 and the pairs
    distinct); ``beta2`` weights [[[b_{j1},b_{j2}],b_{j3}],b_{j4}] with free
    j3, j4.  Both average a triple/quadruple iterated integral over 12 T'.
    """
    if not 1 <= j1 <= j2 <= sys.m:
        raise ValueError("need 1 <= j1 <= j2 <= m")
    if not (1 <= j3 <= sys.m and 1 <= j4 <= sys.m):
        raise ValueError("j3/j4 out of range")
    if family == "beta1":
        if not j3 < j4:
            raise ValueError("beta1 needs j3 < j4")
        if (j1, j2) == (j3, j4):
            raise ValueError("beta1 needs distinct index pairs")
    elif family != "beta2":
        raise ValueError(f"unknown quartic family {family!r}")
    return _make_coefficient(
        sys,
        family,
        (j1, j2, j3, j4),
        lambda g: _raw_beta(g, j1, j2, j3, j4, family),
        n,
    )


# --------------------------------------------------------------------------
# legacy second-order forms (slow-time-scale integrals at a concrete omega)


class _LegacyGrids:
    """Waveform samples over one slow-time period T = T'/omega."""

    def __init__(self, sys: ControlAffineSystem, n: int):
        if n % 2:
            raise ValueError("grid size must be even")
        self.period_tau = common_period(sys.k_values)
        self.T = self.period_tau.value / sys.omega
        self.t = np.linspace(0.0, self.T, n + 1)
        self.h = self.T / n
        self.u: dict[int, np.ndarray] = {}
        self.Ut: dict[int, np.ndarray] = {}
        for i, ch in enumerate(sys.channels, start=1):
            kw = float(ch.k) * sys.omega
            ufun = compile_array(ch.waveform.expr, ("s",), sys.params)
            u = ufun(kw * self.t)
            self.u[i] = u
            self.Ut[i] = cumulative_integral(u, self.h)


def _legacy_coefficient(
    sys: ControlAffineSystem,
    family: str,
    indices: tuple[int, ...],
    raw: Callable[[_LegacyGrids], float],
    n: int | None,
) -> Coefficient:
    cache: dict[int, _LegacyGrids] = {}

    def for_n(nn: int) -> float:
        g = cache.get(nn)
        if g is None:
            g = _LegacyGrids(sys, nn)
            cache[nn] = g
        return raw(g)

    value_at_omega, ok, used = _converge(for_n, n or DEFAULT_GRID, MAX_GRID)
    exponent = _exponent(sys, indices)
    return Coefficient(
        family, indices, value_at_omega / sys.omega**exponent, exponent, ok, used
    )


def nu2_legacy(sys: ControlAffineSystem, i: int, j: int, n: int | None = None) -> Coefficient:
    """Slow-time double integral (omega^{p_i+p_j}/T) iint u_j u_i, at sys.omega.

    Stored in the shared omega-free normal form: ``numeric(sys.omega)``
    reproduces the slow-time value.
    """
    if not (1 <= i <= sys.m and 1 <= j <= sys.m):
        raise ValueError("channel index out of range")
    psum = sys.p_values[i - 1] + sys.p_values[j - 1]

    def raw(g: _LegacyGrids) -> float:
        integrand = g.u[j] * g.Ut[i]
        return sys.omega**psum / g.T * simpson_total(integrand, g.h)

    return _legacy_coefficient(sys, "legacy_nu2", (i, j), raw, n)


def nu3_legacy(
    sys: ControlAffineSystem, i: int, j: int, k: int, n: int | None = None
) -> Coefficient:
    """Slow-time triple integral with the antisymmetrised double-integral core."""
    if not all(1 <= v <= sys.m for v in (i, j, k)):
        raise ValueError("channel index out of range")
    ps = sys.p_values
    psum = ps[i - 1] + ps[j - 1] + ps[k - 1]

    def raw(g: _LegacyGrids) -> float:
        core = g.u[j] * g.Ut[i] - g.u[i] * g.Ut[j]
        inner = cumulative_integral(core, g.h)
        integrand = g.u[k] * inner
        return sys.omega**psum / (3.0 * g.T) * simpson_total(integrand, g.h)

    return _legacy_coefficient(sys, "legacy_nu3", (i, j, k), raw, n)


# --------------------------------------------------------------------------
# coefficient table


_RAW_BY_FAMILY = {
    "nu2": lambda g, idx: _raw_nu2(g, *idx),
    "nu3": lambda g, idx: _raw_nu3(g, *idx),
    "beta1": lambda g, idx: _raw_beta(g, *idx, family="beta1"),
    "beta2": lambda g, idx: _raw_beta(g, *idx, family="beta2"),
}


@dataclass
class CoefficientTable:
    """Every coefficient needed to assemble a truncation of order ``r``."""

    order: int
    period: CommonPeriod
    grid: int
    entries: dict[tuple[str, tuple[int, ...]], Coefficient]

    @staticmethod
    def build(sys: ControlAffineSystem, r: int, n: int | None = None) -> "CoefficientTable":
        grids = _GridCache(sys)
        base = n or DEFAULT_GRID
        entries: dict[tuple[str, tuple[int, ...]], Coefficient] = {}
        for term in enumerate_brackets(sys.m, r):
            key = (term.family, term.indices)
            if key in entries:
                continue
            entries[key] = _make_coefficient(
                sys, term.family, term.indices,
                lambda g, f=term.family, idx=term.indices: _RAW_BY_FAMILY[f](g, idx),
                base,
                grids,
            )
        return CoefficientTable(r, common_period(sys.k_values), base, entries)

    def get(self, family: str, indices: tuple[int, ...]) -> Coefficient:
        return self.entries[(family, indices)]

    def __contains__(self, key) -> bool:
        return key in self.entries

    def covers(self, terms: Iterable[BracketTerm]) -> bool:
        return all((t.family, t.indices) in self.entries for t in terms)

    def rows(self) -> list[Coefficient]:
        return [self.entries[k] for k in sorted(self.entries)]

    def to_csv(self, path) -> None:
        """family,indices,value,omega_exponent,class,converged (indices inline)."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("family,indices,value,omega_exponent,class,converged\n")
            for c in self.rows():
                idx = ",".join(str(i) for i in c.indices)
                fh.write(
                    f"{c.family},{idx},{c.value:.17g},{c.omega_exponent:.17g},"
                    f"{c.boundedness},{'true' if c.converged else 'false'}\n"
                )
