"""Nested commutator (Lie bracket) evaluation on vector fields via jets.

The bracket of two fields is ``[f, g] = (dg/dx) f - (df/dx) g``.  Brackets are
represented as binary trees over field indices (0 = drift, 1..m = control
fields) and evaluated recursively on jets: a depth-``d`` tree queried at jet
order ``q`` consumes leaf jets of order ``q + d``, so with the global order
cap of 3 the trees may nest up to depth 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .jetexpr import Expr, ExpressionError, Jet, _evaluate, eval_jet, jet_space, variables, MAX_ORDER
from .system import ControlAffineSystem

__all__ = [
    "Leaf",
    "Br",
    "BracketExpr",
    "bracket_depth",
    "bracket_jet",
    "bracket_value",
    "enumerate_brackets",
    "BracketTerm",
    "ZeroCheck",
    "is_structural_zero",
    "leaf_classes",
    "canonical_key",
    "FieldJetCache",
]

_NUMERIC_ZERO_TOL = 1e-12
_NUMERIC_PROBES = 8


@dataclass(frozen=True)
class Leaf:
    """Vector field reference: 0 is the drift, i >= 1 the i-th control field."""

    index: int


@dataclass(frozen=True)
class Br:
    left: "BracketExpr"
    right: "BracketExpr"


BracketExpr = Union[Leaf, Br]


def bracket_depth(expr: BracketExpr) -> int:
    if isinstance(expr, Leaf):
        return 0
    return 1 + max(bracket_depth(expr.left), bracket_depth(expr.right))


def _leaves(expr: BracketExpr) -> Iterator[int]:
    if isinstance(expr, Leaf):
        yield expr.index
    else:
        yield from _leaves(expr.left)
        yield from _leaves(expr.right)


class FieldJetCache:
    """Per-point memo of leaf and bracket-subtree jets.

    Brackets sharing a subtree (up to field identity) reuse its jets, which
    matters when an assembled system evaluates many sibling trees per state.
    """

    def __init__(self, sys: ControlAffineSystem, x):
        self.sys = sys
        self.x = tuple(float(v) for v in np.atleast_1d(x))
        if len(self.x) != sys.dim:
            raise ValueError("point dimension mismatch")
        self._classes = leaf_classes(sys)
        self._canon: dict[BracketExpr, object] = {}
        self._memo: dict[tuple[object, int], list[Jet]] = {}
        self._envs: dict[int, dict] = {}

    def _env(self, order: int) -> dict:
        env = self._envs.get(order)
        if env is None:
            space = jet_space(self.sys.dim, order)
            env = {k: float(v) for k, v in self.sys.params.items()}
            for i, name in enumerate(self.sys.state_names):
                env[name] = Jet.variable(space, i, self.x[i])
            self._envs[order] = env
        return env

    def _key(self, expr: BracketExpr):
        got = self._canon.get(expr)
        if got is None:
            got = canonical_key(expr, self._classes)
            self._canon[expr] = got
        return got

    def _truncated(self, key_base, order: int) -> list[Jet] | None:
        # a cached higher-order jet vector truncates bit-exactly
        for higher in range(order + 1, MAX_ORDER + 1):
            got = self._memo.get((key_base, higher))
            if got is not None:
                low = [j.truncate(order) for j in got]
                self._memo[(key_base, order)] = low
                return low
        return None

    def leaf(self, index: int, order: int) -> list[Jet]:
        cls = self._classes[index]
        got = self._memo.get((cls, order))
        if got is None:
            got = self._truncated(cls, order)
        if got is None:
            env = self._env(order)
            space = jet_space(self.sys.dim, order)
            got = []
            for e in self.sys.field_exprs(index):
                v = _evaluate(e, env)
                got.append(v if isinstance(v, Jet) else Jet.constant(space, float(v)))
            self._memo[(cls, order)] = got
        return got

    def bracket(self, expr: BracketExpr, order: int) -> list[Jet]:
        if isinstance(expr, Leaf):
            return self.leaf(expr.index, order)
        key_base = self._key(expr)
        got = self._memo.get((key_base, order))
        if got is None:
            got = self._truncated(key_base, order)
        if got is None:
            a = self.bracket(expr.left, order + 1)
            b = self.bracket(expr.right, order + 1)
            got = _combine(a, b, order)
            self._memo[(key_base, order)] = got
        return got


def _combine(a: list[Jet], b: list[Jet], order: int) -> list[Jet]:
    """[a, b] at jet order ``order`` from children at order ``order + 1``.

    Vectorised across components: with the stacked coefficient arrays A, B
    (components x coeffs), derivative maps D and the multiplication tensor M
    of the target space, the bracket is DB:A - DA:B contracted through M.
    """
    hi = a[0].space
    lo = jet_space(hi.nvars, order)
    A = np.stack([j.coeffs for j in a])
    B = np.stack([j.coeffs for j in b])
    src, fac = hi.deriv_stack()
    DA = A[:, src] * fac  # (components, variables, lower size)
    DB = B[:, src] * fac
    A_low = A[:, : lo.size]
    B_low = B[:, : lo.size]
    mi, mj, scatter = lo.mul_pairs()
    # pairwise products summed over the variable axis, scattered to monomials
    w = np.einsum("cki,kj->cij", DB, A_low, optimize=False)
    v = np.einsum("cki,kj->cij", DA, B_low, optimize=False)
    out = (w[:, mi, mj] - v[:, mi, mj]) @ scatter
    return [Jet(lo, out[c]) for c in range(len(a))]


def bracket_jet(
    expr: BracketExpr,
    sys: ControlAffineSystem,
    x,
    order: int = 0,
    cache: FieldJetCache | None = None,
) -> list[Jet]:
    """Evaluate a bracket tree at ``x`` as a vector of jets of ``order``.

    Requires ``order + depth <= 3`` since each nesting level consumes one jet
    order from the leaves.
    """
    depth = bracket_depth(expr)
    if order + depth > MAX_ORDER:
        raise ValueError(
            f"order {order} + bracket depth {depth} exceeds the jet budget {MAX_ORDER}"
        )
    if cache is None:
        cache = FieldJetCache(sys, x)
    return cache.bracket(expr, order)


def bracket_value(
    expr: BracketExpr,
    sys: ControlAffineSystem,
    x,
    cache: FieldJetCache | None = None,
) -> np.ndarray:
    """Plain vector value of a bracket tree at ``x``."""
    return np.array([j.value for j in bracket_jet(expr, sys, x, 0, cache)])


# --------------------------------------------------------------------------
# enumeration of the trees needed per truncation order


@dataclass(frozen=True)
class BracketTerm:
    family: str  # nu2 | nu3 | beta1 | beta2
    indices: tuple[int, ...]
    expr: BracketExpr


def enumerate_brackets(m: int, r: int) -> list[BracketTerm]:
    """Bracket trees and index ranges feeding truncation order ``r``.

    Order 1 contributes nothing.  Order 2 pairs j1 < j2; order 3 adds a free
    third index on [b_{j3}, [b_{j1}, b_{j2}]]; order 4 adds the two quartic
    families [[.,.],[.,.]] (j1 < j2, j3 < j4, pairs distinct) and
    [[[.,.],.],.] (j1 < j2, j3 and j4 free).
    """
    if not 1 <= r <= 4:
        raise ValueError("truncation order must be in 1..4")
    terms: list[BracketTerm] = []
    if r >= 2:
        for j1 in range(1, m + 1):
            for j2 in range(j1 + 1, m + 1):
                terms.append(BracketTerm("nu2", (j1, j2), Br(Leaf(j1), Leaf(j2))))
    if r >= 3:
        for j1 in range(1, m + 1):
            for j2 in range(j1 + 1, m + 1):
                for j3 in range(1, m + 1):
                    terms.append(
                        BracketTerm(
                            "nu3",
                            (j1, j2, j3),
                            Br(Leaf(j3), Br(Leaf(j1), Leaf(j2))),
                        )
                    )
    if r >= 4:
        for j1 in range(1, m + 1):
            for j2 in range(j1 + 1, m + 1):
                for j3 in range(1, m + 1):
                    for j4 in range(j3 + 1, m + 1):
                        if (j1, j2) == (j3, j4):
                            continue
                        terms.append(
                            BracketTerm(
                                "beta1",
                                (j1, j2, j3, j4),
                                Br(Br(Leaf(j1), Leaf(j2)), Br(Leaf(j3), Leaf(j4))),
                            )
                        )
        for j1 in range(1, m + 1):
            for j2 in range(j1 + 1, m + 1):
                for j3 in range(1, m + 1):
                    for j4 in range(1, m + 1):
                        terms.append(
                            BracketTerm(
                                "beta2",
                                (j1, j2, j3, j4),
                                Br(Br(Br(Leaf(j1), Leaf(j2)), Leaf(j3)), Leaf(j4)),
                            )
                        )
    return terms


# --------------------------------------------------------------------------
# structural / numeric zero detection


@dataclass(frozen=True)
class ZeroCheck:
    zero: bool
    provenance: str | None = None  # "structural" | "numeric" | None

    def __bool__(self) -> bool:
        return self.zero


def leaf_classes(sys: ControlAffineSystem) -> dict[int, int]:
    """Map each field index to the smallest index with identical components."""
    cached = getattr(sys, "_leaf_classes", None)
    if cached is not None:
        return cached
    classes: dict[int, int] = {}
    seen: list[tuple[int, tuple[Expr, ...]]] = []
    for idx in range(0, sys.m + 1):
        exprs = sys.field_exprs(idx)
        rep = idx
        for other, other_exprs in seen:
            if exprs == other_exprs:
                rep = other
                break
        else:
            seen.append((idx, exprs))
        classes[idx] = rep
    sys._leaf_classes = classes
    return classes


def canonical_key(expr: BracketExpr, classes: dict[int, int]):
    """Structural key identifying bracket trees that evaluate identically."""
    if isinstance(expr, Leaf):
        return classes[expr.index]
    return (canonical_key(expr.left, classes), canonical_key(expr.right, classes))


def _is_constant_field(sys: ControlAffineSystem, index: int) -> bool:
    state = set(sys.state_names)
    return all(not (variables(e) & state) for e in sys.field_exprs(index))


def _structural(expr: BracketExpr, sys: ControlAffineSystem, classes) -> bool:
    if isinstance(expr, Leaf):
        return False
    if _structural(expr.left, sys, classes) or _structural(expr.right, sys, classes):
        return True
    if canonical_key(expr.left, classes) == canonical_key(expr.right, classes):
        return True  # [f, f] = 0
    if (
        isinstance(expr.left, Leaf)
        and isinstance(expr.right, Leaf)
        and _is_constant_field(sys, expr.left.index)
        and _is_constant_field(sys, expr.right.index)
    ):
        return True  # constant fields commute
    return False


def is_structural_zero(
    expr: BracketExpr, sys: ControlAffineSystem, probes: int = _NUMERIC_PROBES
) -> ZeroCheck:
    """Decide whether a bracket tree is identically zero.

    Provably-zero structure (repeated subtrees up to field identity, zero
    subtrees, constant-constant pairs) is reported as ``structural``.
    Otherwise every component is probed at low-discrepancy points of the
    declared box; unanimous magnitudes below 1e-12 report ``numeric``.
    """
    classes = leaf_classes(sys)
    if _structural(expr, sys, classes):
        return ZeroCheck(True, "structural")
    if bracket_depth(expr) > MAX_ORDER:
        return ZeroCheck(False, None)
    box = sys.default_box()
    evaluated = 0
    for pt in box.sample(probes):
        if sys.zero_guard is not None and sys.guard_active(pt):
            continue
        try:
            value = bracket_value(expr, sys, pt)
        except ExpressionError:
            continue
        if not np.all(np.isfinite(value)):
            return ZeroCheck(False, None)
        evaluated += 1
        if np.max(np.abs(value)) >= _NUMERIC_ZERO_TOL:
            return ZeroCheck(False, None)
    if evaluated == 0:
        return ZeroCheck(False, None)
    return ZeroCheck(True, "numeric")
