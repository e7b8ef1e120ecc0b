"""Scalar expression parsing and truncated multivariate Taylor (jet) arithmetic.

Expressions are small closed-form formulas over state variables, the input
phase ``s`` and named parameters.  The grammar (EBNF, also documented in the
README)::

    expr     = term , { ("+" | "-") , term } ;
    term     = "-" , term | product ;
    product  = factor , { ("*" | "/") , factor } ;
    factor   = power ;
    power    = atom , { "^" , integer } ;
    atom     = number | name | name , "(" , expr , ")" | "(" , expr , ")" ;

Binary operators are left-associative; ``^`` accepts only (optionally signed)
integer literals so that every expression stays smooth wherever it is
defined.  Known functions: ``sin cos tan exp log sqrt``.

A :class:`Jet` holds the Taylor coefficients of a scalar in ``n`` variables
truncated at total degree ``d <= 3``.  Arithmetic on jets is exact truncated
polynomial arithmetic, so partial derivatives up to the truncation order come
out at machine precision; degree-0 jets reproduce plain float evaluation
bit-for-bit (shared code paths, identical operation order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Name",
    "Neg",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Call",
    "parse",
    "format_expr",
    "variables",
    "eval_scalar",
    "eval_jet",
    "compile_scalar",
    "compile_array",
    "Jet",
    "JetSpace",
    "jet_space",
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownFunctionError",
    "UnknownIdentifierError",
    "EvalDomainError",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")

MAX_ORDER = 3


# --------------------------------------------------------------------------
# errors


class ExpressionError(Exception):
    """Base class for expression parsing/evaluation failures."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownFunctionError(ExpressionError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown function {name!r} (offset {offset})")
        self.name = name
        self.offset = offset


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name: str):
        super().__init__(f"unknown identifier {name!r}")
        self.name = name


class EvalDomainError(ExpressionError):
    """Evaluation left the domain of an elementary function."""


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Name, Neg, Add, Sub, Mul, Div, Pow, Call]


def format_expr(expr: Expr) -> str:
    """Render an AST back to parseable text; ``parse(format_expr(e)) == e``.

    Output is fully parenthesised, which costs nothing structurally since
    parentheses do not create AST nodes.
    """
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Name):
        return expr.ident
    if isinstance(expr, Neg):
        return f"(-{format_expr(expr.operand)})"
    if isinstance(expr, (Add, Sub, Mul, Div)):
        op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(expr)]
        return f"({format_expr(expr.left)}{op}{format_expr(expr.right)})"
    if isinstance(expr, Pow):
        return f"({format_expr(expr.base)})^{expr.exponent}"
    if isinstance(expr, Call):
        return f"{expr.func}({format_expr(expr.arg)})"
    raise TypeError(f"not an expression node: {expr!r}")


def variables(expr: Expr) -> set[str]:
    """All identifiers referenced by ``expr``."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Name):
            out.add(e.ident)
        elif isinstance(e, Neg):
            stack.append(e.operand)
        elif isinstance(e, (Add, Sub, Mul, Div)):
            stack.append(e.left)
            stack.append(e.right)
        elif isinstance(e, Pow):
            stack.append(e.base)
        elif isinstance(e, Call):
            stack.append(e.arg)
    return out


# --------------------------------------------------------------------------
# tokenizer / recursive-descent parser


_DIGITS = "0123456789"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def _peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _expect(self, ch: str) -> None:
        if self._peek() != ch:
            raise ExpressionSyntaxError(f"expected {ch!r}", self.pos)
        self.pos += 1

    def parse(self) -> Expr:
        node = self._expr()
        self._skip_ws()
        if self.pos != len(self.text):
            raise ExpressionSyntaxError("unexpected trailing input", self.pos)
        return node

    def _expr(self) -> Expr:
        node = self._term()
        while True:
            ch = self._peek()
            if ch == "+":
                self.pos += 1
                node = Add(node, self._term())
            elif ch == "-":
                self.pos += 1
                node = Sub(node, self._term())
            else:
                return node

    def _term(self) -> Expr:
        if self._peek() == "-":
            self.pos += 1
            return Neg(self._term())
        return self._product()

    def _product(self) -> Expr:
        node = self._power()
        while True:
            ch = self._peek()
            if ch == "*":
                self.pos += 1
                node = Mul(node, self._power())
            elif ch == "/":
                self.pos += 1
                node = Div(node, self._power())
            else:
                return node

    def _power(self) -> Expr:
        node = self._atom()
        while self._peek() == "^":
            self.pos += 1
            node = Pow(node, self._int_literal())
        return node

    def _int_literal(self) -> int:
        self._skip_ws()
        start = self.pos
        if self._peek() == "-":
            self.pos += 1
        ndigits = 0
        while self.pos < len(self.text) and self.text[self.pos] in _DIGITS:
            self.pos += 1
            ndigits += 1
        if ndigits == 0:
            raise ExpressionSyntaxError("exponent must be an integer literal", self.pos)
        if self.pos < len(self.text) and self.text[self.pos] == ".":
            raise ExpressionSyntaxError("exponent must be an integer literal", self.pos)
        return int(self.text[start:self.pos])

    def _atom(self) -> Expr:
        ch = self._peek()
        if ch == "(":
            self.pos += 1
            node = self._expr()
            self._expect(")")
            return node
        if ch in _DIGITS or ch == ".":
            return self._number()
        if ch.isalpha() or ch == "_":
            return self._name_or_call()
        raise ExpressionSyntaxError("expected a value", self.pos)

    def _number(self) -> Num:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in _DIGITS:
            self.pos += 1
        if self.pos < len(self.text) and self.text[self.pos] == ".":
            self.pos += 1
            while self.pos < len(self.text) and self.text[self.pos] in _DIGITS:
                self.pos += 1
        if self.pos < len(self.text) and self.text[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < len(self.text) and self.text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(self.text) and self.text[self.pos] in _DIGITS:
                while self.pos < len(self.text) and self.text[self.pos] in _DIGITS:
                    self.pos += 1
            else:
                self.pos = mark  # "2e" is "2" followed by name "e"
        text = self.text[start:self.pos]
        try:
            return Num(float(text))
        except ValueError:
            raise ExpressionSyntaxError(f"bad number {text!r}", start) from None

    def _name_or_call(self) -> Expr:
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        name = self.text[start:self.pos]
        if self._peek() == "(":
            if name not in FUNCTIONS:
                raise UnknownFunctionError(name, start)
            self.pos += 1
            arg = self._expr()
            self._expect(")")
            return Call(name, arg)
        return Name(name)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression AST.

    Raises :class:`ExpressionSyntaxError` (with character offset) on malformed
    input and :class:`UnknownFunctionError` for calls to functions outside the
    supported set.
    """
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# jet spaces: index tables for truncated multivariate polynomials


def _graded_monomials(nvars: int, order: int) -> list[tuple[int, ...]]:
    """Multi-indices of total degree <= order, graded then lexicographic.

    The enumeration for order d is a prefix of the enumeration for d+1, which
    the truncation-consistency guarantees rely on.
    """

    def of_degree(deg: int, nv: int) -> list[tuple[int, ...]]:
        if nv == 1:
            return [(deg,)]
        out = []
        for first in range(deg, -1, -1):
            for rest in of_degree(deg - first, nv - 1):
                out.append((first,) + rest)
        return out

    result: list[tuple[int, ...]] = []
    for deg in range(order + 1):
        result.extend(of_degree(deg, nvars))
    return result


class JetSpace:
    """Precomputed index tables for jets in ``nvars`` variables at ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise ValueError("need at least one variable")
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in 0..{MAX_ORDER}")
        self.nvars = nvars
        self.order = order
        self.monomials = _graded_monomials(nvars, order)
        self.size = len(self.monomials)
        self.index = {m: i for i, m in enumerate(self.monomials)}
        self.degrees = np.array([sum(m) for m in self.monomials])
        # Multiplication triples sorted by (result, left) so that partial sums
        # shared with lower-order spaces accumulate in the identical order.
        trip = []
        for ia, a in enumerate(self.monomials):
            for ib, b in enumerate(self.monomials):
                if sum(a) + sum(b) <= order:
                    c = tuple(x + y for x, y in zip(a, b))
                    trip.append((self.index[c], ia, ib))
        trip.sort()
        self._mul_k = np.array([t[0] for t in trip])
        self._mul_i = np.array([t[1] for t in trip])
        self._mul_j = np.array([t[2] for t in trip])
        # Division: for each result index k, the pairs (i, j) with i != 0
        # entering sum_{i+j=k} b_i * q_j; solved in graded order.
        self._div_pairs: list[list[tuple[int, int]]] = [[] for _ in range(self.size)]
        for k, i, j in trip:
            if i != 0:
                self._div_pairs[k].append((i, j))
        # Derivative maps into the space one order down.
        self._deriv: list[tuple[np.ndarray, np.ndarray]] | None = None
        self._deriv_stack: tuple[np.ndarray, np.ndarray] | None = None
        self._mul_tensor: np.ndarray | None = None

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.bincount(
            self._mul_k, weights=a[self._mul_i] * b[self._mul_j], minlength=self.size
        )

    def div(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        b0 = b[0]
        if b0 == 0.0:
            raise EvalDomainError("division by zero")
        q = np.zeros(self.size)
        q[0] = a[0] / b0
        for k in range(1, self.size):
            acc = a[k]
            for i, j in self._div_pairs[k]:
                if j == k:
                    continue
                acc -= b[i] * q[j]
            q[k] = acc / b0
        return q

    def deriv_tables(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-variable (source index, factor) arrays mapping into order-1 space."""
        if self._deriv is None:
            lower = jet_space(self.nvars, self.order - 1)
            tables = []
            for v in range(self.nvars):
                src = np.empty(lower.size, dtype=int)
                fac = np.empty(lower.size)
                for t, mono in enumerate(lower.monomials):
                    up = list(mono)
                    up[v] += 1
                    src[t] = self.index[tuple(up)]
                    fac[t] = up[v]
                tables.append((src, fac))
            self._deriv = tables
        return self._deriv

    def deriv_stack(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked derivative maps: arrays of shape (nvars, lower size)."""
        if self._deriv_stack is None:
            tables = self.deriv_tables()
            src = np.stack([t[0] for t in tables])
            fac = np.stack([t[1] for t in tables])
            self._deriv_stack = (src, fac)
        return self._deriv_stack

    def mul_pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(I, J, S): product pair index lists and the dense scatter matrix,
        with (a*b) = (a[I] * b[J]) @ S."""
        if self._mul_tensor is None:
            npairs = len(self._mul_k)
            scatter = np.zeros((npairs, self.size))
            scatter[np.arange(npairs), self._mul_k] = 1.0
            self._mul_tensor = (self._mul_i, self._mul_j, scatter)
        return self._mul_tensor


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


# --------------------------------------------------------------------------
# Jet values


def _as_coeffs(space: JetSpace, x: "Jet | float | int") -> np.ndarray:
    if isinstance(x, Jet):
        if x.space is not space:
            raise ValueError("jets from different spaces")
        return x.coeffs
    c = np.zeros(space.size)
    c[0] = float(x)
    return c


class Jet:
    """Truncated Taylor expansion of a scalar about a base point.

    ``coeffs[space.index[alpha]]`` is the Taylor coefficient, i.e. the partial
    derivative for multi-index ``alpha`` divided by ``alpha!``.
    """

    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    # construction -----------------------------------------------------
    @staticmethod
    def constant(space: JetSpace, value: float) -> "Jet":
        c = np.zeros(space.size)
        c[0] = float(value)
        return Jet(space, c)

    @staticmethod
    def variable(space: JetSpace, var: int, value: float) -> "Jet":
        c = np.zeros(space.size)
        c[0] = float(value)
        if space.order >= 1:
            unit = tuple(1 if i == var else 0 for i in range(space.nvars))
            c[space.index[unit]] = 1.0
        return Jet(space, c)

    # accessors ---------------------------------------------------------
    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def partial(self, alpha: tuple[int, ...]) -> float:
        """Partial derivative for multi-index ``alpha`` (factorials restored)."""
        fac = 1.0
        for a in alpha:
            fac *= math.factorial(a)
        return float(self.coeffs[self.space.index[alpha]] * fac)

    def gradient(self) -> np.ndarray:
        """First-order partials with respect to every variable."""
        n = self.space.nvars
        out = np.empty(n)
        for v in range(n):
            unit = tuple(1 if i == v else 0 for i in range(n))
            out[v] = self.coeffs[self.space.index[unit]]
        return out

    def truncate(self, order: int) -> "Jet":
        """Drop coefficients above ``order`` (graded prefix, bit-exact)."""
        if order == self.space.order:
            return self
        if order > self.space.order:
            raise ValueError("cannot raise jet order by truncation")
        lower = jet_space(self.space.nvars, order)
        return Jet(lower, self.coeffs[: lower.size].copy())

    def derivative(self, var: int) -> "Jet":
        """Partial derivative as a jet one order down."""
        if self.space.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = self.space.deriv_tables()[var]
        lower = jet_space(self.space.nvars, self.space.order - 1)
        return Jet(lower, self.coeffs[src] * fac)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return Jet(self.space, self.coeffs + _as_coeffs(self.space, other))

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.space, self.coeffs - _as_coeffs(self.space, other))

    def __rsub__(self, other):
        return Jet(self.space, _as_coeffs(self.space, other) - self.coeffs)

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.space.mul(self.coeffs, other.coeffs))
        return Jet(self.space, self.coeffs * float(other))

    def __rmul__(self, other):
        return Jet(self.space, float(other) * self.coeffs)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.space.div(self.coeffs, other.coeffs))
        if float(other) == 0.0:
            raise EvalDomainError("division by zero")
        return Jet(self.space, self.coeffs / float(other))

    def __rtruediv__(self, other):
        return Jet(self.space, self.space.div(_as_coeffs(self.space, other), self.coeffs))

    def __pow__(self, exponent: int):
        return _ipow(self, int(exponent))

    # composition with a univariate smooth function ----------------------
    def compose(self, derivs: list[float]) -> "Jet":
        """Outer composition given ``[f(g0), f'(g0), ..., f^(d)(g0)]``."""
        space = self.space
        ghat = self.coeffs.copy()
        ghat[0] = 0.0
        out = np.zeros(space.size)
        out[0] = derivs[0]
        power = ghat
        for k in range(1, space.order + 1):
            if k > 1:
                power = space.mul(power, ghat)
            out = out + (derivs[k] / math.factorial(k)) * power
        return Jet(space, out)

    # elementary functions ------------------------------------------------
    def sin(self):
        g0 = self.value
        s, c = math.sin(g0), math.cos(g0)
        return self.compose([s, c, -s, -c][: self.space.order + 1])

    def cos(self):
        g0 = self.value
        s, c = math.sin(g0), math.cos(g0)
        return self.compose([c, -s, -c, s][: self.space.order + 1])

    def tan(self):
        t = math.tan(self.value)
        sec2 = 1.0 + t * t
        derivs = [t, sec2, 2.0 * t * sec2, sec2 * (2.0 * sec2 + 4.0 * t * t)]
        return self.compose(derivs[: self.space.order + 1])

    def exp(self):
        e = math.exp(self.value)
        return self.compose([e] * (self.space.order + 1))

    def log(self):
        g0 = self.value
        if g0 <= 0.0:
            raise EvalDomainError(f"log of non-positive value {g0!r}")
        derivs = [math.log(g0), 1.0 / g0, -1.0 / g0**2, 2.0 / g0**3]
        return self.compose(derivs[: self.space.order + 1])

    def sqrt(self):
        g0 = self.value
        if g0 < 0.0:
            raise EvalDomainError(f"sqrt of negative value {g0!r}")
        if g0 == 0.0 and self.space.order >= 1:
            raise EvalDomainError("sqrt derivative singular at 0")
        r = math.sqrt(g0)
        derivs = [r, 0.5 / r if self.space.order >= 1 else 0.0]
        if self.space.order >= 2:
            derivs.append(-0.25 / (r * g0))
        if self.space.order >= 3:
            derivs.append(0.375 / (r * g0 * g0))
        return self.compose(derivs)

    def __repr__(self):
        return f"Jet(n={self.space.nvars}, d={self.space.order}, value={self.value})"


def _recip(x: Jet) -> Jet:
    one = Jet.constant(x.space, 1.0)
    return one / x


def _ipow(x, e: int):
    """Integer power by square-and-multiply; shape mirrored by the codegen."""
    if e == 0:
        return Jet.constant(x.space, 1.0) if isinstance(x, Jet) else 1.0
    if e < 0:
        p = _ipow(x, -e)
        return _recip(p) if isinstance(p, Jet) else 1.0 / p
    if e == 1:
        return x
    half = _ipow(x, e // 2)
    r = half * half
    if e % 2:
        r = r * x
    return r


# --------------------------------------------------------------------------
# evaluation


_SCALAR_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}


def _call_scalar(func: str, v: float) -> float:
    if func == "log" and v <= 0.0:
        raise EvalDomainError(f"log of non-positive value {v!r}")
    if func == "sqrt" and v < 0.0:
        raise EvalDomainError(f"sqrt of negative value {v!r}")
    return _SCALAR_FUNCS[func](v)


def _evaluate(expr: Expr, env: Mapping[str, "float | Jet"]):
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Name):
        try:
            return env[expr.ident]
        except KeyError:
            raise UnknownIdentifierError(expr.ident) from None
    if isinstance(expr, Neg):
        return -_evaluate(expr.operand, env)
    if isinstance(expr, Add):
        return _evaluate(expr.left, env) + _evaluate(expr.right, env)
    if isinstance(expr, Sub):
        return _evaluate(expr.left, env) - _evaluate(expr.right, env)
    if isinstance(expr, Mul):
        return _evaluate(expr.left, env) * _evaluate(expr.right, env)
    if isinstance(expr, Div):
        num = _evaluate(expr.left, env)
        den = _evaluate(expr.right, env)
        if isinstance(den, float) and den == 0.0 and not isinstance(num, Jet):
            raise EvalDomainError("division by zero")
        return num / den
    if isinstance(expr, Pow):
        return _ipow(_evaluate(expr.base, env), expr.exponent)
    if isinstance(expr, Call):
        v = _evaluate(expr.arg, env)
        if isinstance(v, Jet):
            return getattr(v, expr.func)()
        return _call_scalar(expr.func, v)
    raise TypeError(f"not an expression node: {expr!r}")


def eval_scalar(expr: Expr, env: Mapping[str, float]) -> float:
    """Plain float evaluation of ``expr`` under ``env``."""
    v = _evaluate(expr, env)
    if isinstance(v, Jet):  # pragma: no cover - env should hold floats
        return v.value
    return float(v)


def eval_jet(
    expr: Expr,
    point,
    params: Mapping[str, float] | None = None,
    order: int = 0,
    var_names: tuple[str, ...] | None = None,
) -> Jet:
    """Value and partial derivatives of ``expr`` at ``point`` up to ``order``.

    ``var_names`` defaults to ``("x1", ..., "xn")`` for an n-component point.
    Parameters enter as constants.  Raises :class:`UnknownIdentifierError` for
    unbound names and :class:`EvalDomainError` when evaluation leaves the
    domain of ``log``/``sqrt`` or divides by zero.
    """
    point = tuple(float(v) for v in np.atleast_1d(point))
    n = len(point)
    if var_names is None:
        var_names = tuple(f"x{i + 1}" for i in range(n))
    if len(var_names) != n:
        raise ValueError("var_names length must match point length")
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"jet order must be in 0..{MAX_ORDER}")
    space = jet_space(n, order)
    env: dict[str, float | Jet] = {}
    if params:
        env.update({k: float(v) for k, v in params.items()})
    for i, name in enumerate(var_names):
        env[name] = Jet.variable(space, i, point[i])
    v = _evaluate(expr, env)
    if not isinstance(v, Jet):
        return Jet.constant(space, float(v))
    return v


# --------------------------------------------------------------------------
# code generation (fast scalar / numpy-array evaluation)


def _pow_src(base: str, e: int) -> str:
    # mirrors _ipow so compiled evaluation matches jet order-0 bit-for-bit
    if e == 0:
        return "1.0"
    if e < 0:
        return f"(1.0/{_pow_src(base, -e)})"
    if e == 1:
        return base
    half = _pow_src(base, e // 2)
    r = f"({half}*{half})"
    if e % 2:
        r = f"({r}*{base})"
    return r


def _to_source(expr: Expr, names: Mapping[str, str], fn_prefix: str) -> str:
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Name):
        try:
            return names[expr.ident]
        except KeyError:
            raise UnknownIdentifierError(expr.ident) from None
    if isinstance(expr, Neg):
        return f"(-{_to_source(expr.operand, names, fn_prefix)})"
    if isinstance(expr, (Add, Sub, Mul, Div)):
        op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(expr)]
        return (
            f"({_to_source(expr.left, names, fn_prefix)}"
            f"{op}{_to_source(expr.right, names, fn_prefix)})"
        )
    if isinstance(expr, Pow):
        return _pow_src(_to_source(expr.base, names, fn_prefix), expr.exponent)
    if isinstance(expr, Call):
        return f"{fn_prefix}{expr.func}({_to_source(expr.arg, names, fn_prefix)})"
    raise TypeError(f"not an expression node: {expr!r}")


def compile_scalar(expr: Expr, arg_names: tuple[str, ...], params: Mapping[str, float] | None = None):
    """Compile ``expr`` to a fast float function of ``arg_names``.

    Parameter values are baked in as literals.  The generated arithmetic uses
    the same operation structure as the jet evaluator, so results agree
    bit-for-bit with order-0 jets.
    """
    names = {n: f"_a[{i}]" for i, n in enumerate(arg_names)}
    if params:
        for k, v in params.items():
            if k not in names:
                names[k] = repr(float(v))
    src = _to_source(expr, names, "_m.")
    code = compile(f"lambda _a: {src}", "<lieavg-expr>", "eval")
    ns = {"_m": math}
    return eval(code, ns)  # noqa: S307 - source is generated from our own AST


class _NumpyFuncs:
    sin = staticmethod(np.sin)
    cos = staticmethod(np.cos)
    tan = staticmethod(np.tan)
    exp = staticmethod(np.exp)
    log = staticmethod(np.log)
    sqrt = staticmethod(np.sqrt)


def compile_array(expr: Expr, arg_names: tuple[str, ...], params: Mapping[str, float] | None = None):
    """Compile ``expr`` to a numpy-vectorised function of ``arg_names``.

    Domain violations produce nan/inf in the output (checked by callers)
    rather than raising.
    """
    names = {n: f"_a[{i}]" for i, n in enumerate(arg_names)}
    if params:
        for k, v in params.items():
            if k not in names:
                names[k] = repr(float(v))
    src = _to_source(expr, names, "_m.")
    code = compile(f"lambda _a: {src}", "<lieavg-expr>", "eval")
    ns = {"_m": _NumpyFuncs}
    fn = eval(code, ns)  # noqa: S307

    def wrapped(*args):
        with np.errstate(all="ignore"):
            out = fn(args)
        if np.ndim(out) == 0:  # constant expression: broadcast to input shape
            return np.full(np.shape(args[0]), float(out))
        return np.asarray(out, dtype=float)

    return wrapped
