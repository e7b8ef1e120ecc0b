import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lieavg.jetexpr import (
    Add,
    Call,
    EvalDomainError,
    ExpressionSyntaxError,
    Mul,
    Name,
    Neg,
    Num,
    Pow,
    Sub,
    UnknownFunctionError,
    UnknownIdentifierError,
    compile_array,
    compile_scalar,
    eval_jet,
    eval_scalar,
    format_expr,
    parse,
    variables,
)

from oracles import central_difference, sympy_partial


def bits(x: float) -> bytes:
    return struct.pack("<d", x)


# ---------------------------------------------------------------------------
# parsing


def test_parse_identity():
    assert parse("x1") == Name("x1")


def test_parse_negated_product_shape():
    e = parse("-H*(x1-1)^4")
    assert e == Neg(Mul(Name("H"), Pow(Sub(Name("x1"), Num(1.0)), 4)))


def test_parse_unbalanced_paren_offset():
    with pytest.raises(ExpressionSyntaxError) as err:
        parse("sin(s")
    assert err.value.offset == 5


def test_parse_unknown_function():
    with pytest.raises(UnknownFunctionError):
        parse("sinh(s)")


def test_parse_rejects_fractional_exponent():
    with pytest.raises(ExpressionSyntaxError):
        parse("x1^2.5")
    with pytest.raises(ExpressionSyntaxError):
        parse("x1^k")


def test_parse_empty():
    with pytest.raises(ExpressionSyntaxError):
        parse("   ")


def test_parse_precedence():
    # '-' at term level: -a*b is -(a*b); '^' binds tighter than unary '-'
    assert parse("-a*b") == Neg(Mul(Name("a"), Name("b")))
    assert parse("-x1^2") == Neg(Pow(Name("x1"), 2))
    assert parse("a-b-c") == Sub(Sub(Name("a"), Name("b")), Name("c"))
    assert parse("2*sin(s)+1") == Add(Mul(Num(2.0), Call("sin", Name("s"))), Num(1.0))


def test_parse_negative_exponent():
    e = parse("x1^-2")
    assert e == Pow(Name("x1"), -2)
    assert eval_scalar(e, {"x1": 2.0}) == 0.25


def test_format_round_trip():
    for text in (
        "-H*(x1-1)^4",
        "h*(-H*(x1-1)^4 - x2)",
        "sqrt((1 - exp(-(H*(x1-1)^4)))/(1 + exp(H*(x1-1)^4)))*sin(exp(H*(x1-1)^4))",
        "x1^-3 + 2.5e-3*tan(s/4)",
    ):
        e = parse(text)
        assert parse(format_expr(e)) == e


def test_variables():
    assert variables(parse("h*(-H*(x1-1)^4 - x2)")) == {"h", "H", "x1", "x2"}


# ---------------------------------------------------------------------------
# jet evaluation


def test_jet_polynomial_partials():
    j = eval_jet(parse("x1^2"), (3.0,), order=2)
    assert j.value == 9.0
    assert j.partial((1,)) == 6.0
    assert j.partial((2,)) == 2.0


def test_jet_quartic_derived():
    j = eval_jet(parse("-H*(x1-1)^4"), (4.0,), {"H": 0.1}, order=1)
    assert math.isclose(j.value, -8.1, rel_tol=1e-14)
    assert math.isclose(j.partial((1,)), -10.8, rel_tol=1e-13)


def test_jet_log_domain_error():
    with pytest.raises(EvalDomainError):
        eval_jet(parse("log(x1)"), (0.0,), order=1)
    with pytest.raises(EvalDomainError):
        eval_jet(parse("sqrt(x1)"), (-1.0,), order=0)
    with pytest.raises(EvalDomainError):
        eval_jet(parse("1/x1"), (0.0,), order=1)


def test_unknown_identifier_at_bind():
    with pytest.raises(UnknownIdentifierError):
        eval_jet(parse("x1 + c"), (1.0,), order=0)


def test_order0_matches_compiled_scalar_bitwise():
    cases = [
        ("-H*(x1-1)^4 - x2", {"H": 0.1}),
        ("sin(x1)*exp(x2/3) + x1^3/(x2+2)", {}),
        ("sqrt(x1+2)^-3 + tan(x1/4)", {}),
        ("log(x2+5)/(1+x1^2)", {}),
    ]
    pts = [(4.0, 0.3), (1.5, -1.2), (0.25, 2.0), (-0.7, 0.9)]
    for text, params in cases:
        e = parse(text)
        f = compile_scalar(e, ("x1", "x2"), params)
        for pt in pts:
            assert bits(f(pt)) == bits(eval_jet(e, pt, params, order=0).value)


def test_truncation_prefix_bit_exact():
    e = parse("sin(x1)*exp(x2/3) + x1^3/(x2+2) - sqrt(x1+4)")
    for pt in [(0.7, 0.2), (-1.1, 1.4)]:
        j3 = eval_jet(e, pt, order=3)
        for d in (0, 1, 2):
            jd = eval_jet(e, pt, order=d)
            assert np.array_equal(j3.coeffs[: jd.space.size], jd.coeffs)


def test_chain_rule_vs_finite_differences():
    e = parse("sin(x1^2 + x2)")
    pt = np.array([0.5, 0.3])
    j = eval_jet(e, pt, order=1)
    f = lambda x: eval_scalar(e, {"x1": x[0], "x2": x[1]})
    for i, alpha in enumerate([(1, 0), (0, 1)]):
        fd = central_difference(f, pt, i)
        assert abs(j.partial(alpha) - fd) <= 1e-5 * max(1.0, abs(fd))


# ---------------------------------------------------------------------------
# property tests: random polynomials against symbolic differentiation


def _poly_exprs(nvars: int):
    names = [f"x{i + 1}" for i in range(nvars)]
    coeff = st.integers(-4, 4).map(float)

    def term():
        return st.tuples(coeff, st.lists(st.sampled_from(names), min_size=0, max_size=4))

    def render(terms):
        parts = []
        for c, vs in terms:
            if not vs:
                parts.append(repr(c))
            else:
                parts.append("*".join([repr(c)] + vs))
        return " + ".join(parts) if parts else "0.0"

    return st.lists(term(), min_size=1, max_size=5).map(render)


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_jet_matches_symbolic_differentiation(data):
    nvars = data.draw(st.integers(1, 4))
    text = data.draw(_poly_exprs(nvars))
    point = {f"x{i + 1}": data.draw(st.floats(-2, 2, allow_nan=False, width=32)) for i in range(nvars)}
    e = parse(text)
    j = eval_jet(e, tuple(point.values()), order=2, var_names=tuple(point))
    for alpha in j.space.monomials:
        wrt = tuple(
            name for name, count in zip(point, alpha) for _ in range(count)
        )
        want = sympy_partial(text, point, wrt)
        got = j.partial(alpha)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want), abs(got))


@settings(max_examples=25, deadline=None)
@given(
    x=st.floats(-1.2, 1.2, allow_nan=False),
    y=st.floats(0.2, 2.0, allow_nan=False),
)
def test_jet_transcendental_vs_symbolic(x, y):
    text = "sin(x1)*cos(x2) + exp(x1/2)*log(x2+1) - sqrt(x2+2)"
    e = parse(text)
    j = eval_jet(e, (x, y), order=3)
    for alpha in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (0, 3)]:
        want = sympy_partial(text, {"x1": x, "x2": y}, tuple(
            n for n, c in zip(("x1", "x2"), alpha) for _ in range(c)
        ))
        assert abs(j.partial(alpha) - want) <= 1e-10 * max(1.0, abs(want))


# ---------------------------------------------------------------------------
# vectorised evaluation


def test_compile_array_matches_scalar():
    e = parse("sin(s) + 0.3*cos(2*s)")
    f = compile_array(e, ("s",))
    grid = np.linspace(0.0, 6.0, 17)
    want = [eval_scalar(e, {"s": v}) for v in grid]
    assert np.allclose(f(grid), want, rtol=0, atol=1e-15)


def test_compile_array_constant_broadcast():
    f = compile_array(parse("0"), ("s",))
    out = f(np.linspace(0, 1, 5))
    assert out.shape == (5,) and np.all(out == 0.0)
