import math
from fractions import Fraction

import numpy as np
import pytest

from lieavg.jetexpr import parse
from lieavg.system import (
    Box,
    ControlAffineSystem,
    ControlChannel,
    Waveform,
    rhs_original,
    validate,
)
from lieavg.coeffs import common_period


def make_system(channels, dim=1, drift=("0",), omega=10.0, params=None, box=None):
    return ControlAffineSystem(
        dim=dim,
        drift=tuple(parse(d) for d in drift),
        channels=channels,
        omega=omega,
        params=params or {},
        domain=box or Box((-2.0,) * dim, (2.0,) * dim),
    )


def chan(i, field, p=0.5, k=1, wave="sin(s)", anti="-cos(s)"):
    return ControlChannel(
        index=i,
        p=p,
        k=Fraction(k),
        waveform=Waveform.from_text(wave, anti),
        field=tuple(parse(c) for c in field),
    )


# ---------------------------------------------------------------------------
# validation


def test_example1_preset_validates(example1):
    report = validate(example1.system)
    assert report.passed
    names = {c.name for c in report.checks}
    assert {"exponent_in_unit_interval", "waveform_zero_mean", "smooth_drift"} <= names


def test_offset_waveform_fails_zero_mean():
    sys = make_system((chan(1, ("x1",), wave="sin(s)+0.3", anti=None),))
    report = validate(sys)
    failed = {c.name for c in report.checks if not c.passed}
    assert "waveform_zero_mean" in failed
    mean = [c for c in report.checks if c.name == "waveform_zero_mean"][0]
    assert math.isclose(mean.measured["mean"], 0.3, rel_tol=1e-6)


def test_aperiodic_waveform_flagged():
    sys = make_system((chan(1, ("x1",), wave="sin(s/2)", anti=None),))
    failed = {c.name for c in validate(sys).checks if not c.passed}
    assert "waveform_periodic" in failed


def test_nonsmooth_field_fails():
    sys = make_system((chan(1, ("sqrt(x1)",)),), box=Box((-2.0,), (2.0,)))
    report = validate(sys)
    failed = {c.name for c in report.checks if not c.passed}
    assert "smooth_field_1" in failed


def test_bad_exponent_reported():
    sys = make_system((chan(1, ("x1",), p=1.2),))
    failed = {c.name for c in validate(sys).checks if not c.passed}
    assert "exponent_in_unit_interval" in failed


def test_guard_caveat_reported(example4):
    report = validate(example4.system)
    assert report.passed
    assert any(c.name == "piecewise_guard_caveat" for c in report.checks)


def test_validation_failures_are_entries_not_exceptions():
    sys = make_system((chan(1, ("log(x1)",)),), box=Box((-2.0,), (2.0,)))
    report = validate(sys)  # log undefined on half the box: must not raise
    assert not report.passed


# ---------------------------------------------------------------------------
# right-hand side of the oscillatory system


def test_rhs_all_inputs_zero_returns_drift():
    sys = make_system(
        (chan(1, ("x1",), wave="0*sin(s)", anti=None),),
        drift=("2*x1",),
    )
    out = rhs_original(sys, 0.3, (1.5,))
    assert np.allclose(out, [3.0])


def test_rhs_example1_at_start(example1):
    out = rhs_original(example1.system, 0.0, (4.0, 0.0))
    assert math.isclose(out[0], math.sqrt(20.0), rel_tol=1e-12)
    assert math.isclose(out[1], 5.0 * (-8.1), rel_tol=1e-12)


def test_rhs_omega_scaling():
    # doubling omega rescales a channel contribution by 2^p and re-phases it
    one = make_system((chan(1, ("1",), p=0.3, k=2, wave="cos(s)", anti="sin(s)"),), omega=5.0)
    two = one.with_omega(10.0)
    t = 0.17
    v1 = rhs_original(one, t, (0.0,))[0]
    v2 = rhs_original(two, t, (0.0,))[0]
    assert math.isclose(v1, 5.0**0.3 * math.cos(2 * 5.0 * t), rel_tol=1e-12)
    assert math.isclose(v2, 10.0**0.3 * math.cos(2 * 10.0 * t), rel_tol=1e-12)
    assert math.isclose(
        v2 / (10.0**0.3 * math.cos(2 * 10.0 * t)),
        v1 / (5.0**0.3 * math.cos(2 * 5.0 * t)),
        rel_tol=1e-12,
    )


def test_rhs_periodic_in_time(example3):
    sys = example3.system
    period = common_period(sys.k_values).value / sys.omega
    x = (2.5, -0.8)
    a = rhs_original(sys, 0.31, x)
    b = rhs_original(sys, 0.31 + period, x)
    assert np.allclose(a, b, rtol=0, atol=1e-9 * max(1.0, float(np.max(np.abs(a)))))


def test_rhs_linear_in_waveform_scale():
    base = make_system((chan(1, ("x1+1",), p=0.4, k=1, wave="sin(s)", anti="-cos(s)"),))
    scaled = make_system((chan(1, ("x1+1",), p=0.4, k=1, wave="3*sin(s)", anti="-3*cos(s)"),))
    for t in (0.0, 0.13, 1.7):
        v0 = rhs_original(base, t, (0.5,))[0]
        v3 = rhs_original(scaled, t, (0.5,))[0]
        assert math.isclose(v3, 3.0 * v0, rel_tol=1e-13, abs_tol=1e-15)


def test_guard_switches_fields_off(example4):
    sys = example4.system
    out = rhs_original(sys, 0.1, (1.0,))  # objective vanishes exactly at 1
    assert np.allclose(out, [0.0])
    assert sys.guard_active((1.0,))
    assert not sys.guard_active((1.5,))


def test_structural_errors():
    with pytest.raises(ValueError):
        ControlAffineSystem(
            dim=2,
            drift=(parse("0"),),  # wrong length
            channels=(chan(1, ("0", "0")),),
            omega=1.0,
        )
    with pytest.raises(ValueError):
        make_system((chan(1, ("x1",)),), omega=-1.0)
