"""Averaged Lie-bracket approximations of oscillatory control-affine systems.

The package builds time-invariant approximations (truncation orders
r = 1..4) of systems of the form

    dx/dt = b0(x) + sum_i  omega^{p_i} * b_i(x) * u_i(k_i * omega * t)

from period-averaged iterated integrals of the inputs, checks the
amplitude/frequency design conditions under which a finite truncation
captures the large-omega behaviour, and compares original and averaged
trajectories numerically.
"""

from .jetexpr import (
    Expr,
    Jet,
    parse,
    eval_jet,
    eval_scalar,
    ExpressionError,
    ExpressionSyntaxError,
    UnknownFunctionError,
    UnknownIdentifierError,
    EvalDomainError,
)
from .system import (
    Waveform,
    ControlChannel,
    ControlAffineSystem,
    ValidationReport,
    validate,
    rhs_original,
)
from .geometry import (
    Leaf,
    Br,
    BracketExpr,
    bracket_depth,
    bracket_jet,
    bracket_value,
    enumerate_brackets,
    is_structural_zero,
)
from .coeffs import (
    Coefficient,
    CoefficientTable,
    common_period,
    nu2,
    nu3,
    beta,
    nu2_legacy,
    nu3_legacy,
)
from .lbs import AveragedSystem, assemble, rhs_lbs, lambda_tau, UnboundedTermError
from .sim import Trajectory, integrate, compare, efforts
from .analysis import DesignReport, SweepResult, check_design, sweep_omega, settle_time
from . import presets

__version__ = "0.1.0"

__all__ = [
    "Expr",
    "Jet",
    "parse",
    "eval_jet",
    "eval_scalar",
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownFunctionError",
    "UnknownIdentifierError",
    "EvalDomainError",
    "Waveform",
    "ControlChannel",
    "ControlAffineSystem",
    "ValidationReport",
    "validate",
    "rhs_original",
    "Leaf",
    "Br",
    "BracketExpr",
    "bracket_depth",
    "bracket_jet",
    "bracket_value",
    "enumerate_brackets",
    "is_structural_zero",
    "Coefficient",
    "CoefficientTable",
    "common_period",
    "nu2",
    "nu3",
    "beta",
    "nu2_legacy",
    "nu3_legacy",
    "AveragedSystem",
    "assemble",
    "rhs_lbs",
    "lambda_tau",
    "UnboundedTermError",
    "Trajectory",
    "integrate",
    "compare",
    "efforts",
    "DesignReport",
    "SweepResult",
    "check_design",
    "sweep_omega",
    "settle_time",
    "presets",
]
