"""Command-line front end: JSON configs, experiment orchestration, artifacts.

Subcommands: ``preset validate coeffs assemble simulate compare check sweep
efforts``.  All data outputs are file-based (CSV / JSON given via ``--out``
and friends); given identical inputs the bytes are identical across runs
(``--no-meta`` removes the only optional non-data field from JSON outputs).

Exit codes: 0 success, 1 configuration/validation error (report as JSON on
stderr), 2 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys as _sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import check_design, sweep_omega
from .coeffs import CoefficientTable
from .jetexpr import ExpressionError, format_expr, parse
from .lbs import UnboundedTermError, assemble
from .presets import PRESET_NAMES, Preset, build
from .sim import (
    compare,
    efforts,
    read_trajectory_csv,
    simulate_averaged,
    simulate_original,
    write_trajectory_csv,
)
from .system import Box, ControlAffineSystem, ControlChannel, Waveform, validate

__all__ = ["main", "load_config", "system_to_config", "ConfigError"]


class ConfigError(Exception):
    pass


@dataclass
class SimSettings:
    x0: tuple[float, ...]
    t_final: float
    dt: float | None


# --------------------------------------------------------------------------
# config <-> system


def _parse_fraction(raw) -> Fraction:
    if isinstance(raw, str):
        return Fraction(raw)
    if isinstance(raw, int):
        return Fraction(raw)
    raise ConfigError(f"frequency ratio must be an integer or a 'num/den' string, got {raw!r}")


def _parse_expr(text, what: str):
    if not isinstance(text, str):
        raise ConfigError(f"{what} must be an expression string, got {text!r}")
    try:
        return parse(text)
    except ExpressionError as err:
        raise ConfigError(f"{what}: {err}") from None


def config_to_system(cfg: dict) -> tuple[ControlAffineSystem, SimSettings]:
    try:
        dim = int(cfg["dimension"])
        drift_raw = cfg["drift"]
        channels_raw = cfg["channels"]
        omega = float(cfg["omega"])
    except KeyError as err:
        raise ConfigError(f"missing config key {err.args[0]!r}") from None
    params = {str(k): float(v) for k, v in cfg.get("parameters", {}).items()}
    if not isinstance(drift_raw, list) or len(drift_raw) != dim:
        raise ConfigError("drift must list one expression per state")
    drift = tuple(_parse_expr(e, f"drift[{i}]") for i, e in enumerate(drift_raw))
    channels = []
    for i, ch in enumerate(channels_raw, start=1):
        wf = ch.get("waveform")
        if not isinstance(wf, dict) or "expr" not in wf:
            raise ConfigError(f"channel {i}: waveform must be an object with 'expr'")
        anti = wf.get("antiderivative")
        waveform = Waveform(
            _parse_expr(wf["expr"], f"channel {i} waveform"),
            _parse_expr(anti, f"channel {i} antiderivative") if anti else None,
        )
        comps = ch.get("components")
        if not isinstance(comps, list) or len(comps) != dim:
            raise ConfigError(f"channel {i}: components must list {dim} expressions")
        channels.append(
            ControlChannel(
                index=i,
                p=float(ch["p"]),
                k=_parse_fraction(ch["k"]),
                waveform=waveform,
                field=tuple(
                    _parse_expr(e, f"channel {i} component {c + 1}") for c, e in enumerate(comps)
                ),
            )
        )
    domain = None
    if cfg.get("domain") is not None:
        dom = cfg["domain"]
        domain = Box(tuple(float(v) for v in dom["lower"]), tuple(float(v) for v in dom["upper"]))
        if len(domain.lower) != dim:
            raise ConfigError("domain bounds must match the state dimension")
    guard = cfg.get("zero_guard")
    zero_guard = _parse_expr(guard, "zero_guard") if guard else None
    try:
        system = ControlAffineSystem(
            dim=dim,
            drift=drift,
            channels=tuple(channels),
            omega=omega,
            params=params,
            domain=domain,
            zero_guard=zero_guard,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None
    sim_raw = cfg.get("simulation", {})
    x0 = tuple(float(v) for v in sim_raw.get("x0", (0.0,) * dim))
    if len(x0) != dim:
        raise ConfigError("simulation.x0 must match the state dimension")
    settings = SimSettings(
        x0=x0,
        t_final=float(sim_raw.get("t_final", 10.0)),
        dt=(float(sim_raw["dt"]) if sim_raw.get("dt") is not None else None),
    )
    return system, settings


def system_to_config(sys: ControlAffineSystem, settings: SimSettings) -> dict:
    return {
        "dimension": sys.dim,
        "parameters": {k: float(v) for k, v in sorted(sys.params.items())},
        "drift": [format_expr(e) for e in sys.drift],
        "channels": [
            {
                "components": [format_expr(e) for e in ch.field],
                "p": ch.p,
                "k": f"{ch.k.numerator}/{ch.k.denominator}",
                "waveform": {
                    "expr": format_expr(ch.waveform.expr),
                    "antiderivative": (
                        format_expr(ch.waveform.antiderivative)
                        if ch.waveform.antiderivative is not None
                        else None
                    ),
                },
            }
            for ch in sys.channels
        ],
        "omega": sys.omega,
        "domain": (
            {"lower": list(sys.domain.lower), "upper": list(sys.domain.upper)}
            if sys.domain is not None
            else None
        ),
        "zero_guard": format_expr(sys.zero_guard) if sys.zero_guard is not None else None,
        "simulation": {
            "x0": list(settings.x0),
            "t_final": settings.t_final,
            "dt": settings.dt,
        },
    }


def preset_to_config(preset: Preset) -> dict:
    return system_to_config(
        preset.system, SimSettings(preset.x0, preset.t_final, preset.dt)
    )


def load_config(path) -> tuple[ControlAffineSystem, SimSettings]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    return config_to_system(cfg)


# --------------------------------------------------------------------------
# output helpers


def _emit_json(doc: dict, path: str | None, args, stream=None) -> None:
    if not getattr(args, "no_meta", False):
        doc = dict(doc)
        doc["meta"] = {"tool": "lieavg", "version": __version__}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        (stream or _sys.stdout).write(text)


def _fail_config(err, args) -> int:
    doc = {"error": "config", "detail": str(err)}
    _sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return 1


def _load_validated(args) -> tuple[ControlAffineSystem, SimSettings]:
    system, settings = load_config(args.config)
    report = validate(system)
    if not report.passed:
        doc = {"error": "validation", "report": report.as_dict()}
        _sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
        raise SystemExit(1)
    return system, settings


def _parse_omega(raw: str | None) -> float | None:
    if raw is None:
        return None
    if raw.lower() in ("inf", "limit"):
        return math.inf
    return float(raw)


def _parse_model(raw: str) -> tuple[str, int | None]:
    if raw == "original":
        return "original", None
    if raw.startswith("lbs:"):
        r = int(raw.split(":", 1)[1])
        if not 1 <= r <= 4:
            raise ConfigError("truncation order must be in 1..4")
        return "lbs", r
    raise ConfigError(f"unknown model {raw!r} (use 'original' or 'lbs:R')")


# --------------------------------------------------------------------------
# subcommands


def _cmd_preset(args) -> int:
    try:
        preset = build(args.name)
    except KeyError as err:
        return _fail_config(err.args[0], args)
    cfg = preset_to_config(preset)
    _emit_json(cfg, args.emit_config, args)
    return 0


def _cmd_validate(args) -> int:
    try:
        system, _ = load_config(args.config)
    except ConfigError as err:
        return _fail_config(err, args)
    report = validate(system)
    _emit_json(report.as_dict(), args.out, args)
    if not report.passed:
        _sys.stderr.write(json.dumps({"error": "validation", "report": report.as_dict()},
                                     sort_keys=True) + "\n")
        return 1
    return 0


def _cmd_coeffs(args) -> int:
    try:
        system, _ = _load_validated(args)
    except ConfigError as err:
        return _fail_config(err, args)
    table = CoefficientTable.build(system, args.order, args.n_grid)
    table.to_csv(args.out)
    return 0


def _cmd_assemble(args) -> int:
    try:
        system, _ = _load_validated(args)
        omega = _parse_omega(args.omega)
        avg = assemble(system, args.order, omega=omega, n=args.n_grid)
    except ConfigError as err:
        return _fail_config(err, args)
    except UnboundedTermError as err:
        return _fail_config(f"limit assembly failed: {err}", args)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("family,indices,value,omega_exponent,class,converged,weight,structural_zero\n")
        for t in avg.terms:
            idx = ",".join(str(i) for i in t.indices)
            c = t.coefficient
            zero = t.zero.provenance or ("zero" if t.zero.zero else "no")
            fh.write(
                f"{t.family},{idx},{c.value:.17g},{c.omega_exponent:.17g},"
                f"{c.boundedness},{'true' if c.converged else 'false'},"
                f"{t.weight:.17g},{zero}\n"
            )
    return 0


def _cmd_simulate(args) -> int:
    try:
        system, settings = _load_validated(args)
        model, order = _parse_model(args.model)
    except ConfigError as err:
        return _fail_config(err, args)
    t_final = args.t_final if args.t_final is not None else settings.t_final
    x0 = tuple(float(v) for v in args.x0.split(",")) if args.x0 else settings.x0
    dt = args.dt if args.dt is not None else settings.dt
    if args.omega is not None:
        omega = _parse_omega(args.omega)
        if math.isinf(omega):
            return _fail_config("simulation needs a finite omega", args)
        system = system.with_omega(omega)
    if model == "original":
        traj = simulate_original(system, x0, t_final, dt)
    else:
        try:
            avg = assemble(system, order, omega=math.inf if args.limit else None)
        except UnboundedTermError as err:
            return _fail_config(f"limit assembly failed: {err}", args)
        traj = simulate_averaged(avg, x0, t_final, args.dt_lbs if args.dt_lbs else dt)
    write_trajectory_csv(traj, args.out, stride=max(1, args.stride))
    return 2 if traj.diverged else 0


def _cmd_compare(args) -> int:
    try:
        system, settings = _load_validated(args)
    except ConfigError as err:
        return _fail_config(err, args)
    t_final = args.t_final if args.t_final is not None else settings.t_final
    x0 = tuple(float(v) for v in args.x0.split(",")) if args.x0 else settings.x0
    if args.omega is not None:
        system = system.with_omega(float(args.omega))
    original = simulate_original(system, x0, t_final, args.dt if args.dt is not None else settings.dt)
    try:
        avg = assemble(system, args.order, omega=math.inf if args.limit else None)
    except UnboundedTermError as err:
        return _fail_config(f"limit assembly failed: {err}", args)
    averaged = simulate_averaged(avg, x0, t_final, args.dt_lbs)
    diverged = original.diverged or averaged.diverged
    summary = {
        "order": args.order,
        "omega": system.omega,
        "diverged_original": original.diverged,
        "diverged_averaged": averaged.diverged,
    }
    if not diverged:
        metrics = compare(original, averaged)
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,distance\n")
            for t, d in zip(metrics["t"], metrics["distance"]):
                fh.write(f"{t:.17g},{d:.17g}\n")
        summary.update(
            d_sup=metrics["d_sup"],
            d_rms=metrics["d_rms"],
            t0=metrics["t0"],
            t_final=metrics["t_final"],
            samples=metrics["samples"],
        )
    if args.summary:
        _emit_json(summary, args.summary, args)
    return 2 if diverged else 0


def _cmd_check(args) -> int:
    try:
        system, _ = _load_validated(args)
    except ConfigError as err:
        return _fail_config(err, args)
    report = check_design(system, args.order)
    _emit_json(report.as_dict(), args.out, args)
    return 0


def _cmd_sweep(args) -> int:
    try:
        system, settings = _load_validated(args)
        omegas = [float(v) for v in args.omegas.split(",")]
    except (ConfigError, ValueError) as err:
        return _fail_config(err, args)
    t_final = args.t_final if args.t_final is not None else settings.t_final
    x0 = tuple(float(v) for v in args.x0.split(",")) if args.x0 else settings.x0
    result = sweep_omega(
        system,
        args.order,
        omegas,
        x0,
        t_final,
        dt=args.dt if args.dt is not None else settings.dt,
        dt_lbs=args.dt_lbs,
        t_burn=args.t_burn,
    )
    result.to_csv(args.out)
    if args.summary:
        _emit_json(result.as_dict(), args.summary, args)
    if all(p.diverged for p in result.points):
        return 2
    return 0


def _cmd_efforts(args) -> int:
    try:
        system, settings = _load_validated(args)
    except ConfigError as err:
        return _fail_config(err, args)
    if args.traj:
        traj = read_trajectory_csv(args.traj)
    else:
        t_final = args.t_final if args.t_final is not None else settings.t_final
        x0 = tuple(float(v) for v in args.x0.split(",")) if args.x0 else settings.x0
        traj = simulate_original(system, x0, t_final, args.dt if args.dt is not None else settings.dt)
    try:
        result = efforts(traj, system, full_state=args.full_state)
    except ValueError as err:
        return _fail_config(err, args)
    rows = list(range(0, len(result["t"]), max(1, args.stride)))
    if rows and rows[-1] != len(result["t"]) - 1:
        rows.append(len(result["t"]) - 1)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,control_effort,state_effort\n")
        for i in rows:
            fh.write(
                f"{result['t'][i]:.17g},{result['control_effort'][i]:.17g},"
                f"{result['state_effort'][i]:.17g}\n"
            )
    return 2 if traj.diverged else 0


# --------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, config=True) -> None:
    if config:
        p.add_argument("--config", required=True, help="system config JSON")
    p.add_argument("--no-meta", action="store_true", help="omit the meta field from JSON outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lieavg",
        description="averaged bracket approximations of oscillatory control-affine systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", help="emit a bundled example system as a config")
    p.add_argument("--name", required=True, choices=PRESET_NAMES)
    p.add_argument("--emit-config", required=True, metavar="PATH")
    _add_common(p, config=False)
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("validate", help="check the standing assumptions")
    _add_common(p)
    p.add_argument("--out", help="write the report JSON here (default: stdout)")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("coeffs", help="emit the coefficient table as CSV")
    _add_common(p)
    p.add_argument("--order", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--n-grid", type=int, default=None, help="starting quadrature grid size")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_coeffs)

    p = sub.add_parser("assemble", help="emit the weighted term list of a truncation")
    _add_common(p)
    p.add_argument("--order", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--omega", help="override omega; 'inf' builds the limit system")
    p.add_argument("--n-grid", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assemble)

    p = sub.add_parser("simulate", help="integrate the original or averaged system")
    _add_common(p)
    p.add_argument("--model", required=True, help="'original' or 'lbs:R'")
    p.add_argument("--omega", help="override omega")
    p.add_argument("--limit", action="store_true", help="assemble the averaged system at the large-omega limit")
    p.add_argument("--t-final", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--dt-lbs", type=float, help="step for the averaged model")
    p.add_argument("--x0", help="comma-separated initial state")
    p.add_argument("--stride", type=int, default=1,
                   help="keep every Nth sample in the CSV (endpoint always kept)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", help="simulate both models and emit distances")
    _add_common(p)
    p.add_argument("--order", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--omega", type=float)
    p.add_argument("--limit", action="store_true")
    p.add_argument("--t-final", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--dt-lbs", type=float)
    p.add_argument("--x0")
    p.add_argument("--out", required=True, help="per-timestep distance CSV")
    p.add_argument("--summary", help="summary JSON path")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("check", help="emit the design-condition report as JSON")
    _add_common(p)
    p.add_argument("--order", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--out", help="default: stdout")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("sweep", help="omega sweep of trajectory distances")
    _add_common(p)
    p.add_argument("--order", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--omegas", required=True, help="comma-separated increasing omegas")
    p.add_argument("--t-final", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--dt-lbs", type=float)
    p.add_argument("--x0")
    p.add_argument("--t-burn", type=float, default=0.0,
                   help="exclude an initial window from the distance metrics")
    p.add_argument("--out", required=True)
    p.add_argument("--summary")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("efforts", help="cumulative control/state effort integrals")
    _add_common(p)
    p.add_argument("--traj", help="reuse an existing trajectory CSV (with input columns)")
    p.add_argument("--t-final", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--x0")
    p.add_argument("--full-state", action="store_true", help="state effort over the full state norm")
    p.add_argument("--stride", type=int, default=1,
                   help="keep every Nth sample in the CSV (endpoint always kept)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_efforts)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as err:
        return int(err.code) if err.code is not None else 0
    except ConfigError as err:
        return _fail_config(err, args)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
