"""Command-line front end.

Exit codes: 0 success, 1 input/parse error, 2 simulation blow-up, 3 a check
failed.
"""
import argparse
import json
import math
import sys as _sys
from pathlib import Path

import numpy as np

from . import bounds, certify, scenarios, signals
from .serialization import (
    comparison_from_expr,
    load_json,
    nonlinear_certificate_from_json,
    system_from_json,
)
from .sim import BlowUpError, flow_linear, flow_nonlinear
from .svg import line_plot

EXIT_OK, EXIT_PARSE, EXIT_BLOWUP, EXIT_FAILED = 0, 1, 2, 3
DEFAULT_SEED = 20240101


class InputError(Exception):
    pass


def _alpha_range(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from exc
    return lo, hi


def _vector(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys mirror the flags (flags win)")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--margin", type=float, help="eigenvalue margin for strict inequalities")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--svg", action="store_true", default=None, help="also write an SVG plot")
    common.add_argument("--jobs", type=int, help="parallel workers for grid evaluations")

    parser = argparse.ArgumentParser(prog="switchdwell", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a trajectory and write it as CSV")
    p.add_argument("--system")
    p.add_argument("--signal", help="signal JSON; omit to sample one from --class")
    p.add_argument("--class", dest="signal_class", choices=[c.value for c in signals.SignalClass])
    p.add_argument("--tau", type=float)
    p.add_argument("--n0", type=int, help="chattering bound for sampled ADT signals")
    p.add_argument("--x0", type=_vector)
    p.add_argument("--horizon", type=float)
    p.add_argument("--periods", type=float, help="horizon in periods of a periodic signal")
    p.add_argument("--dt", type=float, help="sampling grid (linear) or RK4 step (nonlinear)")

    for name, helptext in (("check-dwell", "dwell-time conditions"), ("check-adt", "flow-free ADT conditions")):
        p = sub.add_parser(name, parents=[common], help=f"check quadratic {helptext}")
        p.add_argument("--system")
        p.add_argument("--cert", help="certificate JSON (check-dwell searches one when omitted)")
        p.add_argument("--rho", type=float)
        p.add_argument("--tau", type=float)

    p = sub.add_parser("check-nonlinear", parents=[common], help="sampled check of a nonlinear certificate")
    p.add_argument("--system")
    p.add_argument("--cert")
    p.add_argument("--step", type=float, help="Dini quotient step")

    p = sub.add_parser("estimate-adt", parents=[common], help="quadratic upper bound on the minimal ADT")
    p.add_argument("--system")
    p.add_argument("--rho", type=float)
    p.add_argument("--alpha-range", type=_alpha_range)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("tau-star", parents=[common], help="small-gain ADT bound from comparison functions")
    p.add_argument("--rho-expr", help="rho(s) expression")
    p.add_argument("--chi-expr", help="chi(s) expression")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--s-range", type=_alpha_range)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("counterexample", parents=[common], help="reproduce the destabilising ADT signal")
    p.add_argument("--tau", type=float)
    p.add_argument("--periods", type=int)
    p.add_argument("--swap-modes", action="store_true", default=None)
    return parser


DEFAULTS = {
    "out": ".",
    "margin": certify.DEFAULT_MARGIN,
    "seed": DEFAULT_SEED,
    "svg": False,
    "jobs": 1,
    "rho": None,
    "tau": None,
    "grid": 64,
    "alpha_range": (1e-3, 1e2),
    "s_range": (1e-3, 1e3),
    "periods": None,
    "swap_modes": False,
    "n0": 1,
    "step": 1e-4,
}


def _merge_config(args):
    cfg = {}
    if args.config:
        try:
            cfg = load_json(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise InputError("config file must hold a JSON object")
    merged = {}
    for key, val in vars(args).items():
        if val is None:
            val = cfg.get(key, cfg.get(key.replace("_", "-")))
            if key in ("alpha_range", "s_range") and isinstance(val, str):
                val = _alpha_range(val)
            if key == "x0" and isinstance(val, str):
                val = _vector(val)
        if val is None:
            val = DEFAULTS.get(key)
        merged[key] = val
    if merged["margin"] is not None and not merged["margin"] > 0:
        raise InputError("margin must be positive")
    return argparse.Namespace(**merged)


def _load(path, what):
    if not path:
        raise InputError(f"--{what} is required")
    try:
        return load_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {what} file {path}: {exc}") from exc


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg):
    system = system_from_json(_load(cfg.system, "system"))
    if cfg.signal:
        sig = signals.signal_from_json(_load(cfg.signal, "signal"))
    elif cfg.signal_class:
        if cfg.tau is None or cfg.horizon is None:
            raise InputError("sampling a signal needs --tau and --horizon")
        spec = signals.SignalClassSpec(cfg.signal_class, cfg.tau, cfg.n0)
        sig = signals.sample_signal(spec, cfg.horizon, cfg.seed, system.mode_count)
    else:
        raise InputError("give --signal or --class")
    if cfg.periods is not None:
        if not sig.is_periodic:
            raise InputError("--periods needs a periodic signal")
        horizon = cfg.periods * sig.period
    elif cfg.horizon is not None:
        horizon = cfg.horizon
    else:
        raise InputError("give --horizon or --periods")
    x0 = cfg.x0 if cfg.x0 is not None else [1.0] + [0.0] * (system.dimension - 1)
    out = _outdir(cfg)
    code = EXIT_OK
    try:
        if system.is_linear:
            traj = flow_linear(system, sig, x0, horizon, dt=cfg.dt)
        else:
            traj = flow_nonlinear(system, sig, x0, horizon, cfg.dt or 1e-3)
    except BlowUpError as exc:
        print(f"simulate: {exc}", file=_sys.stderr)
        traj, code = exc.partial, EXIT_BLOWUP
    traj.to_csv(out / "trajectory.csv")
    if cfg.svg:
        (out / "trajectory.svg").write_text(
            line_plot([(traj.times, traj.norms, "|x(t)|")], "Trajectory norm", "t", "|x|", logy=bool(np.all(traj.norms > 0)))
        )
    norms = traj.norms
    print(f"samples={len(traj)} |x(0)|={norms[0]:.6g} |x(T)|={norms[-1]:.6g}")
    return code


def _verdict_exit(verdict, out, name):
    obj = verdict.to_json()
    _write_json(out / name, obj)
    print(json.dumps(obj))
    return EXIT_OK if verdict else EXIT_FAILED


def cmd_check_dwell(cfg):
    system = system_from_json(_load(cfg.system, "system"))
    out = _outdir(cfg)
    if cfg.cert:
        cert = certify.certificate_from_json(_load(cfg.cert, "cert"))
        rho = cfg.rho if cfg.rho is not None else cert.rho
        tau = cfg.tau if cfg.tau is not None else cert.tau
        verdict = certify.check_dwell_quadratic(system, cert.P, rho, tau, cfg.margin)
        return _verdict_exit(verdict, out, "verdict.json")
    if cfg.rho is None or cfg.tau is None:
        raise InputError("without --cert, both --rho and --tau are needed for the search")
    found = certify.search_dwell_quadratic(system, cfg.rho, cfg.tau, margin=cfg.margin)
    if not found:
        _write_json(out / "verdict.json", {"verdict": "not_found", "reason": found.reason})
        print(f"check-dwell: {found.reason}")
        return EXIT_FAILED
    _write_json(out / "certificate.json", certify.certificate_to_json(found))
    return _verdict_exit(certify.check_dwell_quadratic(system, found.P, cfg.rho, cfg.tau, cfg.margin), out, "verdict.json")


def cmd_check_adt(cfg):
    system = system_from_json(_load(cfg.system, "system"))
    cert = certify.certificate_from_json(_load(cfg.cert, "cert"))
    if cfg.rho is not None or cfg.tau is not None:
        cert = certify.QuadraticCertificate(
            cert.P, cfg.rho if cfg.rho is not None else cert.rho, cert.alpha, cert.nu,
            cfg.tau if cfg.tau is not None else cert.tau,
        )
    return _verdict_exit(certify.check_adt_quadratic(system, cert, cfg.margin), _outdir(cfg), "verdict.json")


def cmd_check_nonlinear(cfg):
    system = system_from_json(_load(cfg.system, "system"))
    cert = nonlinear_certificate_from_json(_load(cfg.cert, "cert"), system.dimension)
    verdict = certify.check_nonlinear_sampled(system.as_nonlinear(), cert, h=cfg.step)
    obj = verdict.to_json()
    _write_json(_outdir(cfg) / "verdict.json", obj)
    print(json.dumps(obj))
    return EXIT_OK if verdict else EXIT_FAILED


def cmd_estimate_adt(cfg):
    system = system_from_json(_load(cfg.system, "system"))
    if cfg.rho is None:
        raise InputError("--rho is required")
    report = bounds.estimate_min_adt(system, cfg.rho, cfg.alpha_range, cfg.grid, jobs=cfg.jobs, margin=cfg.margin)
    out = _outdir(cfg)
    (out / "adt_bound.csv").write_text(report.to_csv())
    _write_json(out / "adt_bound.json", report.summary())
    _write_json(out / "certificate.json", certify.certificate_to_json(report.certificate))
    if cfg.svg:
        rows = [r for r in report.alpha_grid if math.isfinite(r[2])]
        mus = [math.exp(a * t) for a, _, t in rows]
        (out / "adt_bound.svg").write_text(
            line_plot([(mus, [r[2] for r in rows], "tau(alpha)")], "Quadratic ADT bound", "mu = exp(alpha tau)", "tau")
        )
    print(f"tau_quad={report.tau_quad:.6g} alpha*={report.best[0]:.6g} nu*={report.best[1]:.6g}")
    return EXIT_OK


def cmd_tau_star(cfg):
    rho_expr = cfg.rho_expr
    chi_expr = cfg.chi_expr
    if rho_expr is None or chi_expr is None:
        raise InputError("--rho-expr and --chi-expr (or config keys rho_expr/chi_expr) are required")
    if cfg.epsilon is None:
        raise InputError("--epsilon is required")
    rho_fn = comparison_from_expr(str(rho_expr), "K", "rho")
    chi = comparison_from_expr(str(chi_expr), "Kinf", "chi")
    report = bounds.tau_star(rho_fn, chi, cfg.epsilon, cfg.s_range, cfg.grid)
    out = _outdir(cfg)
    (out / "tau_star.csv").write_text(report.to_csv())
    _write_json(out / "tau_star.json", report.summary())
    if cfg.svg:
        ss, vals = zip(*report.grid)
        (out / "tau_star.svg").write_text(
            line_plot([(np.log10(ss), vals, "I(s)")], "Small-gain integral", "log10 s", "I(s)")
        )
    print("tau_star=unbounded" if report.unbounded else f"tau_star={report.tau_star:.12g}")
    return EXIT_OK


def cmd_counterexample(cfg):
    tau = cfg.tau if cfg.tau is not None else 2.1
    periods = cfg.periods if cfg.periods is not None else 20
    checks = scenarios.run_counterexample(tau=tau, swap_modes=bool(cfg.swap_modes), periods=int(periods))
    out = _outdir(cfg)
    lines = [c.line() for c in checks]
    (out / "counterexample.txt").write_text("\n".join(lines) + "\n")
    _write_json(
        out / "counterexample.json",
        {"tau": tau, "swap_modes": bool(cfg.swap_modes), "checks": [c.__dict__ for c in checks]},
    )
    if cfg.svg:
        system, sig = scenarios.example1_system(), scenarios.example1_signal()
        if cfg.swap_modes:
            sig = sig.with_modes_swapped(1, 2)
        traj = flow_linear(system, sig, [1.0, 0.0], periods * sig.period, dt=sig.period / 200)
        (out / "counterexample.svg").write_text(
            line_plot([(traj.times, traj.norms, "|x(t)|")], "Destabilising ADT signal", "t", "|x|")
        )
    print("\n".join(lines))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


COMMANDS = {
    "simulate": cmd_simulate,
    "check-dwell": cmd_check_dwell,
    "check-adt": cmd_check_adt,
    "check-nonlinear": cmd_check_nonlinear,
    "estimate-adt": cmd_estimate_adt,
    "tau-star": cmd_tau_star,
    "counterexample": cmd_counterexample,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        cfg = _merge_config(args)
        return COMMANDS[cfg.command](cfg)
    except (InputError, ValueError, TypeError, argparse.ArgumentTypeError) as exc:
        print(f"{args.command}: error: {exc}", file=_sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
