"""
Command-line front end: ``lorenz-lab {analyze,simulate,sweep,map}``.

Exit codes: 0 on success, 1 when the numerical pipeline fails, 2 for invalid
arguments.  Every failure prints a JSON object with an ``error`` key to
stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import List, Optional

from .core_model import params_from_alpha, regulation_target
from .dde import DEFAULT_STEPS_PER_DELAY, DEFAULT_T_END, integrate_dde, integrate_ode, oscillation_metrics
from .errors import LorenzLabError
from .normal_form import classify
from .omega_map import map_contour
from .spectral import build_char_poly, spectral_report
from .sweep import alpha_sweep

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE = 0, 1, 2
ODE_DEFAULT_H = 1e-3
ODE_DEFAULT_T_END = 50.0


class _JsonArgumentParser(argparse.ArgumentParser):
    """argparse with machine-readable usage errors."""

    def error(self, message):
        _emit_error({"error": "usage", "message": message}, sys.stderr)
        sys.exit(EXIT_USAGE)


def _emit_error(obj, stream):
    stream.write(json.dumps(obj, sort_keys=True) + "\n")


def _dump(obj) -> str:
    # repr-exact floats; NaN/inf become null so the output stays valid JSON
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v

    return json.dumps(clean(obj), indent=2, sort_keys=True)


def _alpha(text: str) -> float:
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= a <= 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in [0, 1], got {text}")
    return a


def _nonneg(text: str) -> float:
    v = float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a finite value >= 0, got {text}")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a finite value > 0, got {text}")
    return v


def _state(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _JsonArgumentParser(
        prog="lorenz-lab",
        description="Delayed-feedback control of the generalized Lorenz family.",
    )
    sub = p.add_subparsers(dest="command", required=True, parser_class=_JsonArgumentParser)

    a = sub.add_parser("analyze", help="critical delay, crossing schedule and Hopf classification (JSON)")
    a.add_argument("--alpha", type=_alpha, required=True, help="family parameter in [0, 1]")
    a.add_argument("--x-r", type=float, default=None, help="regulation abscissa (default: E+ abscissa)")
    a.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")

    s = sub.add_parser("simulate", help="integrate the closed loop and write a trajectory CSV")
    s.add_argument("--alpha", type=_alpha, required=True)
    s.add_argument("--tau", type=_nonneg, required=True, help="delay; 0 integrates the undelayed loop")
    s.add_argument("--x-r", type=float, default=None)
    s.add_argument("--h", type=_positive, default=None,
                   help=f"step; for tau > 0 rounded to tau/round(tau/h) (default tau/{DEFAULT_STEPS_PER_DELAY}, "
                        f"or {ODE_DEFAULT_H} when tau = 0)")
    s.add_argument("--t-end", type=_positive, default=None,
                   help=f"final time (default {DEFAULT_T_END:g}, or {ODE_DEFAULT_T_END:g} when tau = 0)")
    s.add_argument("--initial", type=_state, default=(1.0, 1.0, 1.0), help="constant history x,y,z (default 1,1,1)")
    s.add_argument("--out", type=Path, default=None,
                   help="trajectory CSV path; metrics go to <out stem>.metrics.json (default: CSV on stdout)")
    s.add_argument("--metrics", type=Path, default=None, help="explicit path for the metrics JSON")

    w = sub.add_parser("sweep", help="alpha sweep table and verdicts")
    w.add_argument("--n", type=int, default=21, help="grid size (default 21)")
    w.add_argument("--x-r", type=float, default=None)
    w.add_argument("--csv", type=Path, default=None, help="table path (default: stdout)")
    w.add_argument("--json", type=Path, default=None, help="verdict summary path (default: stderr when --csv is unset)")

    m = sub.add_parser("map", help="image of the imaginary axis under W for one delay")
    m.add_argument("--alpha", type=_alpha, required=True)
    m.add_argument("--tau", type=_nonneg, required=True)
    m.add_argument("--x-r", type=float, default=None)
    m.add_argument("--nu-max", type=_positive, default=None, help="half-width of the nu range (default 2 nu_+)")
    m.add_argument("--n-points", type=int, default=4001)
    m.add_argument("--csv", type=Path, default=None, help="contour CSV path")
    m.add_argument("--svg", type=Path, default=None, help="contour SVG path")
    return p


def _target(args):
    params = params_from_alpha(args.alpha)
    return params, regulation_target(params, args.x_r)


def cmd_analyze(args, out) -> int:
    params, target = _target(args)
    report = spectral_report(params, target)
    if report["tau_c"] is not None:
        nf = classify(params, target, report["tau_c"], report["nu0"])
        report["normal_form"] = nf.to_dict()
        report["direction"] = nf.direction
        report["stability"] = nf.orbit_stability
    text = _dump(report)
    if args.out:
        args.out.write_text(text + "\n")
    else:
        out.write(text + "\n")
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    params, target = _target(args)
    info = {"alpha": params.alpha, "tau": args.tau, "x_r": target.x_r, "initial": list(args.initial)}
    if args.tau > 0:
        n = max(1, round(args.tau / args.h)) if args.h else DEFAULT_STEPS_PER_DELAY
        h = args.tau / n
        t_end = args.t_end or DEFAULT_T_END
        if args.h and h != args.h:
            info["h_requested"] = args.h
        traj = integrate_dde(params, target, args.tau, initial=args.initial, h=h, t_end=t_end)
    else:
        h = args.h or ODE_DEFAULT_H
        t_end = args.t_end or ODE_DEFAULT_T_END
        traj = integrate_ode(params, target, initial=args.initial, h=h, t_end=t_end)
    info.update(h=h, t_end=t_end)
    info["metrics"] = oscillation_metrics(traj, target).to_dict()
    text = _dump(info)
    if args.out is None:
        traj.to_csv(out)
        if args.metrics:
            args.metrics.write_text(text + "\n")
        else:
            sys.stderr.write(text + "\n")
    else:
        traj.to_csv(args.out)
        side = args.metrics or args.out.with_name(args.out.stem + ".metrics.json")
        side.write_text(text + "\n")
        out.write(text + "\n")
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    result = alpha_sweep(args.n, args.x_r)
    text = result.to_json()
    if args.csv:
        result.to_csv(args.csv)
    else:
        result.to_csv(out)
    if args.json:
        args.json.write_text(text + "\n")
    if args.csv:
        out.write(text + "\n")
    elif not args.json:
        sys.stderr.write(text + "\n")
    return EXIT_PIPELINE if any(r.failed for r in result.rows) else EXIT_OK


def cmd_map(args, out) -> int:
    params, target = _target(args)
    poly = build_char_poly(params, target)
    contour = map_contour(poly, args.tau, nu_max=args.nu_max, n_points=args.n_points)
    if args.csv:
        contour.to_csv(args.csv)
    if args.svg:
        contour.to_svg(args.svg)
    summary = contour.summary()
    summary["alpha"] = params.alpha
    out.write(_dump(summary) + "\n")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep, "map": cmd_map}


def main(argv: Optional[List[str]] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if getattr(args, "n_points", 100) < 100:
        _emit_error({"error": "usage", "message": "--n-points must be at least 100"}, sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except LorenzLabError as exc:
        _emit_error(exc.to_dict(), sys.stderr)
        return EXIT_PIPELINE


def entry_point():  # pragma: no cover - console script shim
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entry_point()
