"""Command-line front end.

Exit codes: 0 success (or certificate passed), 1 certificate failed,
2 input error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from typing import Sequence

import numpy as np

from .arcs import sample_trajectory
from .config import ENV_TOL, RunConfig, default_tol
from .errors import GrowthCtlError, InfeasiblePlanError, NoSolutionError, ScenarioError, SolverError
from .fileio import dumps, parse_scenario, write_csv, write_json
from .model import biomass
from .regimes import SWEEPABLE, classification_trajectory, classify, regime_map

EXIT_OK, EXIT_CERT, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

TRAJECTORY_HEADER = ("t", "x_N", "x_M", "x_E", "u_M", "u_E", "biomass")
COSTATE_HEADER = ("t", "lam1", "lam2", "lam3", "phi_M", "phi_E", "active_arc")
SWEEP_HEADER = ("param1", "param2", "regime", "tau1", "tau_s", "objective")


class InputError(GrowthCtlError):
    pass


def parse_axis(spec: str) -> tuple[str, np.ndarray]:
    """``name=a:b:n`` to ``(name, linspace(a, b, n))``."""
    try:
        name, rng = spec.split("=", 1)
        a, b, n = rng.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise InputError(f"axis {spec!r} is not of the form name=start:stop:count") from None
    name = name.strip()
    if name not in SWEEPABLE:
        raise InputError(f"axis {spec!r}: unknown parameter {name!r}; choose from {', '.join(SWEEPABLE)}")
    if n < 1 or not (math.isfinite(a) and math.isfinite(b)):
        raise InputError(f"axis {spec!r}: need finite bounds and count >= 1")
    return name, np.linspace(a, b, n)


def _config(args, sf) -> RunConfig:
    cfg = sf.run_config(RunConfig(tol=default_tol()))
    return cfg.with_overrides(
        tol=getattr(args, "tol", None),
        lp_nodes=getattr(args, "nodes", None),
        samples=getattr(args, "samples", None),
    )


def cmd_classify(args) -> int:
    sf = parse_scenario(args.scenario)
    cfg = _config(args, sf)
    cls = classify(sf.scenario, certify=not args.no_certify, samples=cfg.samples, tol=cfg.tol)
    write_json(cls.to_dict(), args.output)
    if cls.certificate is not None and not cls.certificate.passed:
        return EXIT_CERT
    return EXIT_OK


def cmd_simulate(args) -> int:
    sf = parse_scenario(args.scenario)
    cfg = _config(args, sf)
    s = sf.scenario
    cls = classify(s, certify=False, tol=cfg.tol)
    traj = classification_trajectory(s, cls)
    dt = args.dt if args.dt is not None else s.T / 1000.0
    if not dt > 0.0 and s.T > 0.0:
        raise InputError(f"--dt must be positive, got {dt!r}")
    n = int(math.floor(s.T / dt + 1e-9)) if s.T > 0.0 else 0
    times = [k * dt for k in range(n + 1)]
    if times[-1] < s.T:
        times.append(s.T)
    rows = []
    for t, (x, u) in zip(times, sample_trajectory(s.params, traj, times)):
        rows.append({
            "t": t, "x_N": x.x_N, "x_M": x.x_M, "x_E": x.x_E,
            "u_M": u.u_M, "u_E": u.u_E, "biomass": biomass(s.params, x),
        })
    write_csv(rows, args.output, TRAJECTORY_HEADER)
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .lp_oracle import dump_lp, oracle_solve, transcribe

    sf = parse_scenario(args.scenario)
    cfg = _config(args, sf)
    s = sf.scenario
    N = cfg.lp_nodes
    if N < 1:
        raise InputError(f"--nodes must be >= 1, got {N}")
    if args.dump_lp:
        with open(args.dump_lp, "w", encoding="utf-8", newline="\n") as fh:
            dump_lp(transcribe(s, N, "condensed"), fh)
    res = oracle_solve(s, N)
    analytic = classify(s, certify=False, tol=cfg.tol).objective
    p = s.params
    out = {
        "nodes": N,
        "objective": res.objective,
        "analytic": analytic,
        "gap": (analytic - res.objective) / max(abs(analytic), 1.0),
        "iterations": res.solution.iterations,
        "bang_bang_fraction": res.bang_bang_fraction(p.k_M, p.k_E),
        "pattern": list(res.pattern(p.k_M, p.k_E)),
        "degenerate_nodes": len(res.degenerate_nodes),
    }
    write_json(out, args.output)
    return EXIT_OK


def _table(report, table) -> str:
    lines = [
        f"certificate: {'PASS' if report.passed else 'FAIL'}  max violation {report.max_violation:.3e}"
        f"  samples {report.times.size}",
    ]
    if report.reason:
        lines.append(f"  reason: {report.reason}")
    for j in report.junctions:
        lines.append(f"  junction t={j.t:.17g} {j.left.value}->{j.right.value} tie gap {j.tie_gap:.3e}"
                     f" {'ok' if j.ok else 'BAD'}")
    lines.append(f"  terminal {'ok' if report.terminal_ok else 'BAD'}  gamma1*x_N(T) = {report.complementarity:.3e}")
    lines.append("")
    lines.append(f"{'structure':<12} {'feasible':<8} {'tau1':>22} {'tau_s':>22} {'objective':>24}")
    best = table.best
    for r in table.rows:
        t1 = "" if r.tau1 is None else f"{r.tau1:.17g}"
        ts = "" if r.tau_s is None else f"{r.tau_s:.17g}"
        obj = f"{r.objective:.17g}" if r.feasible else "-"
        mark = "  *" if r is best else ""
        lines.append(f"{r.structure:<12} {str(r.feasible).lower():<8} {t1:>22} {ts:>22} {obj:>24}{mark}")
    return "\n".join(lines) + "\n"


def cmd_verify(args) -> int:
    from .verify import compare_candidates

    sf = parse_scenario(args.scenario)
    cfg = _config(args, sf)
    s = sf.scenario
    cls = classify(s, certify=True, samples=cfg.samples, resolution=args.resolution, tol=cfg.tol)
    report = cls.certificate
    table = compare_candidates(s, args.resolution)
    if args.costate_csv:
        write_csv(report.records(), args.costate_csv, COSTATE_HEADER)
    if args.format == "table":
        text = _table(report, table)
    else:
        text = dumps({
            "classification": cls.to_dict(),
            "certificate": report.summary(),
            "candidates": table.records(),
            "best": table.best.structure,
        })
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_CERT


def cmd_sweep(args) -> int:
    sf = parse_scenario(args.scenario)
    axis1, axis2 = parse_axis(args.axis1), parse_axis(args.axis2)
    if axis1[0] == axis2[0]:
        raise InputError(f"both axes sweep {axis1[0]!r}")
    cells = regime_map(sf.scenario, axis1, axis2, workers=args.workers)
    rows = [
        {"param1": c[axis1[0]], "param2": c[axis2[0]], **{k: c[k] for k in SWEEP_HEADER[2:]}}
        for c in cells
    ]
    write_csv(rows, args.output, SWEEP_HEADER)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="growthctl",
        description="Optimal storage/enzyme growth regimes: classify, simulate, audit and cross-check.",
        epilog=f"Set {ENV_TOL} to override the default regime-condition tolerance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, tol=True):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("-o", "--output", default="-", help="output path (default stdout)")
        if tol:
            p.add_argument("--tol", type=float, default=None, help="regime-condition tolerance")

    p = sub.add_parser("classify", help="print the optimal regime as JSON")
    common(p)
    p.add_argument("--samples", type=int, default=None, help="PMP audit samples per arc")
    p.add_argument("--no-certify", action="store_true", help="skip the PMP audit")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="write the optimal trajectory as CSV")
    common(p)
    p.add_argument("--dt", type=float, default=None, help="sampling step (default T/1000)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="solve the discretised LP and report the gap")
    common(p)
    p.add_argument("--nodes", type=int, default=None, help="time steps N (default 1000)")
    p.add_argument("--dump-lp", default=None, help="write the LP as a plain-text listing")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="PMP audit and candidate comparison")
    common(p)
    p.add_argument("--samples", type=int, default=None, help="PMP audit samples per arc")
    p.add_argument("--resolution", type=int, default=200, help="pre-scan grid for candidate optimisation")
    p.add_argument("--costate-csv", default=None, help="write sampled costate and switching values")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="classify a 2-D parameter grid, write CSV")
    common(p, tol=False)
    p.add_argument("--axis1", required=True, help="name=start:stop:count")
    p.add_argument("--axis2", required=True, help="name=start:stop:count")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.set_defaults(func=cmd_sweep)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"growthctl: scenario error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, InfeasiblePlanError, NoSolutionError) as exc:
        print(f"growthctl: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, ValueError) as exc:
        print(f"growthctl: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"growthctl: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())
