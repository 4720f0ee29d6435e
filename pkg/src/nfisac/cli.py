"""Command-line entry point ``nfisac``.

Exit codes: 0 success, 1 bad input or configuration, 2 infeasible SINR
targets, 3 solver numerical limit.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .channel import build_channel_set
from .conic import SolverSettings
from .designs import DESIGNS, solution_from_dict, solution_to_dict
from .errors import Infeasible, NfisacError, NumericalLimit, RankDeficientBlock
from .metrics import beampattern_grid, write_grid_csv
from .scenario import db_to_linear, load_scenario, scenario_from_dict, scenario_to_dict, write_matrix_csv
from .tradeoff import (
    collocated_distance_sweep,
    default_gamma_grid,
    endpoints,
    sweep,
    write_curve_csv,
    write_distance_csv,
)
from .validation import run_validation

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage, which would read as infeasible."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# --- output helpers ----------------------------------------------------------


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def _write_manifest(out_path, args, outputs, wall, diagnostics=None, status="ok") -> Path:
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "scenario": str(getattr(args, "scenario", None) or getattr(args, "solution", None) or ""),
        "settings": _settings_dict(args),
        "outputs": [str(p) for p in outputs],
        "status": status,
        "wall_time_s": wall,
        "diagnostics": diagnostics or {},
        "version": __version__,
        "git_describe": _git_describe(),
    }
    path = Path(str(out_path) + ".manifest.json")
    _atomic_write(path, _dumps(manifest))
    return path


def _settings_dict(args) -> dict:
    d = {}
    for key in ("objective", "direct", "tol", "backend", "points", "gamma_min_db", "gamma_max_db", "level", "plane", "range_y", "range_z", "d_range"):
        if hasattr(args, key) and getattr(args, key) is not None:
            d[key] = getattr(args, key)
    return d


def _settings(args) -> SolverSettings:
    kw = {}
    if getattr(args, "tol", None) is not None:
        kw["abs_tol"] = kw["rel_tol"] = float(args.tol)
    if getattr(args, "backend", None):
        kw["backend"] = args.backend
    return SolverSettings(**kw)


def _range(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        n = int(n)
        a, b = float(a), float(b)
    except ValueError as exc:
        raise UsageError(f"range {text!r} must look like min:max:steps") from exc
    if n < 1:
        raise UsageError("range needs at least one step")
    return np.linspace(a, b, n) if n > 1 else np.array([a])


def _fmt(x) -> str:
    return format(float(x), ".17g")


# --- commands ----------------------------------------------------------------


def cmd_design(args) -> int:
    t0 = time.perf_counter()
    config = load_scenario(args.scenario)
    ch = build_channel_set(config)
    out = Path(args.out)
    try:
        sol = DESIGNS[args.objective](ch, config, reduced=not args.direct, settings=_settings(args))
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        report = getattr(exc, "report", None)
        diag = {"max_sinr": getattr(report, "max_sinr", None), "min_power_w": getattr(report, "min_power", None)}
        _write_manifest(out, args, [], time.perf_counter() - t0, diag, status="infeasible")
        return EXIT_INFEASIBLE
    except NumericalLimit as exc:
        print(f"numerical limit: {exc}", file=sys.stderr)
        _write_manifest(out, args, [], time.perf_counter() - t0, status="numerical_limit")
        return EXIT_NUMERICAL
    wall = time.perf_counter() - t0
    _atomic_write(out, _dumps(solution_to_dict(sol, scenario=_embedded_scenario(config), full_matrices=args.full_matrices or None)))
    diag = dict(sol.diagnostics, metric=sol.metric_value)
    _write_manifest(out, args, [out], wall, diag, status=sol.solver_status)
    print(f"{sol.metric_name} = {_fmt(sol.metric_value)}  ({sol.diagnostics.get('mode')}, {wall:.2f} s)")
    return EXIT_OK


def _embedded_scenario(config):
    if config.scalar_sensing_noise is not None:
        return scenario_to_dict(config)
    # matrix noise does not matter for beampatterns; keep the file self-contained
    d = scenario_to_dict(config, matrix_file="(omitted)")
    d.pop("sensing_noise_matrix_file")
    d["sensing_noise_dbm"] = 0.0
    return d


def cmd_tradeoff(args) -> int:
    t0 = time.perf_counter()
    config = load_scenario(args.scenario)
    settings = _settings(args)
    out = Path(args.out)
    outputs = []
    diag = {}
    if args.d_range:
        rows = collocated_distance_sweep(config, _range(args.d_range), settings)
        write_distance_csv(out, rows)
        _write_manifest(out, args, [out], time.perf_counter() - t0)
        print(f"wrote {len(rows)} distance points to {out}")
        return EXIT_OK

    ch = build_channel_set(config)
    ends = None
    if config.U == 1 and config.K == 1:
        ends = endpoints(ch, config, settings)
        ep = out.with_suffix(".endpoints.json")
        _atomic_write(ep, _dumps(ends.to_dict()))
        outputs.append(ep)
        diag["endpoints"] = ends.to_dict()
    if args.gamma_min_db is not None and args.gamma_max_db is not None:
        g_lo, g_hi = db_to_linear(args.gamma_min_db), db_to_linear(args.gamma_max_db)
    elif ends is not None:
        g_lo, g_hi = max(ends.gamma_s, 1e-12), ends.gamma_c * (1 - 1e-6)
    else:
        raise UsageError("--gamma-min-db and --gamma-max-db are required unless the scenario has one target and one user")
    if args.points > 0:
        # with the user on the target P_s already reaches the MRT SINR
        grid = default_gamma_grid(g_lo, g_hi, args.points) if g_lo < g_hi else [g_hi]
        curve = sweep(ch, config, args.objective, grid, settings)
        write_curve_csv(out, curve)
        outputs.insert(0, out)
        bad = sum(p.status != "optimal" for p in curve.points)
        diag["failed_points"] = bad
        print(f"wrote {len(curve.points)} points to {out} ({bad} not optimal)")
    _write_manifest(out, args, outputs, time.perf_counter() - t0, diag)
    return EXIT_OK


def cmd_beampattern(args) -> int:
    t0 = time.perf_counter()
    path = Path(args.solution)
    if not path.exists():
        raise UsageError(f"solution file {path} not found")
    with open(path) as fh:
        d = json.load(fh)
    if "scenario" not in d:
        raise UsageError("solution file has no embedded scenario")
    sol = solution_from_dict(d)
    config = scenario_from_dict(d["scenario"])
    axis, _, value = args.plane.partition("=")
    if axis.strip() != "x":
        raise UsageError("only planes of the form x=<value> are supported")
    try:
        x = float(value)
    except ValueError as exc:
        raise UsageError(f"bad plane {args.plane!r}") from exc
    ys, zs = _range(args.range_y), _range(args.range_z)
    ch = build_channel_set(config)
    grid = beampattern_grid(ch.tx_positions, ch.wavelength, sol.R_X, ys, zs, x=x)
    out = Path(args.out)
    write_grid_csv(out, ys, zs, grid)
    _write_manifest(out, args, [out], time.perf_counter() - t0)
    print(f"wrote {grid.size} cells to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    config = load_scenario(args.scenario, check=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientBlock)
        results = run_validation(config, args.level, _settings(args))
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.label:4}  {r.name:<{width}}  {r.seconds:7.2f}s  {r.detail}")
    ok = all(r.passed for r in results)
    print(f"{'all checks passed' if ok else 'some checks failed'} in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if ok else EXIT_CONFIG


def cmd_channel(args) -> int:
    t0 = time.perf_counter()
    config = load_scenario(args.scenario)
    ch = build_channel_set(config)
    try:
        M = ch.matrix(args.matrix)
    except KeyError as exc:
        raise UsageError(f"unknown matrix {args.matrix!r}") from exc
    out = Path(args.out)
    write_matrix_csv(out, M)
    _write_manifest(out, args, [out], time.perf_counter() - t0)
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nfisac", description="Near-field ISAC transmit covariance design")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--tol", type=float, help="solver tolerance (default 1e-8)")
        sp.add_argument("--backend", choices=("clarabel", "cvxopt"))

    d = sub.add_parser("design", help="solve one design")
    d.add_argument("--scenario", required=True)
    d.add_argument("--objective", choices=sorted(DESIGNS), required=True)
    d.add_argument("--direct", action="store_true", help="solve the full N x N relaxation")
    d.add_argument("--out", default="solution.json")
    d.add_argument("--full-matrices", action="store_true", help="write W_u, R_d, R_X in full even for large N")
    solver_flags(d)
    d.set_defaults(func=cmd_design)

    t = sub.add_parser("tradeoff", help="sweep the SINR threshold or the target offset")
    t.add_argument("--scenario", required=True)
    t.add_argument("--objective", choices=sorted(DESIGNS), default="crb")
    t.add_argument("--points", type=int, default=20)
    t.add_argument("--gamma-min-db", type=float)
    t.add_argument("--gamma-max-db", type=float)
    t.add_argument("--d-range", help="min:max:steps offsets (m) for the collocated distance sweep")
    t.add_argument("--out", required=True)
    solver_flags(t)
    t.set_defaults(func=cmd_tradeoff)

    b = sub.add_parser("beampattern", help="evaluate a solution's beampattern on a plane")
    b.add_argument("--solution", required=True)
    b.add_argument("--plane", default="x=0")
    b.add_argument("--range-y", required=True)
    b.add_argument("--range-z", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_beampattern)

    v = sub.add_parser("validate", help="run the oracle checks on a scenario")
    v.add_argument("--scenario", required=True)
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    solver_flags(v)
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("channel", help="dump a channel matrix as CSV")
    c.add_argument("--scenario", required=True)
    c.add_argument("--matrix", required=True, help="A, V, H_c, B, dA_x ... dV_z")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_channel)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default", RankDeficientBlock)
            return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalLimit as exc:
        print(f"numerical limit: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, NfisacError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
