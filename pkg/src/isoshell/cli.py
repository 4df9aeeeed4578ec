"""
Command-line front end.

    isoshell [--config FILE] COMMAND [options]

Commands: solve, enumerate, branch, wfun, thresholds, gelfand, fields,
reproduce-paper.  Every command writes its files into ``--out-dir``.

Exit codes: 0 success, 1 usage error, 2 domain failure (a JSON diagnostic
``{"error": ..., "message": ...}`` goes to standard error).

Config file: one ``key = value`` per line, ``#`` starts a comment, keys are
long option names (``max-solves`` or ``max_solves``).  Command-line flags
override the file.  Keys unknown to the chosen command are usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import continuation, gelfand, hofid, physics, representation
from .ivp import IvpConfig, IvpError, extrema_of_W, integrate_U

REFERENCE = {
    "N2": 2.51755148,
    "N1": 1.8427,
    "test1": {"N": 1.9, "y0": [2.6618, 7.9906, 10.609], "solves": 84},
    "test2": {"N": 2.0001, "y0": [2.8082, 7.2495, 12.124, 16.832, 21.618, 26.280, 31.263, 35.221],
              "solves": 202},
}
DOMAIN_ERRORS = (hofid.NoConvergence, hofid.MeshError, continuation.InitialSolveFailed,
                 continuation.ContinuationError, IvpError, ValueError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _fmt(x):
    return f"{x:.17g}"


def _sig5(x):
    return float(f"{x:.5g}")


def write_table(out_dir, stem, header, columns, fmt="csv"):
    """Write columns as ``stem.csv`` (17 significant digits) or ``stem.json``."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    if fmt == "json":
        path = os.path.join(out_dir, stem + ".json")
        write_json(path, {h: c.tolist() for h, c in zip(header, cols)})
        return path
    path = os.path.join(out_dir, stem + ".csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([_fmt(x) for x in row])
    return path


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_schema(name):
    """JSON schema shipped for output file kind ``name`` (e.g. ``"stats"``)."""
    from importlib import resources
    text = resources.files("isoshell").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def read_table(path):
    """Columns of a CSV written by ``write_table``, keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {h: body[:, i] for i, h in enumerate(header)}


def read_config(path):
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def _solution_table(sol):
    return ["eta", "y", "yprime"], [sol.nodes, sol.y, sol.y_prime]


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_solve(args):
    guess = hofid.initial_guess(args.N, args.guess)
    sol = hofid.solve_bvp(args.N, mesh=hofid.Mesh.uniform(args.points), guess=guess,
                          p=args.order, tol=args.tol, refine=not args.no_refine)
    write_table(args.out_dir, "solution", *_solution_table(sol), fmt=args.format)
    stats = sol.stats.as_dict(hofid.condition_estimate(sol))
    write_json(os.path.join(args.out_dir, "stats.json"), stats)
    print(json.dumps({"N": sol.N, "y0": sol.y0, **stats}, sort_keys=True))
    return 0


def _config_from(args):
    return continuation.ContinuationConfig(
        delta0=args.delta0, delta_min=min(args.delta_min, args.delta0),
        delta_max=max(args.delta_max, args.delta0), dN=args.dN, order=args.order,
        tol=args.tol, max_solves=args.max_solves, stop_arclength=args.stop_arclength,
        persist=args.persist)


def _branch_dict(branch):
    return {
        "points": [{"N": p.N, "y0": p.y0} for p in branch.points],
        "folds": [{"index": i, "N": branch.points[i].N, "y0": branch.points[i].y0}
                  for i in branch.turning_points],
        "solve_count": branch.solve_count,
        "event_solves": branch.event_solves,
    }


def cmd_enumerate(args):
    res = continuation.enumerate_solutions(args.N, _config_from(args))
    sol_dir = os.path.join(args.out_dir, "solutions")
    os.makedirs(sol_dir, exist_ok=True)
    files = []
    for k, sol in enumerate(res.solutions, 1):
        path = write_table(sol_dir, f"solution_{k:02d}", *_solution_table(sol), fmt=args.format)
        files.append(os.path.relpath(path, args.out_dir))
    N, y0 = res.branch.arrays()
    write_table(args.out_dir, "branch", ["N", "y0"], [N, y0], fmt=args.format)
    bd = _branch_dict(res.branch)
    summary = {
        "N": res.N_target,
        "count": len(res.solutions),
        "y0": [s.y0 for s in res.solutions],
        "y0_rounded": [_sig5(s.y0) for s in res.solutions],
        "boundary_residual": [abs(s.N - res.N_target) for s in res.solutions],
        "solution_files": files,
        "folds": bd["folds"],
        "solve_count": bd["solve_count"],
        "event_solves": bd["event_solves"],
        "stopped_reason": res.stopped_reason,
    }
    write_json(os.path.join(args.out_dir, "summary.json"), summary)
    print(json.dumps({k: summary[k] for k in ("N", "count", "y0_rounded", "stopped_reason")}))
    return 0


def cmd_branch(args):
    branch = continuation.trace_branch(args.N_start, _config_from(args), folds=args.folds,
                                       y0_max=args.y0_max)
    N, y0 = branch.arrays()
    write_table(args.out_dir, "branch", ["N", "y0"], [N, y0], fmt=args.format)
    bd = _branch_dict(branch)
    del bd["points"]
    write_json(os.path.join(args.out_dir, "branch_summary.json"), bd)
    print(json.dumps({"points": len(branch.points), "folds": len(branch.turning_points)}))
    return 0


def cmd_wfun(args):
    tol = args.tol if args.tol is not None else 1e-10
    prof = integrate_U(IvpConfig(n=args.n, t_max=args.t_max, rel_tol=tol, abs_tol=tol))
    write_table(args.out_dir, "profile", ["t", "u", "uprime", "w"],
                [prof.nodes, prof.u, prof.u_prime, prof.w_nodes], fmt=args.format)
    ext = [{"t": e.t_star, "w": e.w_star, "kind": e.kind} for e in extrema_of_W(prof)]
    write_json(os.path.join(args.out_dir, "extrema.json"), ext)
    print(json.dumps({"nodes": int(prof.nodes.size), "extrema": len(ext)}))
    return 0


def _thresholds(with_fold):
    th = representation.critical_thresholds()
    out = {"N1": th.n1, "N2": th.n2, "sigma_N2": th.sigma_n2, "sigma_N1": th.sigma_n1}
    if with_fold:
        branch = continuation.trace_branch(2.3, folds=2)
        out["N2_fold"] = continuation.find_fold(branch, "first")[0]
        out["N1_fold"] = continuation.find_fold(branch, "second")[0]
    return out


def cmd_thresholds(args):
    out = _thresholds(args.fold)
    write_json(os.path.join(args.out_dir, "thresholds.json"), out)
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_gelfand(args):
    query = gelfand.CountQuery(args.kind, args.level, args.n, args.sigma_max, args.margin)
    res = gelfand.count_radial_solutions(query)
    out = {"kind": query.kind, "n": query.n, "level": query.level,
           "sigma_max": query.sigma_max, **res.as_dict()}
    write_json(os.path.join(args.out_dir, "gelfand.json"), out)
    if args.curve:
        s, v = gelfand.multiplier_samples(args.n, args.kind, args.sigma_max)
        write_table(args.out_dir, "multiplier", ["sigma", "value"], [s, v], fmt=args.format)
    print(json.dumps({"count": res.count, "truncated": res.truncated}))
    return 0


class TabulatedSolution:
    """Node values read back from a solution table (nodes only, no interpolation)."""

    def __init__(self, eta, y, yprime):
        self.nodes, self._y, self._yp = eta, y, yprime

    def _lookup(self, table, eta):
        idx = np.searchsorted(self.nodes, eta)
        idx = np.clip(idx, 0, self.nodes.size - 1)
        if not np.allclose(self.nodes[idx], eta, rtol=0, atol=1e-14):
            raise ValueError("tabulated solution is only available at its nodes")
        return table[idx]

    def __call__(self, eta):
        return self._lookup(self._y, np.asarray(eta))

    def derivative(self, eta):
        return self._lookup(self._yp, np.asarray(eta))


def cmd_fields(args):
    with open(args.params) as fh:
        raw = json.load(fh)
    known = {"R", "T", "a", "m_g", "G", "r_scale", "rho_scale"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
    params = physics.PhysicalParams(**{k: float(v) for k, v in raw.items()})
    numbers = physics.characteristic_numbers(params)
    tab = read_table(args.solution)
    missing = {"eta", "y", "yprime"} - set(tab)
    if missing:
        raise ValueError(f"solution table lacks columns {sorted(missing)}")
    sol = TabulatedSolution(tab["eta"], tab["y"], tab["yprime"])
    f = physics.fields_from_solution(sol, params, numbers)
    write_table(args.out_dir, "fields", ["r", "rho", "p", "g"], [f.r, f.rho, f.p, f.g],
                fmt=args.format)
    print(json.dumps({"pi1": numbers.pi1, "pi4": numbers.pi4, "N": numbers.N}, sort_keys=True))
    return 0


def _compare(found, ref):
    return [{"reference": r, "computed": f, "abs_diff": abs(f - r), "rel_diff": abs(f - r) / abs(r)}
            for f, r in zip(found, ref)]


def cmd_reproduce(args):
    th = _thresholds(True)
    report = {"thresholds": {
        "N2": {"reference": REFERENCE["N2"], "w_route": th["N2"], "fold_route": th["N2_fold"]},
        "N1": {"reference": REFERENCE["N1"], "w_route": th["N1"], "fold_route": th["N1_fold"]},
    }}
    cfg = continuation.ContinuationConfig(order=args.order, tol=args.tol)
    lines = [f"N2: reference {REFERENCE['N2']:.8f}  W extremum {th['N2']:.10f}  fold {th['N2_fold']:.10f}",
             f"N1: reference {REFERENCE['N1']:.4f}  W extremum {th['N1']:.10f}  fold {th['N1_fold']:.10f}"]
    for key in ("test1", "test2"):
        ref = REFERENCE[key]
        res = continuation.enumerate_solutions(ref["N"], cfg)
        y0 = [s.y0 for s in res.solutions]
        mass = [physics.mass_residual(s) for s in res.solutions]
        report[key] = {
            "N": ref["N"], "count": len(y0), "reference_count": len(ref["y0"]),
            "y0": _compare(y0, ref["y0"]), "solve_count": res.branch.solve_count,
            "reference_solve_count": ref["solves"], "max_mass_residual": max(mass),
            "stopped_reason": res.stopped_reason,
        }
        lines.append(f"N = {ref['N']}: {len(y0)} solutions (reference {len(ref['y0'])}), "
                     f"{res.branch.solve_count} corrector solves (reference {ref['solves']})")
        for row in report[key]["y0"]:
            lines.append(f"  y0 reference {row['reference']:<8g} computed {_sig5(row['computed']):<8g} "
                         f"rel diff {row['rel_diff']:.2e}")
    write_json(os.path.join(args.out_dir, "report.json"), report)
    with open(os.path.join(args.out_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _positive_float(text):
    x = float(text)
    if not (math.isfinite(x) and x > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return x


def _positive_int(text):
    x = int(text)
    if x < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return x


def _order(text):
    p = int(text)
    if p not in hofid.ORDERS:
        raise argparse.ArgumentTypeError(f"order must be one of {hofid.ORDERS}")
    return p


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=_positive_float, default=None,
                        help="solver tolerance (BVP error indicator, or IVP tolerance for wfun)")
    common.add_argument("--order", type=_order, default=hofid.DEFAULT_ORDER, help="FD order p")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of tabular outputs")

    cont = _Parser(add_help=False)
    cont.add_argument("--delta0", type=_positive_float, default=0.2)
    cont.add_argument("--delta-min", type=_positive_float, default=1e-4)
    cont.add_argument("--delta-max", type=_positive_float, default=0.5)
    cont.add_argument("--dN", type=_positive_float, default=0.05)
    cont.add_argument("--max-solves", type=_positive_int, default=5000)
    cont.add_argument("--stop-arclength", type=_positive_float, default=1.0)
    cont.add_argument("--persist", default=None, help="append branch points as JSON lines")

    parser = _Parser(prog="isoshell", description=__doc__.split("\n\n")[1].strip())
    parser.add_argument("--config", help="key = value defaults file")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    p = sub.add_parser("solve", parents=[common], help="solve the BVP at one N")
    p.add_argument("--N", type=_positive_float, required=True)
    p.add_argument("--points", type=_positive_int, default=hofid.DEFAULT_POINTS)
    p.add_argument("--guess", choices=("midpoint", "integral"), default="midpoint")
    p.add_argument("--no-refine", action="store_true")
    p.set_defaults(func=cmd_solve)
    subs["solve"] = p

    p = sub.add_parser("enumerate", parents=[common, cont], help="all solutions at N")
    p.add_argument("--N", type=_positive_float, required=True)
    p.set_defaults(func=cmd_enumerate)
    subs["enumerate"] = p

    p = sub.add_parser("branch", parents=[common, cont], help="trace the solution branch")
    p.add_argument("--N-start", type=_positive_float, default=2.0)
    p.add_argument("--folds", type=_positive_int, default=2)
    p.add_argument("--y0-max", type=float, default=None)
    p.set_defaults(func=cmd_branch)
    subs["branch"] = p

    p = sub.add_parser("wfun", parents=[common], help="integrate U_n and tabulate W")
    p.add_argument("--n", type=_positive_int, default=3)
    p.add_argument("--t-max", type=_positive_float, default=1e5)
    p.set_defaults(func=cmd_wfun)
    subs["wfun"] = p

    p = sub.add_parser("thresholds", parents=[common], help="critical values N1, N2")
    p.add_argument("--fold", action="store_true", help="also refine the folds by continuation")
    p.set_defaults(func=cmd_thresholds)
    subs["thresholds"] = p

    p = sub.add_parser("gelfand", parents=[common], help="count radial Gelfand solutions")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--kind", choices=("neumann", "dirichlet"), required=True)
    p.add_argument("--level", type=float, required=True, help="gamma (Neumann) or lambda (Dirichlet)")
    p.add_argument("--sigma-max", type=_positive_float, default=gelfand.SIGMA_MAX)
    p.add_argument("--margin", type=_positive_float, default=gelfand.TRUNCATION_MARGIN)
    p.add_argument("--curve", action="store_true", help="also write the multiplier curve")
    p.set_defaults(func=cmd_gelfand)
    subs["gelfand"] = p

    p = sub.add_parser("fields", parents=[common], help="dimensional fields from a solution")
    p.add_argument("--solution", required=True, help="solution CSV (eta,y,yprime)")
    p.add_argument("--params", required=True, help="JSON with R, T, a, m_g [, G, r_scale, rho_scale]")
    p.set_defaults(func=cmd_fields)
    subs["fields"] = p

    p = sub.add_parser("reproduce-paper", parents=[common], help="thresholds and both test runs")
    p.set_defaults(func=cmd_reproduce)
    subs["reproduce-paper"] = p
    return parser, subs


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _apply_config(sub, config):
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "func")}
    defaults = {}
    for key, value in config.items():
        if key not in actions:
            raise UsageError(f"config key '{key}' is not an option of '{sub.prog}'")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() not in _BOOL:
                raise UsageError(f"config key '{key}' expects true/false")
            defaults[key] = _BOOL[value.lower()]
        else:
            try:
                defaults[key] = action.type(value) if action.type else value
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key '{key}': {exc}")
            if action.choices is not None and defaults[key] not in action.choices:
                raise UsageError(f"config key '{key}' must be one of {list(action.choices)}")
        action.required = False
    sub.set_defaults(**defaults)


def parse_args(argv):
    parser, subs = build_parser()
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        command = next((a for a in rest if a in subs), None)
        if command is None:
            raise UsageError("a command is required")
        _apply_config(subs[command], read_config(known.config))
    args = parser.parse_args(argv)
    if args.command in ("solve", "enumerate", "branch", "reproduce-paper") and args.tol is None:
        args.tol = 1e-8
    return args


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except OSError as exc:
        print(f"isoshell: cannot read config: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out_dir, exist_ok=True)
    try:
        return args.func(args)
    except DOMAIN_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
