"""Command-line interface.

Exit codes: 0 success, 2 bad arguments, 3 infeasible configuration,
4 resource guard tripped.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import mc, theory
from .errors import ConfigurationError, DomainError, ResourceGuardError
from .models import SignalConfig, generate
from .regions import build_levels
from .structured import evaluate

DESK = {"n": 4096, "null_reps": 2000, "power_reps": 500}
FULL = {"n": 10000, "null_reps": 10000, "power_reps": 2000}


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).resolve().parent)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


def _floats(text: str) -> list:
    return [float(t) for t in text.split(",") if t.strip()]


def _header(args) -> str:
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return "# structhc " + version_string() + " " + json.dumps(params, sort_keys=True, default=str)


def _emit_csv(args, rows: list, columns: list) -> None:
    buf = io.StringIO()
    buf.write(_header(args) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    _write(args, buf.getvalue())


def _write(args, text: str) -> None:
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def read_dataset(path: str) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", comments="#", dtype=float, ndmin=1)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim == 2 and arr.shape[0] != arr.shape[1]:
        raise ConfigurationError(f"2-d datasets must be square, got {arr.shape}")
    return arr


def write_dataset(path: str, cells: np.ndarray, header: str) -> None:
    np.savetxt(path, cells if cells.ndim == 2 else cells[:, None], delimiter=",", fmt="%.17g",
               header=header.lstrip("# "), comments="# ")


def _config(args, seed=None) -> SignalConfig:
    d = 2 if args.shape in ("rectangle", "rect", "ball") else 1
    shape = {"rect": "rectangle"}.get(args.shape, args.shape)
    return SignalConfig(n=args.n, alpha=args.alpha, beta=args.beta, r=args.r, d=d, shape=shape,
                        regime=args.regime, placement=args.placement,
                        seed=args.seed if seed is None else seed, mu_override=args.mu)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    cfg = _config(args)
    ds = generate(cfg)
    if not args.out:
        raise DomainError("gen needs --out")
    write_dataset(args.out, ds.cells, _header(args))
    side = {"config": cfg.to_dict(), "truth": [{"kind": t.kind, "bounds": list(t.bounds())} for t in ds.truth]}
    Path(args.out + ".json").write_text(json.dumps(side, indent=2, default=float))
    return 0


def cmd_approx(args) -> int:
    shape = {"rect": "rectangle"}.get(args.shape, args.shape)
    rows = []
    for lev in build_levels(args.n, shape):
        sizes = [len(g) for g in lev.groups] or [0]
        rows.append({"level": lev.level, "epsilon": lev.epsilon, "grid_step": lev.grid_step,
                     "n_ell": lev.n_ell, "i_max": lev.i_max, "min_group": min(sizes), "max_group": max(sizes)})
    _emit_csv(args, rows, ["level", "epsilon", "grid_step", "n_ell", "i_max", "min_group", "max_group"])
    return 0


def _shape_of(data: np.ndarray, shape: str) -> str:
    shape = {"rect": "rectangle"}.get(shape, shape)
    if data.ndim == 1 and shape != "interval":
        raise ConfigurationError("1-d data needs --shape interval")
    if data.ndim == 2 and shape == "interval":
        return "rectangle"
    return shape


def cmd_stat(args) -> int:
    data = read_dataset(args.input)
    shape = _shape_of(data, args.shape)
    sv = evaluate(data, args.family, shape)
    _write(args, json.dumps(sv.to_dict()) + "\n")
    return 0


def cmd_bounds(args) -> int:
    if args.kind == "boundary":
        rows = []
        for a in _floats(args.alpha):
            for b in _floats(args.beta):
                rs = theory.rho_star(a, b)
                try:
                    pen = theory.rho_star_pen(a, b).rho_star
                except DomainError:
                    pen = float("nan")
                hc = theory.rho_star_unstructured_hc(a, b)
                rows.append({"alpha": a, "beta": b, "branch": rs.branch, "rho_star": rs.rho_star,
                             "rho_star_pen": pen, "rho_star_hc": hc.rho_star, "hc_scaling_exponent": hc.scaling_exponent})
        _emit_csv(args, rows, ["alpha", "beta", "branch", "rho_star", "rho_star_pen", "rho_star_hc", "hc_scaling_exponent"])
        return 0
    rows = []
    for e in _floats(args.eta):
        rows.append({"eta": e, "n": args.n, "bj_iii": theory.bj_tail_bound(e, args.n, args.K),
                     "bb_i": theory.bb_sup_bound(e, args.a, args.b),
                     "loglik_ii": theory.ks_loglik_bound(e, args.a, args.b, args.n)})
    _emit_csv(args, rows, ["eta", "n", "bj_iii", "bb_i", "loglik_ii"])
    return 0


def _scale(args):
    prof = FULL if args.full else DESK
    n = args.n if args.n else prof["n"]
    return n, prof


def cmd_critval(args) -> int:
    n, prof = _scale(args)
    reps = args.reps or prof["null_reps"]
    stats = [s.strip() for s in args.stats.split(",")]
    rep = mc.simulate_null(stats, n, reps, args.seed, _norm_shape(args.shape), args.workers)
    rows = [{"statistic": s, "n": n, "level": args.level, "critical_value": mc.critical_value(rep, args.level, s),
             "reps": reps} for s in stats]
    _emit_csv(args, rows, ["statistic", "n", "level", "critical_value", "reps"])
    return 0


def _norm_shape(shape: str) -> str:
    return {"rect": "rectangle"}.get(shape, shape)


def cmd_power(args) -> int:
    n, prof = _scale(args)
    args.n = n
    null_reps = args.null_reps or prof["null_reps"]
    reps = args.reps or prof["power_reps"]
    stats = [s.strip() for s in args.stats.split(",")]
    shape = _norm_shape(args.shape)
    rep = mc.simulate_null(stats, n, null_reps, args.seed, shape, args.workers)
    crit = {s: (mc.critical_value(rep, args.level, s), n) for s in stats}
    if args.r_mult:
        base = theory.rho_star(args.alpha, args.beta).rho_star
        rs = [m * base for m in _floats(args.r_mult)]
    else:
        rs = _floats(args.r_grid)
    configs = []
    for r in rs:
        args.r = r
        configs.append(_config(args, seed=args.seed + 1))
    rows = mc.power_curve(configs, stats, crit, reps, args.seed + 1, args.workers)
    _emit_csv(args, rows, ["n", "alpha", "beta", "r", "mu", "statistic", "power", "se", "reps", "critical_value"])
    return 0


def cmd_verify(args) -> int:
    rows = mc.verify_tail_bound(args.which, args.n, args.reps, _floats(args.eta), args.seed, args.a, args.b,
                                args.K, args.C)
    _emit_csv(args, rows, ["which", "n", "eta", "empirical", "se", "bound", "flag", "reps", "C"])
    return 0


def _read_critval(path: str, stat: str) -> tuple:
    with open(path) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    for r in rows:
        if r["statistic"] == stat:
            return float(r["critical_value"]), int(r["n"])
    raise ConfigurationError(f"{path} has no critical value for {stat}")


def cmd_detect(args) -> int:
    data = read_dataset(args.input)
    shape = _shape_of(data, args.shape)
    n = data.shape[0]
    if args.critval is not None:
        crit = args.critval
    elif args.critval_file:
        crit, cn = _read_critval(args.critval_file, args.stat)
        if cn != n:
            raise ConfigurationError(f"critical value simulated at n={cn}, dataset has n={n}")
    else:
        rep = mc.simulate_null(args.stat, n, args.reps, args.seed, shape, args.workers)
        crit = mc.critical_value(rep, args.level)
    _write(args, json.dumps(mc.detect(data, args.stat, crit, shape)) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _model_args(p):
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--regime", choices=["sparse", "dense", "auto"], default="sparse")
    p.add_argument("--placement", choices=["free_disjoint", "grid_aligned"], default="free_disjoint")
    p.add_argument("--mu", type=float, default=None, help="override the calibrated amplitude")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="structhc", description="Structured higher criticism toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    shapes = ["interval", "rect", "rectangle", "ball"]

    p = sub.add_parser("gen", help="generate a dataset (CSV plus JSON sidecar)")
    _model_args(p)
    p.add_argument("--shape", choices=shapes, default="interval")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("approx", help="per-level summary of an approximating set")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--shape", choices=shapes, default="interval")
    p.add_argument("--out")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("stat", help="evaluate a statistic on a dataset")
    p.add_argument("input")
    p.add_argument("--family", default="shc", help="shc, shc+, sbj, ss:<s>, hc, hc+, bj, pn, pnapp")
    p.add_argument("--shape", choices=shapes, default="interval")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stat)

    p = sub.add_parser("bounds", help="detection boundaries or tail bounds as CSV")
    p.add_argument("--kind", choices=["boundary", "tail"], default="boundary")
    p.add_argument("--alpha", default="0.2")
    p.add_argument("--beta", default="0.65")
    p.add_argument("--eta", default="4,6,8,10")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--K", type=float, default=2.0)
    p.add_argument("--a", type=float, default=0.25)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    def mc_args(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--full", action="store_true", help="n=10000 with 10000 null and 2000 power replicates")
        p.add_argument("--out")

    p = sub.add_parser("critval", help="simulate null critical values")
    p.add_argument("--stats", default="shc,sbj,hc,bj")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--shape", choices=shapes, default="interval")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--level", type=float, default=0.05)
    mc_args(p)
    p.set_defaults(func=cmd_critval)

    p = sub.add_parser("power", help="power study over a grid of r")
    _model_args(p)
    p.set_defaults(n=None)
    for a in p._actions:
        if a.dest == "n":
            a.required = False
    p.add_argument("--shape", choices=shapes, default="interval")
    p.add_argument("--stats", default="shc,sbj,hc,bj")
    p.add_argument("--r-grid", default="0.1,0.2,0.3")
    p.add_argument("--r-mult", default=None, help="multiples of the optimal boundary (overrides --r-grid)")
    p.add_argument("--null-reps", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--level", type=float, default=0.05)
    mc_args(p)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("verify", help="empirical check of a tail bound")
    p.add_argument("--which", choices=["bj_iii", "loglik_ii", "bb_i", "hc_iv"], required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--eta", default="4,6,8,10")
    p.add_argument("--a", type=float, default=0.25)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--K", type=float, default=2.0)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("detect", help="test a dataset against a critical value")
    p.add_argument("input")
    p.add_argument("--stat", default="shc")
    p.add_argument("--shape", choices=shapes, default="interval")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--critval", type=float, default=None)
    p.add_argument("--critval-file", default=None)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except ResourceGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
