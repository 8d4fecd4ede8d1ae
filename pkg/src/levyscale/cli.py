"""Command line front end (``levyscale``).

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .dividends import cgmy_sweep, _jsonable
from .errors import NumericalError, ValidationError
from .harness import RunConfig, _write_json, diagnostics, reproduce, run
from .models import CgmyTarget
from .roots import root_system
from .scale import TruncationBounds, export_csv, scale_functions


def _grid(text: str) -> tuple:
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("grid must look like a:b:step") from exc
    return a, b, step


def _load_config(args) -> RunConfig:
    if not args.config:
        raise ValidationError("--config is required for this command")
    cfg = RunConfig.from_json(args.config)
    if args.m is not None:
        cfg.m = args.m
    if args.tol is not None:
        cfg.tol = args.tol
    if args.grid is not None:
        cfg.grid = args.grid
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg.validate()


def _print(obj) -> None:
    print(json.dumps(_jsonable(obj), indent=2, sort_keys=True))


def cmd_scale(args) -> None:
    cfg = _load_config(args)
    cfg.solver = None
    m = run(cfg)
    _print({k: m[k] for k in ("zeta", "status", "laplace_worst_error", "identity_residual", "files")})


def cmd_roots(args) -> None:
    cfg = _load_config(args)
    rs = root_system(cfg.model, cfg.q, m=cfg.m, tol=cfg.tol)
    d = rs.to_dict()
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _write_json(Path(args.out) / "roots.json", d)
    _print({"zeta": d["zeta"], "n_roots": len(d["xis"]), "interlaced": d["interlaced"],
            "count_relation_ok": d["count_relation_ok"], "max_residual": max(d["residuals"], default=0.0)})


def cmd_solve(args) -> None:
    cfg = _load_config(args)
    cfg.solver = args.problem
    for key in ("phi", "S", "K", "delta"):
        val = getattr(args, key)
        if val is not None:
            cfg.params[key] = val
    if args.problem == "impulse" and "delta" not in cfg.params:
        raise ValidationError("impulse needs --delta (or params.delta in the config)")
    m = run(cfg)
    _print({"status": m["status"], **m["solver"]})


def cmd_bounds(args) -> None:
    cfg = _load_config(args)
    obj = scale_functions(cfg.model, cfg.q, m=cfg.m, tol=cfg.tol)
    if not isinstance(obj, TruncationBounds):
        raise ValidationError("bounds apply to beta-family models only")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_csv(obj, out / "bounds.csv", cfg.grid_points())
    diag = diagnostics(obj, cfg.model, cfg.q)
    _write_json(out / "manifest.json", {"config": cfg.to_dict(), **diag})
    _print({k: diag[k] for k in ("zeta", "delta_m", "epsilon_m", "status")})


def cmd_cgmy(args) -> None:
    betas = [float(b) for b in args.betas.split(",")]
    grid = None
    if args.grid is not None:
        a, b, step = args.grid
        grid = a + step * np.arange(int(np.floor((b - a) / step + 1e-9)) + 1)
    rep = cgmy_sweep(CgmyTarget(args.c_tilde, args.alpha_tilde, args.shape), args.sigma, args.drift, args.q,
                     betas, m=args.m or 150, grid=grid, tol=args.tol or 1e-10)
    summary = {k: rep[k] for k in ("u_sup_diffs", "W_sup_diffs", "u_diffs_decreasing", "W_sign_changes")}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _write_json(Path(args.out) / "cgmy_sweep.json", summary)
    _print(summary)


def cmd_reproduce(args) -> None:
    s = reproduce(args.section, args.out or f"reproduce_{args.section}")
    if args.section == "5.1":
        _print({"matched": s["matched"], "compared": s["compared"],
                "reconciliation_matched": s["reconciliation"]["matched"], "files": s["files"]})
    else:
        _print({"cgmy": s["cgmy"], "files": s["files"]})


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--out", help="output directory")
    common.add_argument("--m", type=int, help="truncation depth for beta-family models")
    common.add_argument("--tol", type=float, help="root tolerance")
    common.add_argument("--grid", type=_grid, help="evaluation grid a:b:step")

    p = argparse.ArgumentParser(prog="levyscale", description="Scale functions and optimal dividends")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("scale", parents=[common], help="write scale functions on a grid").set_defaults(fn=cmd_scale)
    sub.add_parser("roots", parents=[common], help="solve psi(s) = q").set_defaults(fn=cmd_roots)

    sp = sub.add_parser("solve", parents=[common], help="solve a dividend problem")
    sp.add_argument("problem", choices=["classic", "bailout", "terminal", "impulse"])
    sp.add_argument("--phi", type=float)
    sp.add_argument("--S", type=float)
    sp.add_argument("--K", type=float)
    sp.add_argument("--delta", type=float)
    sp.set_defaults(fn=cmd_solve)

    sub.add_parser("bounds", parents=[common], help="truncation bounds (beta family)").set_defaults(fn=cmd_bounds)

    cp = sub.add_parser("cgmy-sweep", parents=[common], help="beta-family approximation of a CGMY model")
    cp.add_argument("--c-tilde", type=float, default=0.1)
    cp.add_argument("--alpha-tilde", type=float, default=3.0)
    cp.add_argument("--shape", type=float, default=1.5)
    cp.add_argument("--sigma", type=float, default=0.2)
    cp.add_argument("--drift", type=float, default=0.1)
    cp.add_argument("--q", type=float, default=0.03)
    cp.add_argument("--betas", default="1,0.5,0.25,0.125")
    cp.set_defaults(fn=cmd_cgmy)

    rp = sub.add_parser("reproduce", parents=[common], help="regenerate figure data")
    rp.add_argument("section", help="5.1 or 5.2")
    rp.set_defaults(fn=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
