"""Command-line front end.

Exit codes: 0 success, 1 solver non-convergence or failed check, 2 input
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from . import __version__
from .capacity import solve_capacity
from .complex import build_ring, load_complex, save_complex, validate
from .errors import InvalidComplexError, NoAdmissibleError, NotConvergedError, ToromodError
from .harness import build_geometry, run_duality, sweep, write_csv, write_json
from .modulus import DEFAULT_MAX_ITER, DEFAULT_TOL, conjugate
from .paths import path_modulus
from .surfaces import surface_modulus

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

# documented defaults of every run-config field
DEFAULTS = {
    "command": None,
    "geometry": None,
    "p": [2.0],
    "tol": DEFAULT_TOL,
    "max_iter": DEFAULT_MAX_ITER,
    "out": None,
    "format": "csv",
    "jobs": 1,
    "seed": 0,
    "emit_fields": False,
}


class InputError(Exception):
    pass


def _setup_logging():
    name = os.environ.get("TOROMOD_LOG", "error").strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.ERROR, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        logging.getLogger("toromod").warning("unknown TOROMOD_LOG value %r, using 'error'", name)


def _geometry_args(p):
    g = p.add_argument_group("geometry")
    x = g.add_mutually_exclusive_group()
    x.add_argument("--ring", type=int, metavar="M", help="ring with M edges")
    x.add_argument("--torus", type=int, nargs=3, metavar=("K_THETA", "N_R", "N_PHI"),
                   help="structured solid-torus mesh")
    x.add_argument("--complex", metavar="PATH", help="complex JSON file")
    g.add_argument("--L", type=float, help="core length (default 1)")
    g.add_argument("--A", type=float, help="ring cross-section measure (default 1)")
    g.add_argument("--R", type=float, help="disk radius (default 1)")
    g.add_argument("--warp", help="flat | sin:b | radial:b | twist:b (default flat)")
    g.add_argument("--q", type=float, help="dimension exponent (default 3)")
    g.add_argument("--scale", type=float, help="rescale the metric by this factor")


def _solver_args(p, exponents=True):
    s = p.add_argument_group("solver")
    if exponents:
        s.add_argument("--p", type=float, action="append", help="exponent (repeatable, default 2)")
    s.add_argument("--tol", type=float, help=f"tolerance (default {DEFAULT_TOL:g})")
    s.add_argument("--max-iter", dest="max_iter", type=int, help=f"iteration cap (default {DEFAULT_MAX_ITER})")
    s.add_argument("--seed", type=int, help="seed for randomized checks (default 0)")


def _output_args(p):
    o = p.add_argument_group("output")
    o.add_argument("--out", help="output path (default stdout)")
    o.add_argument("--format", choices=["csv", "json"], help="report format (default csv)")
    o.add_argument("--jobs", type=int, help="parallel workers (default 1)")
    o.add_argument("--emit-fields", dest="emit_fields", action="store_true", default=None,
                   help="embed minimizer and density in JSON reports")
    o.add_argument("--config", help="JSON run config; flags override it")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toromod", description="Capacity and modulus duality on toroidal complexes.")
    ap.add_argument("--version", action="version", version=f"toromod {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("mesh", help="build a complex and save it as JSON")
    _geometry_args(p)
    p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("validate", help="check the invariants of a complex")
    _geometry_args(p)

    for name, hlp in [("cap", "degree-1 p-capacity"), ("modpaths", "p-modulus of winding cycles"),
                      ("modsurf", "modulus of separating cuts at the given exponent")]:
        p = sub.add_parser(name, help=hlp)
        _geometry_args(p)
        _solver_args(p)
        _output_args(p)

    p = sub.add_parser("duality", help="capacity, both moduli and the duality product")
    _geometry_args(p)
    _solver_args(p)
    _output_args(p)

    p = sub.add_parser("sweep", help="run a sweep config")
    _solver_args(p)
    _output_args(p)

    p = sub.add_parser("selftest", help="ring closed-form checks")
    p.add_argument("--tol", type=float, default=1e-6, help="relative tolerance (default 1e-6)")
    return ap


def resolve_config(args) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise InputError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(DEFAULTS) - {"geometries", "refine", "warps", "scales"}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for k in ("tol", "max_iter", "out", "format", "jobs", "seed", "emit_fields"):
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if getattr(args, "p", None):
        cfg["p"] = list(args.p)
    geom = _geometry_spec(args)
    if geom is not None:
        cfg["geometry"] = geom
    cfg["command"] = args.command
    if not isinstance(cfg["p"], list):
        cfg["p"] = [cfg["p"]]
    try:
        cfg["p"] = [float(x) for x in cfg["p"]]
        cfg["tol"] = float(cfg["tol"])
        cfg["max_iter"] = int(cfg["max_iter"])
        cfg["jobs"] = int(cfg["jobs"])
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad config value: {exc}") from exc
    if any(not (x > 1) for x in cfg["p"]):
        raise InputError("exponents must exceed 1")
    if cfg["tol"] <= 0 or cfg["max_iter"] < 1 or cfg["jobs"] < 1:
        raise InputError("tol, max-iter and jobs must be positive")
    if cfg["format"] not in ("csv", "json"):
        raise InputError("format must be csv or json")
    return cfg


def _geometry_spec(args):
    opt = {k: getattr(args, k, None) for k in ("L", "A", "R", "warp", "q", "scale")}
    opt = {k: v for k, v in opt.items() if v is not None}
    if getattr(args, "ring", None) is not None:
        spec = {"builder": "ring", "m": args.ring, "L": opt.pop("L", 1.0), "A": opt.pop("A", 1.0)}
    elif getattr(args, "torus", None) is not None:
        k, nr, nphi = args.torus
        spec = {"builder": "torus", "k_theta": k, "n_r": nr, "n_phi": nphi, "L": opt.pop("L", 1.0),
                "R": opt.pop("R", 1.0), "warp": opt.pop("warp", "flat")}
    elif getattr(args, "complex", None) is not None:
        spec = {"builder": "file", "path": args.complex}
    else:
        return None
    for k in ("q", "scale"):
        if k in opt:
            spec[k] = opt[k]
    return spec


def _complex_from(cfg, check=True):
    spec = cfg.get("geometry")
    if spec is None:
        raise InputError("no geometry given (use --ring, --torus or --complex)")
    try:
        if spec.get("builder") == "file" and not check:
            return load_complex(spec["path"], check=False)
        return build_geometry(spec)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {exc.filename}") from exc
    except (InvalidComplexError, ValueError, KeyError, OSError) as exc:
        raise InputError(str(exc)) from exc


def _write(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(rows, cfg):
    if cfg["format"] == "json":
        return write_json(rows, header=cfg, with_fields=bool(cfg["emit_fields"]))
    return write_csv(rows)


def _solver_table(kind, c, cfg):
    from .harness import geometry_id
    lines = []
    ok = True
    header = ["geometry_id", "p", "value", "iterations", "converged"]
    records = []
    for p in cfg["p"]:
        try:
            if kind == "cap":
                r = solve_capacity(c, p, tol=min(cfg["tol"], 1e-8), max_iter=max(cfg["max_iter"], 1),
                                   raise_on_fail=False)
                rec = [geometry_id(c), p, r.value, r.iterations, r.converged]
            elif kind == "modpaths":
                r = path_modulus(c, p, tol=cfg["tol"], max_iter=cfg["max_iter"], raise_on_fail=False)
                rec = [geometry_id(c), p, r.value, r.iterations, r.converged]
            else:
                r = surface_modulus(c, p, tol=cfg["tol"], max_iter=cfg["max_iter"], raise_on_fail=False)
                rec = [geometry_id(c), p, r.value, r.iterations, r.converged]
        except NoAdmissibleError as exc:
            rec = [geometry_id(c), p, "inf", 0, False]
            logging.getLogger("toromod").error("%s", exc)
        ok &= bool(rec[-1])
        records.append(rec)
    if cfg["format"] == "json":
        text = json.dumps({"header": cfg, "rows": [dict(zip(header, r)) for r in records]}, indent=1) + "\n"
    else:
        lines.append(",".join(header))
        for r in records:
            lines.append(",".join(repr(float(v)) if isinstance(v, float) else
                                  ("true" if v is True else "false" if v is False else str(v)) for v in r))
        text = "\n".join(lines) + "\n"
    return text, ok


def selftest(tol: float = 1e-6, out=None) -> bool:
    """Ring closed forms: cap = A L^(1-p), surf = L A^(1-p*), product = 1."""
    out = sys.stdout if out is None else out
    all_ok = True
    t0 = time.perf_counter()
    for m in (3, 4, 8):
        for L in (1.0, 2.0):
            for A in (1.0, 3.0):
                for p in (1.5, 2.0, 3.0):
                    c = build_ring(m, L, A)
                    row = run_duality(c, p, tol=1e-9)
                    ps = conjugate(p)
                    errs = (abs(row.cap / (A * L ** (1 - p)) - 1),
                            abs(row.mod_surf / (L * A ** (1 - ps)) - 1),
                            abs(row.product - 1))
                    ok = max(errs) <= tol and row.ok
                    all_ok &= ok
                    print(f"{'PASS' if ok else 'FAIL'} ring m={m} L={L:g} A={A:g} p={p:g} "
                          f"max_rel_err={max(errs):.2e}", file=out)
    print(f"selftest {'passed' if all_ok else 'FAILED'} in {time.perf_counter() - t0:.2f}s", file=out)
    return all_ok


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if args.command == "selftest":
            return 0 if selftest(args.tol) else 1
        cfg = resolve_config(args)
        if args.command == "mesh":
            c = _complex_from(cfg)
            if cfg["out"]:
                save_complex(c, cfg["out"])
            else:
                save_complex(c, sys.stdout)
                sys.stdout.write("\n")
            return 0
        if args.command == "validate":
            c = _complex_from(cfg, check=False)
            rep = validate(c)
            print(f"{c.describe()}: {rep}")
            return 0 if rep.ok else 2
        if args.command in ("cap", "modpaths", "modsurf"):
            c = _complex_from(cfg)
            text, ok = _solver_table(args.command, c, cfg)
            _write(text, cfg["out"])
            return 0 if ok else 1
        if args.command == "duality":
            c = _complex_from(cfg)
            rows = [run_duality(c, p, tol=cfg["tol"], max_iter=cfg["max_iter"],
                                emit_fields=bool(cfg["emit_fields"])) for p in cfg["p"]]
            _write(_report(rows, cfg), cfg["out"])
            return 0 if all(r.ok for r in rows) else 1
        if args.command == "sweep":
            if not args.config:
                raise InputError("sweep needs --config")
            sweep_cfg = dict(cfg)
            if "geometries" not in sweep_cfg:
                raise InputError("sweep config needs a 'geometries' list")
            rows = sweep(sweep_cfg, jobs=cfg["jobs"])
            _write(_report(rows, cfg), cfg["out"])
            return 0 if all(r.ok for r in rows) else 1
    except InputError as exc:
        print(f"toromod: error: {exc}", file=sys.stderr)
        return 2
    except NotConvergedError as exc:
        print(f"toromod: {exc}", file=sys.stderr)
        return 1
    except ToromodError as exc:
        print(f"toromod: error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
