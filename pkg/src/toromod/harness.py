"""
Duality experiments, empirical constants and parameter sweeps.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph

from .capacity import solve_capacity, variational_check
from .complex import ToroidalComplex, as_density, build_ring, build_solid_torus, load_complex, scale_metric
from .covering import LiftedMap, lift
from .errors import ToromodError
from .modulus import DEFAULT_MAX_ITER, DEFAULT_TOL, clamp_p, conjugate
from .paths import path_modulus
from .surfaces import _sym_graph, level_cut, surface_modulus, surface_to_degree_one_map, systole

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "geometry_id", "k_theta", "n_r", "n_phi", "L", "R", "warp", "q", "p", "p_star",
    "cap", "mod_paths", "mod_surf", "product", "gap_ratio", "cap_iters",
    "cap_converged", "paths_converged", "surf_converged", "path_le_cap", "per_cut_bound", "error",
]


@dataclass
class DualityRow:
    geometry_id: str
    k_theta: object
    n_r: object
    n_phi: object
    L: object
    R: object
    warp: str
    q: float
    p: float
    p_star: float
    cap: float = math.nan
    mod_paths: float = math.nan
    mod_surf: float = math.nan
    product: float = math.nan
    gap_ratio: float = math.nan
    cap_iters: int = 0
    cap_converged: bool = False
    paths_converged: bool = False
    surf_converged: bool = False
    path_le_cap: bool = False
    per_cut_bound: bool = False
    error: str = ""
    fields: dict = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return (self.cap_converged and self.paths_converged and self.surf_converged
                and self.path_le_cap and self.per_cut_bound and not self.error)

    def recomputed_product(self) -> float:
        return duality_product(self.cap, self.mod_surf, self.p)

    def as_dict(self, with_fields: bool = False) -> dict:
        d = {k: getattr(self, k) for k in CSV_COLUMNS}
        if with_fields:
            d["fields"] = self.fields
        return d


def duality_product(cap: float, mod_surf: float, p: float) -> float:
    ps = conjugate(p)
    return cap ** (1.0 / p) * mod_surf ** (1.0 / ps)


def geometry_id(c: ToroidalComplex) -> str:
    m = c.meta
    b = m.get("builder", "custom")
    if b == "ring":
        gid = f"ring-{m['m']}-L{m['L']:g}-A{m['A']:g}"
    elif b == "solid_torus":
        gid = f"torus-{m['k_theta']}x{m['n_r']}x{m['n_phi']}-L{m['L']:g}-R{m['R']:g}-{m['warp']}"
    elif b == "ladder":
        gid = f"ladder-{m['m']}-L{m['L']:g}-A{m['A']:g}-o{m['offset']}"
    else:
        gid = f"custom-V{c.n_vertices}-E{c.n_edges}"
    if "scale" in m:
        gid += f"-s{m['scale']:g}"
    return gid


def _row_header(c: ToroidalComplex, p: float) -> dict:
    m = c.meta
    b = m.get("builder")
    if b == "solid_torus":
        dims = dict(k_theta=m["k_theta"], n_r=m["n_r"], n_phi=m["n_phi"], L=m["L"], R=m["R"], warp=m["warp"])
    elif b == "ring":
        dims = dict(k_theta=m["m"], n_r=0, n_phi=0, L=m["L"], R="", warp="")
    else:
        dims = dict(k_theta="", n_r="", n_phi="", L=m.get("L", ""), R="", warp="")
    return dict(geometry_id=geometry_id(c), q=c.q, p=p, p_star=conjugate(p), **dims)


def per_cut_bound(c: ToroidalComplex, cap_report, t: float = 0.5, eps: float = None, tol: float = 1e-8):
    """Per-cut upper bound ``cap <= sum rho_psi rho0^(p-1) mu`` for the level
    cut of the capacity minimizer at level ``t``. Returns ``(check, map)``."""
    cut = level_cut(c, cap_report.lift, t)
    if eps is None:
        eps = systole(c) / 8
    sm = surface_to_degree_one_map(c, cut, eps)
    chk = variational_check(c, cap_report, sm.density, sm.lift, tol=tol * (1 + cap_report.value))
    return chk, sm


def run_duality(c: ToroidalComplex, p: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                emit_fields: bool = False) -> DualityRow:
    """Capacity, path modulus and surface modulus (at ``p* = p/(p-1)``) on
    one complex, with the duality product and the two inequality checks.
    Solver failures become flags; a row is always returned."""
    p = clamp_p(p)
    row = DualityRow(**_row_header(c, p))
    errors = []
    cap_rep = None
    try:
        cap_rep = solve_capacity(c, p, tol=min(tol, 1e-9), raise_on_fail=False)
        row.cap, row.cap_iters, row.cap_converged = cap_rep.value, cap_rep.iterations, cap_rep.converged
    except ToromodError as exc:
        errors.append(f"cap: {exc}")
    try:
        pr = path_modulus(c, p, tol=tol, max_iter=max_iter, raise_on_fail=False)
        row.mod_paths, row.paths_converged = pr.value, pr.converged
    except ToromodError as exc:
        errors.append(f"paths: {exc}")
    try:
        sr = surface_modulus(c, conjugate(p), tol=tol, max_iter=max_iter, raise_on_fail=False)
        row.mod_surf, row.surf_converged = sr.value, sr.converged
    except ToromodError as exc:
        errors.append(f"surf: {exc}")
    if np.isfinite(row.cap) and np.isfinite(row.mod_surf):
        row.product = duality_product(row.cap, row.mod_surf, p)
    if np.isfinite(row.cap) and np.isfinite(row.mod_paths):
        row.gap_ratio = row.cap / row.mod_paths if row.mod_paths > 0 else math.inf
        row.path_le_cap = bool(row.mod_paths <= row.cap * (1 + tol) + tol)
    if cap_rep is not None:
        try:
            chk, _ = per_cut_bound(c, cap_rep)
            row.per_cut_bound = chk.ok
        except (ToromodError, ValueError) as exc:
            errors.append(f"per-cut: {exc}")
        if emit_fields:
            row.fields = {"potentials": cap_rep.potentials.tolist(), "rho0": cap_rep.rho0.tolist()}
    row.error = "; ".join(errors)
    return row


# ---------------------------------------------------------------------------
# empirical constants

@dataclass
class CoareaResult:
    lhs: float
    rhs: float
    constant: float
    bounded: bool


def coarea_check(c: ToroidalComplex, f, g, n_levels: int = 64) -> CoareaResult:
    """Riemann sum over levels of cut weights versus ``sum g |grad f| mu``.

    ``lhs = sum_k (1/n) sum_{e in cut(t_k)} g_e h_e`` at the midpoints
    ``t_k = (k + 1/2)/n``; ``rhs = sum_e g_e (|delta_e|/ell_e) mu_e``.
    """
    g = as_density(g, c)
    if not np.any(g > 0):
        raise ValueError("g must not vanish identically")
    lf = f if isinstance(f, LiftedMap) else lift(c, f)
    lhs = 0.0
    for k in range(n_levels):
        cut = level_cut(c, lf, (k + 0.5) / n_levels)
        lhs += cut.weight(c, g) / n_levels
    t = lf.base[c.edge_v] - lf.base[c.edge_u] + lf.deg * c.w
    rhs = float(np.sum(g * np.abs(t) / c.ell * c.mu_e))
    if rhs == 0:
        return CoareaResult(lhs, rhs, math.inf if lhs > 0 else 0.0, lhs == 0)
    return CoareaResult(lhs, rhs, lhs / rhs, True)


def _vertex_distances(c: ToroidalComplex, sources):
    G = _sym_graph(c.n_vertices, c.edge_u, c.edge_v, c.ell)
    return csgraph.dijkstra(G, directed=False, indices=sources)


@dataclass
class IsoperimetricResult:
    ratio: float
    n_balls: int
    n_used: int


def isoperimetric_check(c: ToroidalComplex, f, sample_balls: int = 200, t: float = 0.5,
                        lam: float = 2.0, seed: int = 0, radii=(1 / 8, 1 / 4)) -> IsoperimetricResult:
    """Largest sampled ratio of the relative isoperimetric inequality

        min(mu(B & U+), mu(B & U-)) / mu(B)  <=  C (r / mu(lam B)) H(S & lam B)

    over graph-metric balls ``B`` centred at endpoints of the level cut ``S``
    of ``f`` at level ``t``. An edge lies in a ball when both endpoints do.
    ``U+`` and ``U-`` are the non-cut edges whose midpoint level relative to
    ``t`` lies in (0, 1/2) and (-1/2, 0]. Radii are drawn uniformly from
    ``radii`` times the systole, so the sample is mesh independent. Balls
    with an empty side contribute 0.
    """
    lf = f if isinstance(f, LiftedMap) else lift(c, f)
    cut = level_cut(c, lf, t)
    x = lf.base
    inc = x[c.edge_v] - x[c.edge_u] + lf.deg * c.w
    se = np.mod(x[c.edge_u] + 0.5 * inc - float(t) + 0.5, 1.0) - 0.5
    on_cut = np.zeros(c.n_edges, dtype=bool)
    on_cut[cut.edges] = True
    up = (~on_cut) & (se > 0)
    down = (~on_cut) & (se <= 0)
    rng = np.random.default_rng(seed)
    ends = np.unique(np.concatenate([c.edge_u[cut.edges], c.edge_v[cut.edges]]))
    centres = rng.choice(ends, size=sample_balls, replace=True)
    rs = systole(c) * rng.uniform(radii[0], radii[1], size=sample_balls)
    uniq = np.unique(centres)
    D = _vertex_distances(c, uniq)
    row_of = {v: i for i, v in enumerate(uniq)}
    best = 0.0
    used = 0
    for v, r in zip(centres, rs):
        d = D[row_of[v]]
        inB = (d[c.edge_u] <= r) & (d[c.edge_v] <= r)
        inL = (d[c.edge_u] <= lam * r) & (d[c.edge_v] <= lam * r)
        muB = float(c.mu_e[inB].sum())
        if muB <= 0:
            continue
        used += 1
        small = min(c.mu_e[inB & up].sum(), c.mu_e[inB & down].sum()) / muB
        if small == 0:
            continue
        rhs = r / float(c.mu_e[inL].sum()) * float(c.h[inL & on_cut].sum())
        best = max(best, math.inf if rhs == 0 else small / rhs)
    return IsoperimetricResult(best, sample_balls, used)


# ---------------------------------------------------------------------------
# geometry specs and sweeps

def build_geometry(spec: dict) -> ToroidalComplex:
    """Complex from a geometry spec: ``{"builder": "ring", "m", "L", "A"}``,
    ``{"builder": "torus", "k_theta", "n_r", "n_phi", "L", "R", "warp"}`` or
    ``{"builder": "file", "path"}``; optional ``q`` and ``scale``."""
    spec = dict(spec)
    b = spec.pop("builder", None)
    scale = spec.pop("scale", None)
    q = spec.pop("q", 3.0)
    if b == "ring":
        c = build_ring(int(spec["m"]), float(spec.get("L", 1.0)), float(spec.get("A", 1.0)), q=q)
    elif b in ("torus", "solid_torus"):
        c = build_solid_torus(int(spec["k_theta"]), int(spec["n_r"]), int(spec["n_phi"]),
                              L=float(spec.get("L", 1.0)), R=float(spec.get("R", 1.0)),
                              warp=spec.get("warp", "flat"), q=q,
                              **({"transverse_share": float(spec["transverse_share"])}
                                 if "transverse_share" in spec else {}))
    elif b == "file":
        c = load_complex(spec["path"])
    else:
        raise ValueError(f"unknown geometry builder {b!r}")
    if scale is not None:
        c = scale_metric(c, float(scale))
    return c


def expand_config(config: dict) -> list:
    """Ordered list of ``(geometry spec, p)`` tasks for a sweep config.

    Keys: ``geometries`` (list of specs), ``p`` (list), optional
    ``refine`` (list of k_theta values applied to every torus spec),
    ``warps`` (list of presets applied to every torus spec), ``scales``.
    """
    geoms = []
    for g in config.get("geometries", []):
        variants = [dict(g)]
        if g.get("builder") in ("torus", "solid_torus"):
            if "refine" in config:
                variants = [dict(v, k_theta=k) for v in variants for k in config["refine"]]
            if "warps" in config:
                variants = [dict(v, warp=w) for v in variants for w in config["warps"]]
        if "scales" in config:
            variants = [dict(v, scale=s) for v in variants for s in config["scales"]]
        geoms.extend(variants)
    ps = config.get("p", [2.0])
    return [(g, float(p)) for g in geoms for p in ps]


def _run_task(args):
    spec, p, tol, max_iter, emit = args
    try:
        c = build_geometry(spec)
    except (ToromodError, ValueError, KeyError, OSError) as exc:
        row = DualityRow(geometry_id=json.dumps(spec, sort_keys=True), k_theta="", n_r="", n_phi="",
                         L="", R="", warp="", q=math.nan, p=p, p_star=conjugate(p))
        row.error = f"geometry: {exc}"
        return row
    return run_duality(c, p, tol=tol, max_iter=max_iter, emit_fields=emit)


def sweep(config: dict, jobs: int = 1) -> list:
    """Run every (geometry, p) task of ``config``; rows keep config order
    regardless of completion order."""
    tol = float(config.get("tol", DEFAULT_TOL))
    max_iter = int(config.get("max_iter", DEFAULT_MAX_ITER))
    emit = bool(config.get("emit_fields", False))
    tasks = [(g, p, tol, max_iter, emit) for g, p in expand_config(config)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]


# ---------------------------------------------------------------------------
# output

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(rows, sink=None) -> str:
    """Rows as CSV text (also written to ``sink`` when given)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        d = r.as_dict()
        w.writerow([_fmt(d[k]) for k in CSV_COLUMNS])
    text = buf.getvalue()
    _emit(text, sink)
    return text


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(rows, sink=None, header: dict = None, with_fields: bool = False) -> str:
    doc = {"header": header or {}, "rows": [
        {k: _jsonable(v) for k, v in r.as_dict(with_fields).items()} for r in rows]}
    text = json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n"
    _emit(text, sink)
    return text


def _emit(text, sink):
    if sink is None:
        return
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", newline="") as fh:
            fh.write(text)
