"""
Separating-surface family
=========================

Surfaces are edge cuts that meet every closed walk of winding 1. A cut is
described by integer sheet labels ``k`` on the vertices: the edge ``u -> v``
is cut ``|d_e|`` times where ``d_e = w_e - (k_v - k_u)``. Every labelling
gives a separating cut and every minimal separating cut arises this way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import csgraph

from .complex import ToroidalComplex, as_density, sheet_labels
from .covering import CircleMap, LiftedMap, degree, lift, lifted_increments, raw_increments
from .errors import DegreeError, EpsTooLargeError, NotSeparatingError
from .modulus import DEFAULT_MAX_ITER, DEFAULT_TOL, Member, SolveReport, solve_modulus

LEVEL_SHIFT = 1e-9


@dataclass(frozen=True, eq=False)
class SeparatingCut:
    """Edge set meeting every winding-1 walk.

    ``labels`` (optional) are sheet labels realizing the cut; ``mult`` is the
    number of times each support edge is crossed (1 for minimal cuts).
    """

    edges: np.ndarray
    labels: np.ndarray = None
    mult: np.ndarray = None

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1)
        order = np.argsort(e, kind="stable")
        e = e[order]
        object.__setattr__(self, "edges", e)
        m = np.ones(e.shape[0]) if self.mult is None else np.asarray(self.mult, dtype=float)[order]
        object.__setattr__(self, "mult", m)
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))

    def H_weight(self, c: ToroidalComplex) -> float:
        return float(np.sum(c.h[self.edges] * self.mult))

    def weight(self, c: ToroidalComplex, g) -> float:
        return float(np.sum(np.asarray(g)[self.edges] * c.h[self.edges] * self.mult))

    def member(self, c: ToroidalComplex) -> Member:
        return Member(self.edges, c.h[self.edges] * self.mult, payload=self)

    @classmethod
    def from_labels(cls, c: ToroidalComplex, k) -> "SeparatingCut":
        k = np.asarray(k, dtype=np.int64)
        d = c.w - (k[c.edge_v] - k[c.edge_u])
        sup = np.flatnonzero(d)
        return cls(sup, k, np.abs(d[sup]).astype(float))


def label_defects(c: ToroidalComplex, k) -> np.ndarray:
    """``d_e = w_e - (k_v - k_u)`` for sheet labels ``k``."""
    k = np.asarray(k, dtype=np.int64)
    return c.w - (k[c.edge_v] - k[c.edge_u])


def is_separating(c: ToroidalComplex, edges) -> bool:
    """True when every closed walk of winding 1 uses an edge of ``edges``."""
    _, comp, conflicts = sheet_labels(c, removed=edges)
    g_by_comp: dict = {}
    for e, dfct in conflicts:
        ci = int(comp[c.edge_u[e]])
        g_by_comp[ci] = math.gcd(g_by_comp.get(ci, 0), abs(dfct))
    return all(g != 1 for g in g_by_comp.values())


# ---------------------------------------------------------------------------
# min cut

def min_cut_labels(c: ToroidalComplex, cap) -> np.ndarray:
    """Integer labels minimizing ``sum cap_e |w_e - (k_v - k_u)|``, with
    ``k[0] = 0``.

    The constraint matrix of this problem is a network matrix, so a simplex
    vertex of its linear relaxation is integral.
    """
    cap = np.asarray(cap, dtype=float)
    V, E = c.n_vertices, c.n_edges
    # variables: x (V), s_plus (E), s_minus (E); (x_v - x_u) + s+ - s- = w
    rows = np.concatenate([np.arange(E)] * 4)
    cols = np.concatenate([c.edge_v, c.edge_u, V + np.arange(E), V + E + np.arange(E)])
    vals = np.concatenate([np.ones(E), -np.ones(E), np.ones(E), -np.ones(E)])
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(E, V + 2 * E))
    cost = np.concatenate([np.zeros(V), cap, cap])
    bounds = [(0, 0)] + [(None, None)] * (V - 1) + [(0, None)] * (2 * E)
    res = optimize.linprog(cost, A_eq=A, b_eq=c.w.astype(float), bounds=bounds, method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"min-cut linear program failed: {res.message}")
    x = res.x[:V]
    k = np.rint(x).astype(np.int64)
    if np.max(np.abs(x - k)) > 1e-6:
        raise RuntimeError("min-cut linear program returned a fractional vertex")
    return k - k[0]


class WindingCutOracle:
    """Lightest separating cut under a density ``g`` (weights ``g h``)."""

    can_enumerate = True

    def __init__(self, c: ToroidalComplex, max_enumerate_edges: int = 20):
        self.complex = c
        self.max_enumerate_edges = max_enumerate_edges

    def cut(self, g) -> SeparatingCut:
        c = self.complex
        g = as_density(g, c)
        return SeparatingCut.from_labels(c, min_cut_labels(c, g * c.h))

    def query(self, g):
        cut = self.cut(g)
        m = cut.member(self.complex)
        return m, m.mass(np.asarray(g, dtype=float))

    def __call__(self, g):
        m, weight = self.query(g)
        return m.payload, weight

    def enumerate(self) -> list:
        return [s.member(self.complex)
                for s in enumerate_separating_cuts(self.complex, self.max_enumerate_edges)]


def winding_cut_oracle(c: ToroidalComplex, g) -> tuple:
    """``(SeparatingCut, weight)`` minimizing ``sum g * h`` over cuts."""
    return WindingCutOracle(c)(g)


def enumerate_separating_cuts(c: ToroidalComplex, max_edges: int = 20) -> list:
    """All inclusion-minimal separating edge sets (tiny complexes only)."""
    from .paths import enumerate_winding_cycles

    E = c.n_edges
    if E > max_edges:
        raise ValueError(f"cut enumeration is limited to {max_edges} edges")
    cycles = enumerate_winding_cycles(c, max_edges)
    masks = np.array([sum(1 << e for e, _ in cyc) for cyc in cycles], dtype=np.int64)
    subsets = np.arange(1 << E, dtype=np.int64)
    hits = np.ones(subsets.shape[0], dtype=bool)
    for m in masks:
        hits &= (subsets & m) != 0
    blockers = subsets[hits]
    blocker_set = set(blockers.tolist())
    out = []
    for s in blockers.tolist():
        minimal = True
        t = s
        while t:
            bit = t & -t
            t ^= bit
            if (s ^ bit) in blocker_set:
                minimal = False
                break
        if minimal:
            out.append(SeparatingCut([e for e in range(E) if s >> e & 1]))
    return out


def level_cut_family(c: ToroidalComplex, f) -> list:
    """Every distinct level cut of a degree-1 map (one per gap between
    consecutive vertex values mod 1)."""
    g = f if isinstance(f, LiftedMap) else lift(c, f)
    vals = np.unique(np.mod(g.base, 1.0))
    gaps = np.concatenate([vals[1:], [vals[0] + 1.0]])
    mids = np.mod(0.5 * (vals + gaps), 1.0)
    out, seen = [], set()
    for t in mids:
        cut = level_cut(c, g, t)
        key = tuple(cut.edges.tolist())
        if key not in seen:
            seen.add(key)
            out.append(cut)
    return out


def surface_modulus(c: ToroidalComplex, p_star: float, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, warm_start: bool = True,
                    **kw) -> SolveReport:
    """p*-modulus of the separating-cut family with coefficients ``h``.

    With ``warm_start`` the constraint set is seeded with the level cuts of
    the capacity minimizer at the conjugate exponent, which are the cuts
    carrying the optimal multipliers; convergence is still certified by the
    min-cut oracle.
    """
    from .capacity import solve_capacity
    from .modulus import clamp_p, conjugate

    seeds = ()
    if warm_start:
        q = clamp_p(p_star)
        rep = solve_capacity(c, conjugate(q), tol=1e-10, raise_on_fail=False)
        seeds = [s.member(c) for s in level_cut_family(c, rep.lift)]
    return solve_modulus(c, WindingCutOracle(c), p_star, tol=tol, max_iter=max_iter,
                         seed_members=seeds, **kw)


# ---------------------------------------------------------------------------
# level cuts

def level_cut(c: ToroidalComplex, f, t: float) -> SeparatingCut:
    """Edges whose increment interval crosses the level ``t`` of a degree-1
    circle map. ``t`` is nudged off vertex values when needed."""
    g = f if isinstance(f, LiftedMap) else lift(c, f)
    if g.deg != 1:
        raise DegreeError(f"level cuts need a degree-1 map, got degree {g.deg}")
    x = g.base
    t = float(t) % 1.0
    for _ in range(100):
        frac = np.mod(x - t, 1.0)
        if not np.any(np.minimum(frac, 1.0 - frac) < 1e-12):
            break
        t = (t + LEVEL_SHIFT) % 1.0
    k = -np.floor(x - t).astype(np.int64)
    return SeparatingCut.from_labels(c, k)


# ---------------------------------------------------------------------------
# surface -> degree-1 map

@dataclass
class SurfaceMap:
    """Degree-1 map built from a separating cut."""

    psi: CircleMap
    lift: LiftedMap
    density: np.ndarray
    neighbourhood: np.ndarray
    cut: SeparatingCut
    crossing_distance: float
    info: dict = field(default_factory=dict)


# stands in for zero length; csgraph drops explicit zeros
TINY_LENGTH = 1e-300


def _sym_graph(n: int, u, v, w) -> sparse.csr_matrix:
    """Undirected graph keeping the shortest of any parallel edges.

    A plain sparse constructor would sum duplicate entries.
    """
    a = np.minimum(u, v).astype(np.int64)
    b = np.maximum(u, v).astype(np.int64)
    w = np.maximum(np.asarray(w, dtype=float), TINY_LENGTH)
    key = a * n + b
    order = np.lexsort((w, key))
    key, w = key[order], w[order]
    first = np.concatenate([[True], key[1:] != key[:-1]]) if key.size else key.astype(bool)
    key, w = key[first], w[first]
    a, b = key // n, key % n
    return sparse.csr_matrix((np.concatenate([w, w]), (np.concatenate([a, b]), np.concatenate([b, a]))),
                             shape=(n, n))


def _graph_distances(c: ToroidalComplex, sources, weights):
    G = _sym_graph(c.n_vertices, c.edge_u, c.edge_v, weights)
    d = csgraph.dijkstra(G, directed=False, indices=np.asarray(sources, dtype=np.int64), min_only=True)
    return d


def systole(c: ToroidalComplex) -> float:
    """Length of the shortest closed walk of winding 1."""
    from .paths import WindingCycleOracle
    _, w = WindingCycleOracle(c).query(np.ones(c.n_edges))
    return w


def cut_labels(c: ToroidalComplex, S) -> SeparatingCut:
    """Labelled cut contained in the edge set ``S``.

    Raises NotSeparatingError when ``S`` misses some winding-1 walk.
    """
    if isinstance(S, SeparatingCut) and S.labels is not None:
        d = label_defects(c, S.labels)
        if np.any(np.abs(d) > 1):
            raise NotSeparatingError("cut labels cross an edge more than once")
        return SeparatingCut.from_labels(c, S.labels)
    edges = np.asarray(S.edges if isinstance(S, SeparatingCut) else S, dtype=np.int64)
    if not is_separating(c, edges):
        raise NotSeparatingError("edge set misses a winding-1 cycle")
    cap = np.full(c.n_edges, float(c.n_edges + 1))
    cap[edges] = 1.0
    k = min_cut_labels(c, cap)
    d = label_defects(c, k)
    on = np.flatnonzero(d)
    if not np.all(np.isin(on, edges)) or np.any(np.abs(d) > 1):
        raise NotSeparatingError("no sheet labelling is cut only inside the edge set")
    return SeparatingCut.from_labels(c, k)


def surface_to_degree_one_map(c: ToroidalComplex, S, eps: float) -> SurfaceMap:
    """Degree-1 map whose upper gradient is supported near a separating cut.

    Let ``N`` be the cut edges together with the edges whose endpoints both
    lie at distance less than ``eps`` from the cut vertices. With ``D`` the
    distance from the low side of the cut measured through ``N`` and
    ``d_min`` its least value on the high side and off ``N``, the map is
    ``phi = min(1, D / d_min)`` on the cut-open complex, and
    ``rho = 1 / d_min`` on ``N``.
    """
    if not (eps > 0):
        raise ValueError("eps must be positive")
    cut = cut_labels(c, S)
    if eps >= systole(c) / 2:
        raise EpsTooLargeError("eps-neighbourhood of the cut reaches its own translate")
    k = cut.labels
    d = label_defects(c, k)
    Sidx = np.flatnonzero(d)
    given = np.asarray(S.edges if isinstance(S, SeparatingCut) else S, dtype=np.int64)
    Svert = np.unique(np.concatenate([c.edge_u[given], c.edge_v[given]]))
    dist = _graph_distances(c, Svert, c.ell)
    nbhd = np.zeros(c.n_edges, dtype=bool)
    nbhd[given] = True
    nbhd |= (dist[c.edge_u] < eps) & (dist[c.edge_v] < eps)
    N = np.flatnonzero(nbhd)

    # low/high ends of cut edges: phi ~ 0 at the low end, 1 at the high end
    low = np.where(d[Sidx] > 0, c.edge_v[Sidx], c.edge_u[Sidx])
    high = np.where(d[Sidx] > 0, c.edge_u[Sidx], c.edge_v[Sidx])
    V = c.n_vertices
    X = V
    intact = d == 0
    wts = np.where(nbhd, c.ell, 0.0)[intact]
    hu = np.concatenate([c.edge_u[intact], np.full(Sidx.size, X)])
    hv = np.concatenate([c.edge_v[intact], low])
    hw = np.concatenate([wts, c.ell[Sidx]])
    H = _sym_graph(V + 1, hu, hv, hw)
    D = csgraph.dijkstra(H, directed=False, indices=X)[:V]
    touched = np.zeros(V, dtype=bool)
    touched[c.edge_u[N]] = True
    touched[c.edge_v[N]] = True
    T = np.zeros(V, dtype=bool)
    T[high] = True
    T |= ~touched
    d_min = float(D[T].min())
    if not (np.isfinite(d_min) and d_min > 0):
        raise EpsTooLargeError("cut-open neighbourhood does not separate the two sides of the cut")
    phi = np.minimum(1.0, D / d_min)
    rho = np.where(nbhd, 1.0 / d_min, 0.0)
    base = phi - k
    g = LiftedMap(base - np.floor(base[0]), 1, 2)
    t = lifted_increments(c, g)
    if np.any(np.abs(t) > rho * c.ell * (1 + 1e-12) + 1e-15):
        raise EpsTooLargeError("constructed density is not an upper gradient")
    psi = CircleMap.from_reals(g.base)
    info = {"holonomy": 1}
    inc = raw_increments(c, psi)
    if np.all(np.abs(np.abs(inc) - 0.5) > 1e-12) and np.allclose(inc, t, atol=1e-12):
        info["degree"] = degree(c, psi)
        if info["degree"] != 1:
            raise EpsTooLargeError("constructed map does not have degree 1")
    return SurfaceMap(psi=psi, lift=g, density=rho, neighbourhood=N, cut=cut,
                      crossing_distance=d_min, info=info)


def neighbourhood_edges(c: ToroidalComplex, edges, eps: float) -> np.ndarray:
    """Cut edges plus edges with both endpoints closer than ``eps`` to the
    cut vertices."""
    edges = np.asarray(edges, dtype=np.int64)
    verts = np.unique(np.concatenate([c.edge_u[edges], c.edge_v[edges]]))
    dist = _graph_distances(c, verts, c.ell)
    mask = (dist[c.edge_u] < eps) & (dist[c.edge_v] < eps)
    mask[edges] = True
    return np.flatnonzero(mask)
