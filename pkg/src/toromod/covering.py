"""Winding numbers, circle-valued maps, lifts and the periodic cover."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .complex import ToroidalComplex, adjacency
from .errors import DegreeError, FaceInconsistentError, NotEdgeFineError

DECK_TOL = 1e-9
# increments whose distance to 1/2 is below this are treated as ambiguous
HALF_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CircleMap:
    """Vertex values in R/Z, stored as reals in [0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if np.any(~np.isfinite(v)):
            raise ValueError("circle map values must be finite")
        v = np.mod(v, 1.0)
        v[v >= 1.0] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_reals(cls, x) -> "CircleMap":
        return cls(np.mod(np.asarray(x, dtype=float), 1.0))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class LiftedMap:
    """Real lift of a circle map to ``K`` sheets of the periodic cover.

    ``base`` holds the sheet-0 values; sheet ``k`` is ``base + k * deg``.
    """

    base: np.ndarray
    deg: int
    K: int = 2

    def __post_init__(self):
        b = np.array(self.base, dtype=float, copy=True).reshape(-1)
        b.setflags(write=False)
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "deg", int(self.deg))
        if int(self.K) < 1:
            raise ValueError("a lift needs at least one sheet")
        object.__setattr__(self, "K", int(self.K))

    @property
    def values(self) -> np.ndarray:
        """Array of shape ``(K, V)``; row ``k`` is sheet ``k``."""
        return self.base[None, :] + self.deg * np.arange(self.K)[:, None]

    def at(self, v: int, k: int) -> float:
        return float(self.base[v] + k * self.deg)

    @classmethod
    def from_values(cls, values) -> "LiftedMap":
        """Build from a ``(K, V)`` table, checking the deck relation."""
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] < 1:
            raise ValueError("lift table must have shape (K, V)")
        if vals.shape[0] == 1:
            raise DegreeError("a single sheet does not determine the degree")
        diffs = np.diff(vals, axis=0)
        deg = int(np.rint(diffs[0, 0]))
        if np.max(np.abs(diffs - deg)) > DECK_TOL:
            raise DegreeError("deck relation violated: sheets do not differ by a constant integer")
        return cls(vals[0], deg, vals.shape[0])


@dataclass(frozen=True, eq=False)
class PeriodicCover:
    """Finite piece of the infinite cyclic cover.

    Vertices are copies ``(v, k)`` for sheets ``0 <= k < K`` together with
    the boundary copies ``(v, K)`` of the vertices in ``M``, the heads of the
    winding edges. A base edge ``u -> v`` with label ``w`` lifts to
    ``(u, k) -- (v, k + w)`` whenever both ends are present.
    """

    complex: ToroidalComplex
    K: int
    vertex_base: np.ndarray
    vertex_sheet: np.ndarray
    edge_base: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    M0: np.ndarray
    M1: np.ndarray
    _index: dict = field(repr=False, default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return self.vertex_base.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_base.shape[0]

    @property
    def ell(self):
        return self.complex.ell[self.edge_base]

    @property
    def mu_e(self):
        return self.complex.mu_e[self.edge_base]

    @property
    def h(self):
        return self.complex.h[self.edge_base]

    def index(self, v: int, k: int) -> int:
        """Cover index of the copy of ``v`` on sheet ``k``."""
        try:
            return self._index[(int(v), int(k))]
        except KeyError:
            raise KeyError(f"vertex {v} has no copy on sheet {k} in this cover") from None

    def deck(self, i: int, shift: int = 1):
        """Cover index of the deck translate of vertex ``i`` (None when the
        translate falls outside the materialized window)."""
        return self._index.get((int(self.vertex_base[i]), int(self.vertex_sheet[i]) + shift))


# ---------------------------------------------------------------------------

def crossing_heads(c: ToroidalComplex) -> np.ndarray:
    """Vertices entered by a winding edge traversed in its positive
    direction (``v`` for ``w=+1``, ``u`` for ``w=-1``)."""
    heads = np.concatenate([c.edge_v[c.w == 1], c.edge_u[c.w == -1]])
    return np.unique(heads)


def unroll(c: ToroidalComplex, K: int = 1) -> PeriodicCover:
    """Materialize ``K`` periods of the cyclic cover of ``c``."""
    if int(K) != K or K < 1:
        raise ValueError(f"cover needs K >= 1 periods, got {K}")
    K = int(K)
    V = c.n_vertices
    M = crossing_heads(c)
    vb = np.concatenate([np.tile(np.arange(V), K), M])
    vs = np.concatenate([np.repeat(np.arange(K), V), np.full(M.shape[0], K)])
    index = {(int(b), int(s)): i for i, (b, s) in enumerate(zip(vb, vs))}
    eb, eu, ev = [], [], []
    for k in range(K + 1):
        iu = [index.get((int(u), k)) for u in c.edge_u]
        iv = [index.get((int(v), k + int(w))) for v, w in zip(c.edge_v, c.w)]
        for e, (a, b) in enumerate(zip(iu, iv)):
            if a is not None and b is not None:
                eb.append(e)
                eu.append(a)
                ev.append(b)
    return PeriodicCover(
        complex=c, K=K, vertex_base=vb, vertex_sheet=vs,
        edge_base=np.array(eb, dtype=np.int64), edge_u=np.array(eu, dtype=np.int64),
        edge_v=np.array(ev, dtype=np.int64),
        M0=np.array([index[(int(m), 0)] for m in M], dtype=np.int64),
        M1=np.array([index[(int(m), K)] for m in M], dtype=np.int64),
        _index=index,
    )


def _walk_ends(c, e, s):
    return (int(c.edge_u[e]), int(c.edge_v[e])) if s > 0 else (int(c.edge_v[e]), int(c.edge_u[e]))


def _normalize_walk(walk):
    out = []
    for item in walk:
        e, s = item
        if s not in (1, -1):
            raise ValueError(f"orientation must be +1 or -1, got {s}")
        out.append((int(e), int(s)))
    return out


def winding_number(c: ToroidalComplex, cycle) -> int:
    """Signed sum of winding labels along a closed walk.

    ``cycle`` is a sequence of ``(edge, sign)`` pairs, sign +1 meaning the
    edge is traversed from tail to head.
    """
    walk = _normalize_walk(cycle)
    if not walk:
        return 0
    for e, _ in walk:
        if not 0 <= e < c.n_edges:
            raise ValueError(f"edge {e} out of range")
    for (e1, s1), (e2, s2) in zip(walk, walk[1:] + walk[:1]):
        if _walk_ends(c, e1, s1)[1] != _walk_ends(c, e2, s2)[0]:
            raise ValueError("edge sequence is not a closed walk")
    return int(sum(s * int(c.w[e]) for e, s in walk))


def _tree(c: ToroidalComplex):
    """BFS spanning tree from vertex 0: ``(order, nontree)`` where ``order``
    lists ``(edge, parent, child, sign)`` and ``nontree`` lists the
    remaining edges."""
    adj = adjacency(c)
    seen = np.zeros(c.n_vertices, dtype=bool)
    used = np.zeros(c.n_edges, dtype=bool)
    order = []
    seen[0] = True
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for e, b, s in adj[a]:
            if used[e] or seen[b]:
                continue
            used[e] = True
            seen[b] = True
            order.append((e, a, b, s))
            queue.append(b)
    if not seen.all():
        raise ValueError("complex is disconnected")
    return order, np.flatnonzero(~used)


def _integrate(c, order, incr):
    y = np.zeros(c.n_vertices, dtype=np.asarray(incr).dtype)
    for e, a, b, s in order:
        y[b] = y[a] + s * incr[e]
    return y


def _tree_path(parent_edge, v):
    """Walk from the root to ``v`` along tree edges."""
    path = []
    while parent_edge[v] is not None:
        e, a, s = parent_edge[v]
        path.append((e, s))
        v = a
    return path[::-1]


def winding_one_cycle(c: ToroidalComplex):
    """A closed walk (list of ``(edge, sign)``) of winding number 1.

    Fundamental loops based at vertex 0 are combined with Bezout
    coefficients when no single loop has winding +-1.
    """
    order, nontree = _tree(c)
    k = _integrate(c, order, c.w.astype(np.int64))
    parent_edge = [None] * c.n_vertices
    for e, a, b, s in order:
        parent_edge[b] = (e, a, s)
    loops = []
    for e in nontree:
        u, v = int(c.edge_u[e]), int(c.edge_v[e])
        d = int(k[u] + c.w[e] - k[v])
        if d == 0:
            continue
        to_u = _tree_path(parent_edge, u)
        back = [(ee, -ss) for ee, ss in reversed(_tree_path(parent_edge, v))]
        loops.append((d, to_u + [(int(e), 1)] + back))
        if abs(d) == 1:
            break
    if not loops:
        raise DegreeError("complex has no cycle of nonzero winding")
    # extended Euclid over the loop windings
    g, coeffs = loops[0][0], [1]
    for d, _ in loops[1:]:
        g2, x, y = _egcd(g, d)
        coeffs = [cf * x for cf in coeffs] + [y]
        g = g2
    if abs(g) != 1:
        raise DegreeError(f"closed-walk windings form {abs(g)}Z, no winding-1 cycle")
    walk = []
    for (d, loop), cf in zip(loops, coeffs):
        cf *= g  # make the total +1
        piece = loop if cf > 0 else [(e, -s) for e, s in reversed(loop)]
        walk.extend(piece * abs(cf))
    return walk


def _egcd(a, b):
    if b == 0:
        return a, 1, 0
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y


# ---------------------------------------------------------------------------

def _as_values(c, f):
    vals = f.values if isinstance(f, CircleMap) else CircleMap(f).values
    if vals.shape[0] != c.n_vertices:
        raise ValueError(f"map has {vals.shape[0]} values, complex has {c.n_vertices} vertices")
    return vals


def raw_increments(c: ToroidalComplex, f) -> np.ndarray:
    """Representatives in (-1/2, 1/2] of ``f(v) - f(u)`` without any checks."""
    vals = _as_values(c, f)
    d = vals[c.edge_v] - vals[c.edge_u]
    return d - np.ceil(d - 0.5)


def edge_increments(c: ToroidalComplex, f) -> np.ndarray:
    """Edge increments of a circle map in (-1/2, 1/2].

    Raises
    ------
    NotEdgeFineError
        Some increment is (numerically) exactly one half.
    FaceInconsistentError
        Increments do not sum to zero around some face.
    """
    delta = raw_increments(c, f)
    amb = np.abs(np.abs(delta) - 0.5) <= HALF_TOL
    if np.any(amb):
        raise NotEdgeFineError(f"half-turn increment on edges {np.flatnonzero(amb).tolist()[:10]}")
    if c.n_faces:
        sums = np.sum(np.where(c.face_signs != 0, c.face_signs * delta[np.maximum(c.face_edges, 0)], 0.0), axis=1)
        bad = np.abs(sums) > 1e-9
        if np.any(bad):
            raise FaceInconsistentError(f"increments do not close on faces {np.flatnonzero(bad).tolist()[:10]}")
    return delta


def _degree_and_base(c: ToroidalComplex, delta: np.ndarray):
    order, nontree = _tree(c)
    y = _integrate(c, order, delta)
    k = _integrate(c, order, c.w.astype(np.int64))
    deg = None
    for e in nontree:
        u, v = int(c.edge_u[e]), int(c.edge_v[e])
        W = int(k[u] + c.w[e] - k[v])
        D = y[u] + delta[e] - y[v]
        if W == 0:
            if abs(D) > 1e-9:
                raise FaceInconsistentError("increments sum to a nonzero value on a null-winding cycle")
            continue
        cand = D / W
        r = int(np.rint(cand))
        if abs(cand - r) > 1e-9 or (deg is not None and r != deg):
            raise FaceInconsistentError("increment sums are not proportional to winding numbers")
        deg = r
    if deg is None:
        raise DegreeError("complex has no cycle of nonzero winding")
    return deg, y - deg * k


def degree(c: ToroidalComplex, f) -> int:
    """Degree of an edge-fine, face-consistent circle map: the increment sum
    along any winding-1 cycle."""
    return _degree_and_base(c, edge_increments(c, f))[0]


def lift(c: ToroidalComplex, f, K: int = 2) -> LiftedMap:
    """Lift of ``f`` to ``K`` sheets, normalized so that vertex 0 on sheet 0
    takes its circle value in [0, 1)."""
    vals = _as_values(c, f)
    delta = edge_increments(c, f)
    deg, base = _degree_and_base(c, delta)
    base = base - base[0] + vals[0]
    return LiftedMap(base, deg, K)


def lift_from_potentials(x, deg: int = 1, K: int = 2) -> LiftedMap:
    """Lift whose sheet-0 values are the real potentials ``x``."""
    return LiftedMap(np.asarray(x, dtype=float), deg, K)


def lifted_increments(c: ToroidalComplex, g: LiftedMap) -> np.ndarray:
    """Increments ``g(v, k + w_e) - g(u, k)`` of a lift along base edges."""
    return g.base[c.edge_v] - g.base[c.edge_u] + g.deg * c.w


def project(g: LiftedMap) -> CircleMap:
    """Circle map ``[g]`` on the base complex."""
    vals = g.values
    if np.max(np.abs(np.diff(vals, axis=0) - g.deg), initial=0.0) > DECK_TOL:
        raise DegreeError("deck relation violated")
    return CircleMap.from_reals(g.base)
