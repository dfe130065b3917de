"""
Discrete toroidal metric measure complexes
==========================================

A :class:`ToroidalComplex` is a graph with 2-cells. Every edge carries a
length ``ell``, a measure ``mu`` and an integer winding label ``w`` (a
1-cocycle whose class generates the first cohomology of the solid torus).
The codimension-1 weight ``h = mu / ell`` is always derived, never stored.

Builders
--------
build_ring         degenerate solid torus with a point cross-section
build_ladder       two parallel rails joined by rungs (small test geometry)
build_solid_torus  structured product mesh of S^1 x D with a conformal warp
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .errors import InvalidComplexError

SCHEMA_NAME = "toromod-complex"
SCHEMA_VERSION = 1

# share of each cell's measure assigned to edges transverse to the core
DEFAULT_TRANSVERSE_SHARE = 0.01

Warp = Union[str, Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray], None]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ToroidalComplex:
    """Weighted graph-with-faces model of a solid torus.

    Parameters
    ----------
    mu_v : (V,) array
        Vertex measures (nonnegative, used for reporting only).
    edge_u, edge_v : (E,) int arrays
        Tail and head of each oriented edge.
    ell, mu_e : (E,) arrays
        Edge lengths and edge measures.
    w : (E,) int array
        Winding cocycle on the oriented edges, values in {-1, 0, 1}.
    face_edges, face_signs : (F, 4) int arrays
        Each row lists the edges of a 2-cell and the orientation in which they
        are traversed. Triangles are padded with edge -1 and sign 0.
    q : float
        Ahlfors exponent, only used by :func:`scale_metric` and reporting.
    meta : dict
        Builder parameters, echoed into reports.
    """

    mu_v: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    ell: np.ndarray
    mu_e: np.ndarray
    w: np.ndarray
    face_edges: np.ndarray
    face_signs: np.ndarray
    q: float = 3.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "mu_v", _frozen(self.mu_v, float))
        set_(self, "edge_u", _frozen(self.edge_u, np.int64))
        set_(self, "edge_v", _frozen(self.edge_v, np.int64))
        set_(self, "ell", _frozen(self.ell, float))
        set_(self, "mu_e", _frozen(self.mu_e, float))
        set_(self, "w", _frozen(self.w, np.int64))
        fe = np.asarray(self.face_edges, dtype=np.int64).reshape(-1, 4)
        fs = np.asarray(self.face_signs, dtype=np.int64).reshape(-1, 4)
        set_(self, "face_edges", _frozen(fe, np.int64))
        set_(self, "face_signs", _frozen(fs, np.int64))
        set_(self, "q", float(self.q))
        set_(self, "meta", dict(self.meta))
        shapes = {a.shape for a in (self.edge_u, self.edge_v, self.ell, self.mu_e, self.w)}
        if len(shapes) != 1 or self.edge_u.ndim != 1:
            raise InvalidComplexError("edge arrays must be one-dimensional and equally long")
        if self.face_edges.shape != self.face_signs.shape:
            raise InvalidComplexError("face_edges and face_signs differ in shape")

    @property
    def h(self) -> np.ndarray:
        """Codimension-1 weight ``mu_e / ell``."""
        return self.mu_e / self.ell

    @property
    def n_vertices(self) -> int:
        return self.mu_v.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_u.shape[0]

    @property
    def n_faces(self) -> int:
        return self.face_edges.shape[0]

    def faces(self):
        """Faces as lists of ``(edge, sign)`` pairs."""
        out = []
        for es, ss in zip(self.face_edges, self.face_signs):
            out.append([(int(e), int(s)) for e, s in zip(es, ss) if s != 0])
        return out

    def replace(self, **changes) -> "ToroidalComplex":
        fields = dict(
            mu_v=self.mu_v, edge_u=self.edge_u, edge_v=self.edge_v, ell=self.ell,
            mu_e=self.mu_e, w=self.w, face_edges=self.face_edges,
            face_signs=self.face_signs, q=self.q, meta=self.meta,
        )
        fields.update(changes)
        return ToroidalComplex(**fields)

    def __eq__(self, other):
        if not isinstance(other, ToroidalComplex):
            return NotImplemented
        arrays = ("mu_v", "edge_u", "edge_v", "ell", "mu_e", "w", "face_edges", "face_signs")
        return (
            all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
            and self.q == other.q
            and self.meta == other.meta
        )

    __hash__ = None

    def describe(self) -> str:
        kind = self.meta.get("builder", "custom")
        return f"{kind}(V={self.n_vertices}, E={self.n_edges}, F={self.n_faces})"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "valid"
        return "; ".join(self.violations)


# ---------------------------------------------------------------------------
# graph helpers

def adjacency(c: ToroidalComplex):
    """Per-vertex list of ``(edge, neighbour, sign)``; sign +1 means the edge
    is traversed from tail to head."""
    adj = [[] for _ in range(c.n_vertices)]
    for e, (u, v) in enumerate(zip(c.edge_u.tolist(), c.edge_v.tolist())):
        adj[u].append((e, v, 1))
        adj[v].append((e, u, -1))
    return adj


def sheet_labels(c: ToroidalComplex, removed=None):
    """Propagate integer sheet labels ``k`` with ``k[v] - k[u] = w[e]`` over a
    spanning forest of the graph minus ``removed`` edges.

    Returns ``(k, component, conflicts)`` where ``conflicts`` lists
    ``(edge, defect)`` for non-tree edges whose cocycle value disagrees with
    the labels. A nonzero defect is the winding number of the fundamental
    cycle closed by that edge.
    """
    n = c.n_vertices
    skip = np.zeros(c.n_edges, dtype=bool)
    if removed is not None:
        skip[np.asarray(list(removed), dtype=np.int64)] = True
    k = np.zeros(n, dtype=np.int64)
    comp = np.full(n, -1, dtype=np.int64)
    adj = adjacency(c)
    w = c.w.tolist()
    conflicts = []
    seen_edge = skip.copy()
    ncomp = 0
    for root in range(n):
        if comp[root] >= 0:
            continue
        comp[root] = ncomp
        queue = deque([root])
        while queue:
            a = queue.popleft()
            for e, b, s in adj[a]:
                if seen_edge[e]:
                    continue
                seen_edge[e] = True
                kb = k[a] + s * w[e]
                if comp[b] < 0:
                    comp[b] = ncomp
                    k[b] = kb
                    queue.append(b)
                elif kb != k[b]:
                    # defect measured along the edge's own orientation
                    conflicts.append((e, int(s * (kb - k[b]))))
        ncomp += 1
    return k, comp, conflicts


def winding_generator(c: ToroidalComplex) -> int:
    """Positive generator of the subgroup of windings of closed walks (0 if
    every closed walk has winding 0)."""
    _, _, conflicts = sheet_labels(c)
    g = 0
    for _, d in conflicts:
        g = math.gcd(g, abs(d))
    return g


# ---------------------------------------------------------------------------
# validation

def validate(c: ToroidalComplex) -> ValidationReport:
    """Report every violated invariant of ``c``; an empty report means valid."""
    rep = ValidationReport()
    V, E = c.n_vertices, c.n_edges
    bad = lambda a: ~np.isfinite(a)  # noqa: E731
    if E == 0:
        rep.violations.append("complex has no edges")
        return rep
    if np.any(bad(c.ell)) or np.any(c.ell <= 0):
        rep.violations.append(f"positivity: ell <= 0 on edges {np.flatnonzero(~(c.ell > 0)).tolist()}")
    if np.any(bad(c.mu_e)) or np.any(c.mu_e <= 0):
        rep.violations.append(f"positivity: mu_e <= 0 on edges {np.flatnonzero(~(c.mu_e > 0)).tolist()}")
    if np.any(bad(c.mu_v)) or np.any(c.mu_v < 0):
        rep.violations.append(f"positivity: mu_v < 0 on vertices {np.flatnonzero(~(c.mu_v >= 0)).tolist()}")
    if not (np.isfinite(c.q) and c.q > 0):
        rep.violations.append("dimension exponent q must be positive")
    ends = np.concatenate([c.edge_u, c.edge_v])
    if ends.size and (ends.min() < 0 or ends.max() >= V):
        rep.violations.append("edge endpoint out of range")
        return rep
    if np.any(c.edge_u == c.edge_v):
        rep.violations.append(f"self-loop edges {np.flatnonzero(c.edge_u == c.edge_v).tolist()}")
    if np.any(np.abs(c.w) > 1):
        rep.violations.append("winding labels must lie in {-1, 0, 1}")

    for i, (es, ss) in enumerate(zip(c.face_edges, c.face_signs)):
        mask = ss != 0
        es, ss = es[mask], ss[mask]
        if len(es) not in (3, 4) or np.any(es < 0) or np.any(es >= E) or np.any(np.abs(ss) != 1):
            rep.violations.append(f"face {i} malformed")
            continue
        tails = np.where(ss > 0, c.edge_u[es], c.edge_v[es])
        heads = np.where(ss > 0, c.edge_v[es], c.edge_u[es])
        if not np.array_equal(heads, np.roll(tails, -1)):
            rep.violations.append(f"face {i} is not a closed edge cycle")
            continue
        if int(np.sum(ss * c.w[es])) != 0:
            rep.violations.append(f"cocycle: winding sum around face {i} is not 0")

    _, comp, _ = sheet_labels(c)
    if comp.max() > 0:
        rep.violations.append("graph is disconnected")
    g = winding_generator(c)
    if g != 1:
        rep.violations.append(f"no winding-1 cycle (closed-walk windings form {g}Z)")
    return rep


def require_valid(c: ToroidalComplex) -> ToroidalComplex:
    rep = validate(c)
    if not rep.ok:
        raise InvalidComplexError(str(rep))
    return c


# ---------------------------------------------------------------------------
# builders

def build_ring(m: int, L: float, A: float, q: float = 3.0) -> ToroidalComplex:
    """Cycle graph on ``m`` vertices: a solid torus of length ``L`` whose
    cross-section is collapsed to a point of measure ``A``.

    Every edge has ``ell = L/m``, ``mu = L*A/m`` and therefore ``h = A``. The
    closing edge ``m-1 -> 0`` carries the winding label.
    """
    if int(m) != m or m < 3:
        raise ValueError(f"ring needs m >= 3 edges, got {m}")
    if not (L > 0 and A > 0):
        raise ValueError("ring length L and cross-section A must be positive")
    m = int(m)
    u = np.arange(m)
    v = (u + 1) % m
    w = np.zeros(m, dtype=np.int64)
    w[-1] = 1
    return ToroidalComplex(
        mu_v=np.zeros(m), edge_u=u, edge_v=v,
        ell=np.full(m, L / m), mu_e=np.full(m, L * A / m), w=w,
        face_edges=np.zeros((0, 4)), face_signs=np.zeros((0, 4)), q=q,
        meta={"builder": "ring", "m": m, "L": float(L), "A": float(A)},
    )


def build_ladder(m: int, L: float, A: float, rung: float = None, offset: int = 0,
                 q: float = 3.0) -> ToroidalComplex:
    """Two rings of ``m`` edges (each carrying half of ``A``) joined by ``m``
    rungs, with square faces between consecutive rungs.

    ``offset`` moves the winding label of the second rail ``offset`` steps
    along it; the labels then differ by a coboundary, so the cohomology class
    is unchanged but window-based constructions see a skewed seam.
    """
    if int(m) != m or m < 3:
        raise ValueError("ladder needs m >= 3")
    if not (L > 0 and A > 0):
        raise ValueError("ladder length L and cross-section A must be positive")
    m = int(m)
    step = L / m
    rung = step if rung is None else float(rung)
    if rung <= 0:
        raise ValueError("rung length must be positive")
    i = np.arange(m)
    # rail a: 0..m-1, rail b: m..2m-1
    u = np.concatenate([i, m + i, i])
    v = np.concatenate([(i + 1) % m, m + (i + 1) % m, m + i])
    w = np.zeros(3 * m, dtype=np.int64)
    w[m - 1] = 1
    w[m + (m - 1 + offset) % m] = 1
    # coboundary correction on the rungs so that every face still sums to 0
    # (vertices b_1..b_offset sit one sheet higher than rail a).
    k_b = np.zeros(m, dtype=np.int64)
    for j in range(1, m):
        k_b[j] = k_b[j - 1] + (1 if (m - 1 + offset) % m == j - 1 else 0)
    k_b -= k_b[0]
    # rung a_j -> b_j: w = k_b[j] - k_a[j] with rail a labels all 0 before the seam
    k_a = np.zeros(m, dtype=np.int64)
    w[2 * m:] = k_b - k_a
    ell = np.concatenate([np.full(2 * m, step), np.full(m, rung)])
    mu = np.concatenate([np.full(2 * m, L * A / (2 * m)), np.full(m, rung * A * 0.05)])
    fe, fs = [], []
    for j in range(m):
        jn = (j + 1) % m
        # a_j -> a_jn -> b_jn -> b_j -> a_j
        fe.append([j, 2 * m + jn, m + j, 2 * m + j])
        fs.append([1, 1, -1, -1])
    return ToroidalComplex(
        mu_v=np.zeros(2 * m), edge_u=u, edge_v=v, ell=ell, mu_e=mu, w=w,
        face_edges=fe, face_signs=fs, q=q,
        meta={"builder": "ladder", "m": m, "L": float(L), "A": float(A),
              "rung": rung, "offset": int(offset)},
    )


def parse_warp(warp: Warp, R: float = 1.0):
    """Turn a warp spec into ``(callable, name)``.

    Presets (``beta`` defaults to 0.5):

    ``flat``        1
    ``sin:beta``    1 + beta sin(theta)
    ``radial:beta`` 1 + beta r/R
    ``twist:beta``  1 + beta (r/R) sin(theta + phi)
    """
    if warp is None:
        warp = "flat"
    if callable(warp):
        return warp, getattr(warp, "__name__", "custom")
    name, _, arg = str(warp).partition(":")
    beta = float(arg) if arg else 0.5
    if name == "flat":
        return (lambda th, r, ph: np.ones(np.broadcast(th, r, ph).shape)), "flat"
    if name == "sin":
        return (lambda th, r, ph: 1.0 + beta * np.sin(th) + 0 * r * ph), f"sin:{beta:g}"
    if name == "radial":
        return (lambda th, r, ph: 1.0 + beta * r / R + 0 * th * ph), f"radial:{beta:g}"
    if name == "twist":
        return (lambda th, r, ph: 1.0 + beta * (r / R) * np.sin(th + ph)), f"twist:{beta:g}"
    raise ValueError(f"unknown warp preset {warp!r}")


_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


def _gauss(a, b):
    """Gauss-Legendre nodes and weights on [a, b] for arrays of intervals."""
    a = np.asarray(a, float)[..., None]
    b = np.asarray(b, float)[..., None]
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * _GL_X, half * _GL_W


def _cell_integral(omega, q, th0, th1, r0, r1, ph0, ph1, arc):
    """Integral of omega^q dV over polar boxes; ``arc`` converts dtheta to
    core arclength."""
    th, wt = _gauss(th0, th1)
    r, wr = _gauss(r0, r1)
    ph, wp = _gauss(ph0, ph1)
    T = th[:, :, None, None]
    Rr = r[:, None, :, None]
    P = ph[:, None, None, :]
    val = omega(T, Rr, P)
    if np.any(~(val > 0)):
        raise ValueError("warp must be positive everywhere")
    wgt = wt[:, :, None, None] * wr[:, None, :, None] * wp[:, None, None, :]
    return np.sum(val ** q * Rr * wgt, axis=(1, 2, 3)) * arc


def _line_integral(omega, th0, th1, r0, r1, ph0, ph1, scale):
    """Integral of omega along a straight parameter segment."""
    s, ws = _gauss(np.zeros(np.shape(th0)), np.ones(np.shape(th0)))
    th0, th1, r0, r1, ph0, ph1 = (np.asarray(a, float)[..., None] for a in (th0, th1, r0, r1, ph0, ph1))
    val = omega(th0 + s * (th1 - th0), r0 + s * (r1 - r0), ph0 + s * (ph1 - ph0))
    if np.any(~(val > 0)):
        raise ValueError("warp must be positive everywhere")
    return np.sum(val * ws, axis=-1) * scale


def build_solid_torus(k_theta: int, n_r: int, n_phi: int, L: float = 1.0, R: float = 1.0,
                      warp: Warp = "flat", q: float = 3.0,
                      transverse_share: float = DEFAULT_TRANSVERSE_SHARE) -> ToroidalComplex:
    """Structured mesh of the solid torus S^1_L x D_R with metric
    ``omega * (flat product metric)`` and measure ``omega**q dV``.

    Each of the ``k_theta`` meridian slices is a polar disk grid: a centre
    vertex plus ``n_r`` rings of ``n_phi`` vertices at radii ``i R / n_r``.
    Core-parallel edges join consecutive slices; the edges entering slice 0
    carry the winding label.

    Measures are exact cell integrals (Gauss-Legendre, curvilinear cells):
    core-parallel edges receive ``1 - transverse_share`` of the volume of
    their prism (slice interval times the dual disk cell of the vertex);
    in-slice edges share the remaining fraction of the slab around their
    slice. Total edge measure therefore equals the integral of omega**q.

    Parameters
    ----------
    k_theta, n_r, n_phi : int
        Slices, rings and angular divisions; at least 3, 1 and 3.
    L, R : float
        Core length and disk radius.
    warp : str or callable
        Preset name (see :func:`parse_warp`) or ``omega(theta, r, phi)``.
    q : float
        Ahlfors exponent of the measure.
    transverse_share : float
        Fraction of measure assigned to in-slice edges, in (0, 1).
    """
    if int(k_theta) != k_theta or k_theta < 3 or int(n_r) != n_r or n_r < 1 \
            or int(n_phi) != n_phi or n_phi < 3:
        raise ValueError("need k_theta >= 3, n_r >= 1, n_phi >= 3")
    if not (L > 0 and R > 0):
        raise ValueError("L and R must be positive")
    if not (0 < transverse_share < 1):
        raise ValueError("transverse_share must lie in (0, 1)")
    k_theta, n_r, n_phi = int(k_theta), int(n_r), int(n_phi)
    omega, warp_name = parse_warp(warp, R)
    arc = L / (2 * np.pi)
    dth = 2 * np.pi / k_theta
    dr = R / n_r
    dph = 2 * np.pi / n_phi
    eta = float(transverse_share)

    nd = 1 + n_r * n_phi
    ring = np.repeat(np.arange(1, n_r + 1), n_phi)
    jj = np.tile(np.arange(n_phi), n_r)
    vr = np.concatenate([[0.0], ring * dr])
    vph = np.concatenate([[0.0], jj * dph])
    # dual disk cell of each disk vertex
    r_lo = np.concatenate([[0.0], np.maximum(ring * dr - dr / 2, 0)])
    r_hi = np.concatenate([[dr / 2], np.minimum(ring * dr + dr / 2, R)])
    p_lo = np.concatenate([[0.0], jj * dph - dph / 2])
    p_hi = np.concatenate([[2 * np.pi], jj * dph + dph / 2])

    def dv(i, j):
        return 1 + (i - 1) * n_phi + (j % n_phi)

    # disk edges: (a, b, kind, param) ; kind 0 spoke, 1 radial, 2 angular
    d_a, d_b, d_kind, d_i, d_j = [], [], [], [], []
    for j in range(n_phi):
        d_a.append(0); d_b.append(dv(1, j)); d_kind.append(0); d_i.append(0); d_j.append(j)
    for i in range(1, n_r):
        for j in range(n_phi):
            d_a.append(dv(i, j)); d_b.append(dv(i + 1, j)); d_kind.append(1); d_i.append(i); d_j.append(j)
    for i in range(1, n_r + 1):
        for j in range(n_phi):
            d_a.append(dv(i, j)); d_b.append(dv(i, j + 1)); d_kind.append(2); d_i.append(i); d_j.append(j)
    d_a, d_b, d_kind, d_i, d_j = map(np.array, (d_a, d_b, d_kind, d_i, d_j))
    nde = len(d_a)
    spoke = lambda j: j % n_phi  # noqa: E731
    radial = lambda i, j: n_phi + (i - 1) * n_phi + (j % n_phi)  # noqa: E731
    angular = lambda i, j: n_phi + (n_r - 1) * n_phi + (i - 1) * n_phi + (j % n_phi)  # noqa: E731

    # disk cells: list of (edge ids, signs, r0, r1, ph0, ph1)
    cells = []
    for j in range(n_phi):
        cells.append(([spoke(j), angular(1, j), spoke(j + 1)], [1, 1, -1], 0.0, dr, j * dph, (j + 1) * dph))
    for i in range(1, n_r):
        for j in range(n_phi):
            cells.append(([radial(i, j), angular(i + 1, j), radial(i, j + 1), angular(i, j)],
                          [1, 1, -1, -1], i * dr, (i + 1) * dr, j * dph, (j + 1) * dph))

    # --- core-parallel edges, slice-major
    s_idx = np.repeat(np.arange(k_theta), nd)
    loc = np.tile(np.arange(nd), k_theta)
    th0 = s_idx * dth
    th1 = th0 + dth
    t_u = s_idx * nd + loc
    t_v = ((s_idx + 1) % k_theta) * nd + loc
    t_w = (s_idx == k_theta - 1).astype(np.int64)
    t_mu = (1 - eta) * _cell_integral(omega, q, th0, th1, r_lo[loc], r_hi[loc], p_lo[loc], p_hi[loc], arc)
    t_ell = _line_integral(omega, th0, th1, vr[loc], vr[loc], vph[loc], vph[loc], arc * dth)

    # --- in-slice edges
    ds = np.repeat(np.arange(k_theta), nde)
    de = np.tile(np.arange(nde), k_theta)
    e_u = ds * nd + d_a[de]
    e_v = ds * nd + d_b[de]
    thc = ds * dth
    kind = d_kind[de]
    ia, ja = d_i[de], d_j[de]
    r0 = np.where(kind == 0, 0.0, ia * dr)
    r1 = np.where(kind == 0, dr, np.where(kind == 1, (ia + 1) * dr, ia * dr))
    p0 = ja * dph
    p1 = np.where(kind == 2, (ja + 1) * dph, ja * dph)
    seg_scale = np.where(kind == 2, ia * dr * dph, dr)
    # line integral over the unit parameter, scaled by the coordinate extent
    e_ell = _line_integral(omega, thc, thc, r0, r1, p0, p1, 1.0) * seg_scale
    e_mu = np.zeros(k_theta * nde)
    n_cells = len(cells)
    c_r0 = np.array([cl[2] for cl in cells]); c_r1 = np.array([cl[3] for cl in cells])
    c_p0 = np.array([cl[4] for cl in cells]); c_p1 = np.array([cl[5] for cl in cells])
    cs = np.repeat(np.arange(k_theta), n_cells)
    cc = np.tile(np.arange(n_cells), k_theta)
    slab = eta * _cell_integral(omega, q, cs * dth - dth / 2, cs * dth + dth / 2,
                                c_r0[cc], c_r1[cc], c_p0[cc], c_p1[cc], arc)
    for n, (s, ci) in enumerate(zip(cs, cc)):
        edges = cells[ci][0]
        for e in edges:
            e_mu[s * nde + e] += slab[n] / len(edges)

    n_t = k_theta * nd
    edge_u = np.concatenate([t_u, e_u])
    edge_v = np.concatenate([t_v, e_v])
    ell = np.concatenate([t_ell, e_ell])
    mu_e = np.concatenate([t_mu, e_mu])
    w = np.concatenate([t_w, np.zeros(k_theta * nde, dtype=np.int64)])

    # vertex measure: full dual volume (reporting only)
    vs = np.repeat(np.arange(k_theta), nd)
    vl = np.tile(np.arange(nd), k_theta)
    mu_v = _cell_integral(omega, q, vs * dth - dth / 2, vs * dth + dth / 2,
                          r_lo[vl], r_hi[vl], p_lo[vl], p_hi[vl], arc)

    # --- faces
    fe, fs = [], []
    for s in range(k_theta):
        for edges, signs, *_ in cells:
            row = [n_t + s * nde + e for e in edges]
            fe.append(row + [-1] * (4 - len(row)))
            fs.append(list(signs) + [0] * (4 - len(signs)))
    for s in range(k_theta):
        sn = (s + 1) % k_theta
        for e in range(nde):
            a, b = d_a[e], d_b[e]
            fe.append([n_t + s * nde + e, s * nd + b, n_t + sn * nde + e, s * nd + a])
            fs.append([1, 1, -1, -1])

    meta = {
        "builder": "solid_torus", "k_theta": k_theta, "n_r": n_r, "n_phi": n_phi,
        "L": float(L), "R": float(R), "warp": warp_name, "transverse_share": eta,
    }
    return ToroidalComplex(mu_v=mu_v, edge_u=edge_u, edge_v=edge_v, ell=ell, mu_e=mu_e, w=w,
                           face_edges=fe, face_signs=fs, q=q, meta=meta)


def core_edges(c: ToroidalComplex) -> np.ndarray:
    """Indices of core-parallel edges of a solid-torus mesh (all edges for
    rings)."""
    if c.meta.get("builder") == "solid_torus":
        nd = 1 + c.meta["n_r"] * c.meta["n_phi"]
        return np.arange(c.meta["k_theta"] * nd)
    return np.arange(c.n_edges)


def slice_edges(c: ToroidalComplex, s: int) -> np.ndarray:
    """Core-parallel edges leaving meridian slice ``s`` of a solid-torus mesh;
    together they form a separating cut."""
    if c.meta.get("builder") != "solid_torus":
        raise ValueError("slice_edges needs a solid_torus complex")
    nd = 1 + c.meta["n_r"] * c.meta["n_phi"]
    s = s % c.meta["k_theta"]
    return np.arange(s * nd, (s + 1) * nd)


def angular_map_values(c: ToroidalComplex) -> np.ndarray:
    """Real potentials ``theta / 2pi`` of a solid-torus mesh (slice index over
    ``k_theta``); their circle projection is a degree-1 map."""
    if c.meta.get("builder") == "solid_torus":
        nd = 1 + c.meta["n_r"] * c.meta["n_phi"]
        k = c.meta["k_theta"]
        return np.repeat(np.arange(k) / k, nd)
    if c.meta.get("builder") == "ring":
        m = c.n_vertices
        return np.arange(m) / m
    raise ValueError("angular map only defined for ring and solid_torus builders")


# ---------------------------------------------------------------------------
# transforms and persistence

def scale_metric(c: ToroidalComplex, s: float) -> ToroidalComplex:
    """Multiply distances by ``s`` and measures by ``s**q``."""
    if not (s > 0) or not np.isfinite(s):
        raise ValueError(f"scale factor must be positive, got {s}")
    sq = s ** c.q
    meta = dict(c.meta)
    meta["scale"] = meta.get("scale", 1.0) * s
    if s == 1:
        meta = dict(c.meta)
    return c.replace(ell=c.ell * s, mu_e=c.mu_e * sq, mu_v=c.mu_v * sq, meta=meta)


def complex_to_dict(c: ToroidalComplex) -> dict:
    return {
        "format": SCHEMA_NAME,
        "version": SCHEMA_VERSION,
        "q": c.q,
        "vertices": [{"id": i, "mu": float(m)} for i, m in enumerate(c.mu_v)],
        "edges": [
            {"id": i, "u": int(u), "v": int(v), "ell": float(l), "mu": float(m), "w": int(w)}
            for i, (u, v, l, m, w) in enumerate(zip(c.edge_u, c.edge_v, c.ell, c.mu_e, c.w))
        ],
        "faces": [[[e, s] for e, s in f] for f in c.faces()],
        "meta": c.meta,
    }


def _reject_constant(name):
    raise InvalidComplexError(f"non-finite number {name} in complex file")


def complex_from_dict(doc: dict, check: bool = True) -> ToroidalComplex:
    try:
        if doc.get("format") != SCHEMA_NAME:
            raise InvalidComplexError(f"not a {SCHEMA_NAME} document")
        verts = sorted(doc["vertices"], key=lambda r: r["id"])
        edges = sorted(doc["edges"], key=lambda r: r["id"])
        if [r["id"] for r in verts] != list(range(len(verts))) or \
                [r["id"] for r in edges] != list(range(len(edges))):
            raise InvalidComplexError("vertex and edge ids must be 0..n-1")
        fe, fs = [], []
        for f in doc["faces"]:
            if len(f) not in (3, 4):
                raise InvalidComplexError("faces must have 3 or 4 edges")
            fe.append([int(e) for e, _ in f] + [-1] * (4 - len(f)))
            fs.append([int(s) for _, s in f] + [0] * (4 - len(f)))
        c = ToroidalComplex(
            mu_v=[float(r["mu"]) for r in verts],
            edge_u=[int(r["u"]) for r in edges],
            edge_v=[int(r["v"]) for r in edges],
            ell=[float(r["ell"]) for r in edges],
            mu_e=[float(r["mu"]) for r in edges],
            w=[int(r["w"]) for r in edges],
            face_edges=np.array(fe, dtype=np.int64).reshape(-1, 4),
            face_signs=np.array(fs, dtype=np.int64).reshape(-1, 4),
            q=float(doc["q"]),
            meta=doc.get("meta", {}),
        )
    except InvalidComplexError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidComplexError(f"malformed complex document: {exc}") from exc
    return require_valid(c) if check else c


def save_complex(c: ToroidalComplex, sink) -> None:
    """Write ``c`` as JSON to a path or text stream."""
    text = json.dumps(complex_to_dict(c), allow_nan=False, indent=1)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        Path(sink).write_text(text)


def load_complex(source, check: bool = True) -> ToroidalComplex:
    """Read a complex written by :func:`save_complex`; invariants are
    enforced unless ``check`` is false."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InvalidComplexError(f"cannot parse complex file: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidComplexError("complex file must hold a JSON object")
    return complex_from_dict(doc, check)


@dataclass(frozen=True, eq=False)
class Density:
    """Nonnegative finite function on the edges of a complex."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ValueError("density values must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.shape[0]


def as_density(values, c: ToroidalComplex) -> np.ndarray:
    """Validate ``values`` as a density on ``c`` and return a float array."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.shape[0] != c.n_edges:
        raise ValueError(f"density has {v.shape[0]} entries, complex has {c.n_edges} edges")
    if np.any(~np.isfinite(v)) or np.any(v < 0):
        raise ValueError("density values must be finite and nonnegative")
    return v
