"""Winding-cycle family: shortest-cycle oracle and path modulus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .complex import ToroidalComplex, as_density
from .covering import PeriodicCover, unroll, winding_number
from .modulus import DEFAULT_MAX_ITER, DEFAULT_TOL, Member, SolveReport, solve_modulus

# relative weight of the hop-count tie-break added to every edge
HOP_EPS = 1e-13


@dataclass(frozen=True, eq=False)
class WindingCycle:
    """Closed walk of winding number 1 as a list of ``(edge, sign)``."""

    walk: tuple
    winding: int = 1

    @property
    def edges(self) -> np.ndarray:
        return np.array([e for e, _ in self.walk], dtype=np.int64)

    def member(self, c: ToroidalComplex) -> Member:
        e = self.edges
        support, counts = np.unique(e, return_counts=True)
        return Member(support, c.ell[support] * counts, payload=self)

    def length(self, c: ToroidalComplex, rho=None) -> float:
        e = self.edges
        w = c.ell[e] if rho is None else c.ell[e] * np.asarray(rho)[e]
        return float(np.sum(w))


class WindingCycleOracle:
    """Lightest closed walk of winding 1 under a density.

    Distances are computed in a window of the cyclic cover from copies of
    the source vertices on a middle sheet to their translates one sheet up.
    Sources are the winding-edge heads, or every vertex with
    ``sources="all"``. A walk
    that leaves the window costs at least its distance out to an outer sheet
    plus the distance back; the window is doubled until that bound is no
    smaller than the best cycle, which makes the answer exact.
    """

    can_enumerate = True

    def __init__(self, c: ToroidalComplex, K: int = 5, max_enumerate_edges: int = 20, sources: str = "heads"):
        self.complex = c
        self.sources = sources
        self.K = K
        self.max_enumerate_edges = max_enumerate_edges
        self._covers: dict = {}

    def _cover(self, K) -> PeriodicCover:
        if K not in self._covers:
            self._covers[K] = unroll(self.complex, K)
        return self._covers[K]

    def _graph(self, cov: PeriodicCover, weights: np.ndarray):
        """Symmetric sparse graph keeping the lightest of parallel edges,
        plus sorted pair keys and the base edge realizing each pair."""
        n = cov.n_vertices
        a = np.minimum(cov.edge_u, cov.edge_v)
        b = np.maximum(cov.edge_u, cov.edge_v)
        order = np.lexsort((cov.edge_base, weights, b, a))
        a, b, wts, eb = a[order], b[order], weights[order], cov.edge_base[order]
        first = np.ones(a.shape[0], dtype=bool)
        first[1:] = (a[1:] != a[:-1]) | (b[1:] != b[:-1])
        a, b, wts, eb = a[first], b[first], wts[first], eb[first]
        # explicit zeros are kept by csgraph as zero-length edges
        G = sparse.csr_matrix((np.concatenate([wts, wts]), (np.concatenate([a, b]), np.concatenate([b, a]))),
                              shape=(n, n))
        return G, (a * n + b, eb, n)

    def candidates(self, rho) -> list:
        """Lightest winding-1 walk through each winding-edge head, as
        ``(Member, mass)`` pairs sorted by mass (ties by head index)."""
        c = self.complex
        rho = as_density(rho, c)
        base_w = rho * c.ell
        scale = float(base_w.max(initial=0.0)) or float(c.ell.min())
        K = self.K
        while True:
            cov = self._cover(K)
            wts = base_w[cov.edge_base] + HOP_EPS * scale
            G, lookup = self._graph(cov, wts)
            heads = cov.vertex_base[cov.M0] if self.sources == "heads" else np.arange(c.n_vertices)
            mid = (K - 1) // 2
            src = np.array([cov.index(v, mid) for v in heads])
            dst = np.array([cov.index(v, mid + 1) for v in heads])
            dist, pred = csgraph.dijkstra(G, directed=False, indices=src, return_predecessors=True)
            best = dist[np.arange(src.size), dst]
            # a walk leaving the window pays at least the distance out from its
            # start plus the distance back in to its end
            back = csgraph.dijkstra(G, directed=False, indices=dst)
            bound = np.full(src.size, np.inf)
            for sheet in (0, K):
                on = cov.vertex_sheet == sheet
                bound = np.minimum(bound, dist[:, on].min(axis=1) + back[:, on].min(axis=1))
            if np.all(bound >= best.min()) or K >= 64:
                break
            K *= 2
        out = []
        for i in np.argsort(best, kind="stable"):
            walk = self._trace(cov, pred[i], int(src[i]), int(dst[i]), lookup)
            cyc = WindingCycle(tuple(walk))
            m = cyc.member(c)
            out.append((m, m.mass(rho)))
        out.sort(key=lambda t: t[1])
        return out

    def edge_candidates(self, rho) -> list:
        """Lightest winding-1 walk through each edge with ``rho > 0``, in the
        base window, as distinct ``(Member, mass)`` pairs sorted by mass."""
        c = self.complex
        rho = as_density(rho, c)
        base_w = rho * c.ell
        scale = float(base_w.max(initial=0.0)) or float(c.ell.min())
        K = self.K
        cov = self._cover(K)
        G, lookup = self._graph(cov, base_w[cov.edge_base] + HOP_EPS * scale)
        mid = (K - 1) // 2
        src = np.array([cov.index(v, mid) for v in range(c.n_vertices)])
        dist, pred = csgraph.dijkstra(G, directed=False, indices=src, return_predecessors=True)
        out, seen = [], set()
        for e in np.flatnonzero(rho > 0):
            u, v, w = int(c.edge_u[e]), int(c.edge_v[e]), int(c.w[e])
            # forward: from v round to the copy of u feeding (v, mid + 1)
            fwd = dist[v, cov.index(u, mid + 1 - w)]
            bwd = dist[u, cov.index(v, mid + 1 + w)]
            if fwd <= bwd:
                walk = self._trace(cov, pred[v], int(src[v]), cov.index(u, mid + 1 - w), lookup) + [(int(e), 1)]
            else:
                walk = self._trace(cov, pred[u], int(src[u]), cov.index(v, mid + 1 + w), lookup) + [(int(e), -1)]
            m = WindingCycle(tuple(walk)).member(c)
            if m.key not in seen:
                seen.add(m.key)
                out.append((m, m.mass(rho)))
        out.sort(key=lambda t: t[1])
        return out

    def _trace(self, cov, pred, s, t, lookup):
        keys, eb, n = lookup
        nodes = [t]
        while nodes[-1] != s:
            nodes.append(int(pred[nodes[-1]]))
        nodes = np.array(nodes[::-1])
        x, y = nodes[:-1], nodes[1:]
        pos = np.searchsorted(keys, np.minimum(x, y) * n + np.maximum(x, y))
        edges = eb[pos]
        c = self.complex
        # +1 when the step leaves from the tail of the base edge
        signs = np.where(c.edge_u[edges] == cov.vertex_base[x], 1, -1)
        return [(int(e), int(sg)) for e, sg in zip(edges, signs)]

    def query(self, rho):
        return self.candidates(rho)[0]

    def __call__(self, rho):
        m, weight = self.query(rho)
        return m.payload, weight

    def enumerate(self) -> list:
        """Members for every simple cycle of winding +-1 (oriented to +1)."""
        return [WindingCycle(tuple(w)).member(self.complex)
                for w in enumerate_winding_cycles(self.complex, self.max_enumerate_edges)]


def winding_cycle_oracle(c: ToroidalComplex, rho) -> tuple:
    """``(WindingCycle, weight)`` minimizing ``sum rho * ell``."""
    return WindingCycleOracle(c)(rho)


def enumerate_winding_cycles(c: ToroidalComplex, max_edges: int = 20) -> list:
    """All simple cycles of winding +-1, each oriented to winding +1, as
    lists of ``(edge, sign)``. Parallel edges are handled explicitly."""
    import networkx as nx

    if c.n_edges > max_edges:
        raise ValueError(f"cycle enumeration is limited to {max_edges} edges")
    G = nx.MultiGraph()
    G.add_nodes_from(range(c.n_vertices))
    for e, (u, v) in enumerate(zip(c.edge_u.tolist(), c.edge_v.tolist())):
        G.add_edge(u, v, key=e)
    out = []
    seen = set()
    for cyc in nx.simple_cycles(G):
        # expand each vertex cycle into every choice of parallel edges
        n = len(cyc)
        choices = []
        for i in range(n):
            a, b = cyc[i], cyc[(i + 1) % n]
            choices.append([(e, 1 if c.edge_u[e] == a else -1) for e in G[a][b]])
        for combo in _product(choices):
            if n == 2 and combo[0][0] == combo[1][0]:
                continue
            wn = winding_number(c, combo)
            if abs(wn) != 1:
                continue
            walk = combo if wn == 1 else [(e, -s) for e, s in reversed(combo)]
            key = frozenset(e for e, _ in walk)
            if key not in seen:
                seen.add(key)
                out.append(list(walk))
    return out


def _product(choices):
    import itertools
    return [list(t) for t in itertools.product(*choices)]


def path_modulus(c: ToroidalComplex, p: float, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, warm_start: bool = True, **kw) -> SolveReport:
    """p-modulus of the winding-1 cycle family.

    With ``warm_start`` the capacity density ``rho0`` is supplied as an
    incumbent: it is admissible for every winding-1 walk, so its energy
    bounds the modulus from above and the solve can stop on the duality
    gap. The lightest walks through each edge under ``rho0`` seed the
    constraint set.
    """
    seeds, inc = (), None
    if warm_start:
        from .capacity import solve_capacity
        from .modulus import clamp_p

        rep = solve_capacity(c, clamp_p(p), tol=1e-10, raise_on_fail=False)
        inc = rep.rho0
        seeds = [m for m, w in WindingCycleOracle(c).edge_candidates(inc) if w <= 1.0 + 1e-6]
    return solve_modulus(c, WindingCycleOracle(c), p, tol=tol, max_iter=max_iter,
                         seed_members=seeds, incumbent=inc, **kw)
