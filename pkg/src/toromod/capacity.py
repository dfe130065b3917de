"""
Degree-1 p-capacity
===================

The capacity is the minimum over real vertex potentials ``x`` of

    E(x) = sum_e mu_e * (|x_v - x_u + w_e| / ell_e)^p,

the quotient of the lifted problem by the deck translation. For ``p = 2``
this is a weighted graph Laplacian solve; otherwise damped Newton with
continuation in ``p`` starting from the quadratic solution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .complex import ToroidalComplex, as_density
from .covering import CircleMap, LiftedMap, edge_increments, lift
from .errors import DegenerateComplexError, DegreeError, NotConvergedError
from .modulus import clamp_p

log = logging.getLogger(__name__)


def incidence(c: ToroidalComplex) -> sparse.csr_matrix:
    """Signed edge-vertex incidence: row ``e`` is ``+1`` at ``v``, ``-1`` at ``u``."""
    E = c.n_edges
    rows = np.concatenate([np.arange(E), np.arange(E)])
    cols = np.concatenate([c.edge_v, c.edge_u])
    vals = np.concatenate([np.ones(E), -np.ones(E)])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(E, c.n_vertices))


def _increments(c, x):
    x = np.asarray(x, dtype=float)
    return x[c.edge_v] - x[c.edge_u] + c.w


def capacity_energy(c: ToroidalComplex, x, p: float) -> float:
    """Energy of the degree-1 lifted map with sheet-0 potentials ``x``."""
    t = _increments(c, x)
    return float(np.sum(c.mu_e * (np.abs(t) / c.ell) ** p))


def capacity_gradient(c: ToroidalComplex, x, p: float) -> np.ndarray:
    t = _increments(c, x)
    a = c.mu_e / c.ell ** p
    flux = p * a * np.abs(t) ** (p - 1) * np.sign(t)
    return np.bincount(c.edge_v, flux, c.n_vertices) - np.bincount(c.edge_u, flux, c.n_vertices)


def _hessian(c, B, x, p, floor):
    t = np.abs(_increments(c, x))
    a = c.mu_e / c.ell ** p
    if p < 2:
        t = np.maximum(t, floor)
    diag = p * (p - 1) * a * t ** (p - 2)
    return (B.T @ sparse.diags(diag) @ B).tocsc()


@dataclass
class CapacityReport:
    value: float
    potentials: np.ndarray
    rho0: np.ndarray
    kkt_residual: float
    iterations: int
    p: float
    converged: bool = True
    history: list = field(default_factory=list)

    @property
    def lift(self) -> LiftedMap:
        return LiftedMap(self.potentials, 1, 2)

    @property
    def minimizer(self) -> CircleMap:
        return CircleMap.from_reals(self.potentials)

    def as_dict(self) -> dict:
        return {"value": self.value, "p": self.p, "iterations": self.iterations,
                "kkt_residual": self.kkt_residual, "converged": self.converged}


def _reduced_solve(M, rhs):
    """Solve with the gauge fixed by ``x[0] = 0``."""
    Mr = M[1:, 1:].tocsc()
    try:
        y = splinalg.spsolve(Mr, rhs[1:])
    except RuntimeError as exc:  # singular factor
        raise DegenerateComplexError(str(exc)) from exc
    if not np.all(np.isfinite(y)):
        raise DegenerateComplexError("capacity system is singular; the energy is not coercive")
    return np.concatenate([[0.0], y])


def _solve_quadratic(c: ToroidalComplex, B):
    a = c.mu_e / c.ell ** 2
    L = (B.T @ sparse.diags(a) @ B).tocsr()
    rhs = -(B.T @ (a * c.w))
    return _reduced_solve(L, rhs)


def _newton(c, B, x, p, tol, max_iter, history):
    E = capacity_energy(c, x, p)
    for it in range(1, max_iter + 1):
        g = capacity_gradient(c, x, p)
        gn = float(np.linalg.norm(g))
        history.append((p, E, gn))
        if gn <= tol * (1.0 + E):
            return x, it - 1, True
        t = np.abs(_increments(c, x))
        floor = 1e-10 * max(float(t.max()), 1e-300)
        H = _hessian(c, B, x, p, floor)
        if p > 2:
            H = H + sparse.identity(H.shape[0], format="csc") * (1e-14 * H.diagonal().max())
        d = -_reduced_solve(H, g)
        slope = float(g @ d)
        if not slope < 0:
            d, slope = -g, -gn ** 2
        alpha = 1.0
        for _ in range(60):
            xn = x + alpha * d
            En = capacity_energy(c, xn, p)
            if En <= E + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        else:
            return x, it, False
        x, E = xn, En
    g = capacity_gradient(c, x, p)
    return x, max_iter, bool(np.linalg.norm(g) <= tol * (1.0 + E))


def solve_capacity(c: ToroidalComplex, p: float, tol: float = None, max_iter: int = 200,
                   init=None, raise_on_fail: bool = True) -> CapacityReport:
    """Degree-1 p-capacity of ``c`` and its minimizer.

    Parameters
    ----------
    p : float
        Exponent, clamped to [1.05, 20].
    tol : float
        Stationarity tolerance on ``|grad E| / (1 + E)``; defaults to 1e-8
        for ``p = 2`` and 1e-6 otherwise.
    init : array, optional
        Starting potentials; the quadratic solution is used by default.
    """
    p = clamp_p(p)
    if tol is None:
        tol = 1e-8 if p == 2 else 1e-6
    B = incidence(c)
    history: list = []
    if init is None:
        x = _solve_quadratic(c, B)
    else:
        x = np.asarray(init, dtype=float).copy()
        if x.shape != (c.n_vertices,):
            raise ValueError("init must hold one potential per vertex")
    iters = 0
    converged = True
    if p != 2 or init is not None:
        # continuation in p from the quadratic problem
        if init is None:
            n_steps = int(np.ceil(abs(np.log(p / 2.0)) / np.log(1.5)))
            ladder = [2.0 * (p / 2.0) ** (i / n_steps) for i in range(1, n_steps)] if n_steps > 1 else []
        else:
            ladder = []
        for q in ladder:
            x, k, _ = _newton(c, B, x, q, 1e-4, max_iter, history)
            iters += k
        x, k, converged = _newton(c, B, x, p, tol, max_iter, history)
        iters += k
        if converged:
            # one polishing step; Newton converges quadratically
            x2, k2, ok2 = _newton(c, B, x, p, 0.0, 1, history)
            if capacity_energy(c, x2, p) <= capacity_energy(c, x, p):
                x = x2
    x = x - x[0]
    t = _increments(c, x)
    rho0 = np.abs(t) / c.ell
    value = float(np.sum(c.mu_e * rho0 ** p))
    g = capacity_gradient(c, x, p)
    kkt = float(np.linalg.norm(g) / (1.0 + value))
    rep = CapacityReport(value=value, potentials=x, rho0=rho0, kkt_residual=kkt,
                         iterations=iters, p=p, converged=converged, history=history)
    if not converged and raise_on_fail:
        raise NotConvergedError(f"capacity solve stopped with residual {kkt:.3g}", rep)
    return rep


# ---------------------------------------------------------------------------

def _lifted_potentials(c: ToroidalComplex, f) -> np.ndarray:
    if isinstance(f, LiftedMap):
        if f.deg != 1:
            raise DegreeError(f"expected a degree-1 map, got degree {f.deg}")
        return f.base
    if isinstance(f, CircleMap):
        g = lift(c, f)
        if g.deg != 1:
            raise DegreeError(f"expected a degree-1 map, got degree {g.deg}")
        return g.base
    return np.asarray(f, dtype=float)


def minimal_upper_gradient(c: ToroidalComplex, f) -> np.ndarray:
    """Smallest density with ``|increment| <= rho * ell`` on every edge.

    ``f`` is an edge-fine CircleMap, or a LiftedMap / potential array for a
    degree-1 lifted map.
    """
    if isinstance(f, CircleMap):
        return np.abs(edge_increments(c, f)) / c.ell
    x = f.base if isinstance(f, LiftedMap) else np.asarray(f, dtype=float)
    deg = f.deg if isinstance(f, LiftedMap) else 1
    return np.abs(x[c.edge_v] - x[c.edge_u] + deg * c.w) / c.ell


def is_upper_gradient(c: ToroidalComplex, rho, f, rtol: float = 1e-12) -> bool:
    rho = as_density(rho, c)
    need = minimal_upper_gradient(c, f)
    return bool(np.all(need <= rho * (1 + rtol) + 1e-15))


@dataclass
class VariationalCheck:
    lhs: float
    rhs: float
    ok: bool

    @property
    def gap(self) -> float:
        return self.rhs - self.lhs


def variational_check(c: ToroidalComplex, report: CapacityReport, rho, f, p: float = None,
                      tol: float = 1e-8) -> VariationalCheck:
    """Compare ``cap`` with ``sum mu rho0^(p-1) rho`` for an upper gradient
    ``rho`` of the degree-1 map ``f``.

    Raises ValueError when ``rho`` is not an upper gradient of ``f``.
    """
    p = report.p if p is None else clamp_p(p)
    rho = as_density(rho, c)
    x = _lifted_potentials(c, f)
    if not is_upper_gradient(c, rho, x):
        raise ValueError("density is not an upper gradient of the supplied map")
    lhs = report.value
    rhs = float(np.sum(c.mu_e * report.rho0 ** (p - 1) * rho))
    return VariationalCheck(lhs=lhs, rhs=rhs, ok=bool(lhs <= rhs + tol))
