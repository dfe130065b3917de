"""
Constraint-generation solver for discrete p-modulus problems.

The primal program is

    minimize  sum_e mu_e rho_e^p   subject to   sum_e c_{j,e} rho_e >= 1  for all members j,

over nonnegative edge densities. Members are produced lazily by an oracle
that returns the member of least mass for the current density. The
restricted problem is solved through its smooth concave dual in the
multipliers lambda_j >= 0, with the density recovered as

    rho_e = (s_e / (p mu_e))^(1/(p-1)),   s = C^T lambda.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy import linalg, optimize

from .complex import ToroidalComplex
from .errors import NoAdmissibleError, NotConvergedError

log = logging.getLogger(__name__)

P_MIN, P_MAX = 1.05, 20.0
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000


def clamp_p(p: float) -> float:
    """Clamp an exponent into the supported range, warning when it moves."""
    p = float(p)
    if not math.isfinite(p) or p <= 1:
        raise ValueError(f"exponent must satisfy 1 < p < inf, got {p}")
    q = min(max(p, P_MIN), P_MAX)
    if q != p:
        warnings.warn(f"exponent {p} clamped to {q}", RuntimeWarning, stacklevel=3)
    return q


def conjugate(p: float) -> float:
    return p / (p - 1.0)


@dataclass(frozen=True, eq=False)
class Member:
    """One family member: an edge support with positive coefficients."""

    support: np.ndarray
    coeffs: np.ndarray
    payload: object = None

    def __post_init__(self):
        s = np.asarray(self.support, dtype=np.int64).reshape(-1)
        cf = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if s.shape != cf.shape:
            raise ValueError("support and coefficients differ in length")
        order = np.argsort(s, kind="stable")
        s, cf = s[order], cf[order]
        s.setflags(write=False)
        cf.setflags(write=False)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "coeffs", cf)

    @property
    def key(self) -> tuple:
        return tuple(self.support.tolist()), self.coeffs.tobytes()

    def mass(self, rho) -> float:
        return float(np.dot(self.coeffs, np.asarray(rho)[self.support]))

    def is_null(self) -> bool:
        return self.support.size == 0 or not np.any(self.coeffs > 0)

    def dense(self, n_edges: int) -> np.ndarray:
        row = np.zeros(n_edges)
        row[self.support] = self.coeffs
        return row


class ConstraintOracle(Protocol):
    """Interface of a family of linear admissibility constraints."""

    complex: ToroidalComplex
    can_enumerate: bool

    def query(self, rho: np.ndarray) -> tuple[Member, float]:
        """Member of least mass under ``rho`` and that mass."""

    def enumerate(self) -> list[Member]:
        """Every member of the family (tiny instances only)."""


@dataclass
class SolveReport:
    value: float
    density: np.ndarray
    active_members: list
    weights: np.ndarray
    min_constraint: float
    iterations: int
    converged: bool
    p: float
    stationarity: float = 0.0
    slackness: float = 0.0
    n_members: int = 0
    log: list = field(default_factory=list)
    lower_bound: float = 0.0
    upper_bound: float = math.inf
    certificate: str = "none"

    @property
    def gap(self) -> float:
        """Relative gap between the best admissible energy and the dual bound."""
        if not math.isfinite(self.upper_bound) or self.upper_bound <= 0:
            return math.inf
        return (self.upper_bound - self.lower_bound) / self.upper_bound

    @property
    def kkt(self) -> dict:
        return {
            "feasibility": max(0.0, 1.0 - self.min_constraint),
            "stationarity": self.stationarity,
            "slackness": self.slackness,
        }

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "p": self.p,
            "iterations": self.iterations,
            "converged": self.converged,
            "min_constraint": self.min_constraint,
            "n_members": self.n_members,
            "n_active": len(self.active_members),
            "certificate": self.certificate,
            "gap": self.gap,
            **self.kkt,
        }


# ---------------------------------------------------------------------------
# restricted dual

class _Dual:
    """Negated dual objective ``f(lambda) = -sum(lambda) + (1-1/p) sum s rho``."""

    def __init__(self, mu: np.ndarray, p: float):
        self.mu = mu
        self.p = p
        self.r = 1.0 / (p - 1.0)
        self.scale = (p * mu) ** (-self.r)  # rho = scale * s^r

    def rho(self, s):
        return self.scale * np.power(s, self.r)

    def value(self, lam, C):
        s = C.T @ lam
        return -lam.sum() + (1.0 - 1.0 / self.p) * np.dot(s, self.rho(s))

    def grad(self, lam, C):
        s = C.T @ lam
        return C @ self.rho(s) - 1.0

    def single_member_weight(self, row):
        """Optimal multiplier if ``row`` were the only member."""
        nz = row > 0
        K = np.sum(row[nz] * (row[nz] / (self.p * self.mu[nz])) ** self.r)
        return K ** (1.0 - self.p)


def _solve_dual(dual: _Dual, C: np.ndarray, lam: np.ndarray, tol: float, max_newton: int = 200):
    """Projected Newton (bound-constrained, Armijo along the projection arc).

    Returns the multipliers and the final natural residual
    ``max |min(lambda, grad)|``.
    """
    sigma = 1e-4
    lam = np.maximum(lam, 0.0)
    if C.shape[0] > 8:
        # Newton stalls on large degenerate row sets; L-BFGS-B gets close first
        def fg(x):
            return dual.value(x, C), C @ dual.rho(C.T @ x) - 1.0
        qn = optimize.minimize(fg, lam, jac=True, method="L-BFGS-B", bounds=[(0.0, None)] * lam.size,
                               options={"maxiter": 20000, "ftol": 1e-16, "gtol": 1e-12, "maxcor": 30})
        if np.all(np.isfinite(qn.x)) and qn.fun <= dual.value(lam, C):
            lam = np.maximum(qn.x, 0.0)
    f = dual.value(lam, C)
    res = np.inf
    for _ in range(max_newton):
        s = C.T @ lam
        rho = dual.rho(s)
        g = C @ rho - 1.0
        res = float(np.max(np.abs(np.minimum(lam, g))))
        if res <= tol:
            break
        eps_act = min(1e-12 + res, 1e-3) * max(1.0, float(lam.max(initial=0.0)))
        active = (lam <= eps_act) & (g > 0)
        free = ~active
        d = np.zeros_like(lam)
        d[active] = -g[active] * max(float(lam.max(initial=0.0)), 1.0)
        if free.any():
            smax = float(s.max(initial=0.0))
            s_eff = np.maximum(s, 1e-12 * smax if smax > 0 else 1e-300)
            D = dual.r * dual.scale * np.power(s_eff, dual.r - 1.0)
            Cf = C[free]
            H = (Cf * D) @ Cf.T
            H[np.diag_indices_from(H)] += 1e-13 * max(np.trace(H) / H.shape[0], 1e-300)
            try:
                d[free] = -linalg.solve(H, g[free], assume_a="pos")
            except (linalg.LinAlgError, ValueError):
                d[free] = -np.linalg.lstsq(H, g[free], rcond=None)[0]
            if not np.all(np.isfinite(d)):
                d = -g
        alpha = 1.0
        accepted = False
        for _ls in range(60):
            cand = np.maximum(lam + alpha * d, 0.0)
            fc = dual.value(cand, C)
            if fc <= f + sigma * np.dot(g, cand - lam):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # fall back to a projected gradient step
            alpha = 1.0
            for _ls in range(80):
                cand = np.maximum(lam - alpha * g, 0.0)
                fc = dual.value(cand, C)
                if fc <= f + sigma * np.dot(g, cand - lam):
                    accepted = True
                    break
                alpha *= 0.5
        if not accepted or np.array_equal(cand, lam):
            break
        stalled = f - fc <= 8 * np.finfo(float).eps * abs(f)
        lam, f = cand, fc
        if stalled:
            break
    return lam, res


def solve_modulus(c: ToroidalComplex, oracle: ConstraintOracle, p: float,
                  tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  inner_tol: float = 1e-12, raise_on_fail: bool = True,
                  batch: int = 16, seed_members: Sequence = (), incumbent=None) -> SolveReport:
    """p-modulus of the family behind ``oracle`` by constraint generation.

    Each round solves the dual restricted to the members seen so far and
    asks the oracle for the lightest members under the resulting density.
    The solve stops when either

    * the lightest member has mass at least ``1 - tol`` (the restricted
      density is reported), or
    * the best admissible density found so far has energy within a factor
      ``1 + tol`` of the restricted dual bound (that density is reported).

    Admissible densities come from rescaling each iterate by its least
    mass, and from ``incumbent`` when given.

    Raises
    ------
    NoAdmissibleError
        The oracle produced a member with empty support or zero coefficients.
    NotConvergedError
        ``max_iter`` rounds passed without meeting ``tol``; the partial
        report is attached.

    ``seed_members`` are added before the first oracle call; they only
    speed up convergence, the stopping test always queries the oracle.
    """
    p = clamp_p(p)
    mu = c.mu_e
    E = c.n_edges
    dual = _Dual(mu, p)
    members: list[Member] = []
    keys: dict = {}
    rows = np.zeros((0, E))
    lam = np.zeros(0)
    rho = np.zeros(E)
    history = []
    converged = False
    min_mass = 0.0
    it = 0

    def lightest(r):
        cands = oracle.candidates(r) if hasattr(oracle, "candidates") else [oracle.query(r)]
        if cands[0][0].is_null():
            raise NoAdmissibleError("family contains a member of zero mass; modulus is infinite")
        return cands

    best, best_mass, upper = None, 0.0, math.inf
    if incumbent is not None:
        inc = np.asarray(incumbent, dtype=float)
        m0 = float(lightest(inc)[0][1])
        if m0 > 0:
            best = inc / min(m0, 1.0)
            best_mass = max(m0, 1.0) if m0 >= 1.0 else 1.0
            upper = float(np.sum(mu * best ** p))
    lower = 0.0

    for member in seed_members:
        if member.is_null() or member.key in keys:
            continue
        keys[member.key] = len(members)
        members.append(member)
    if members:
        rows = np.array([m.dense(E) for m in members])
        lam = np.array([dual.single_member_weight(r) for r in rows]) / len(members)
        lam, _ = _solve_dual(dual, rows, lam, inner_tol)
        rho = dual.rho(rows.T @ lam)
    by_gap = False
    for it in range(1, max_iter + 1):
        cands = lightest(rho)
        min_mass = float(cands[0][1])
        history.append(min_mass)
        if rows.shape[0]:
            lower = max(lower, -dual.value(lam, rows))
        if min_mass > 0:
            e = float(np.sum(mu * rho ** p)) / min_mass ** p
            if e < upper:
                best, best_mass, upper = rho / min_mass, 1.0, e
        log.debug("round %d: members=%d min mass=%.12g bounds=[%.12g, %.12g]",
                  it, len(members), min_mass, lower, upper)
        if min_mass >= 1.0 - tol:
            converged = True
            break
        if math.isfinite(upper) and upper - lower <= tol * upper:
            converged = by_gap = True
            break
        for member, weight in cands[:batch]:
            if weight >= 1.0 - tol:
                break
            if member.is_null():
                raise NoAdmissibleError("family contains a member of zero mass; modulus is infinite")
            if member.key in keys:
                # the restricted solve was not accurate enough for this member
                j = keys[member.key]
                lam[j] = max(lam[j], dual.single_member_weight(rows[j]) * 1e-3)
                continue
            keys[member.key] = len(members)
            members.append(member)
            row = member.dense(E)
            rows = np.vstack([rows, row])
            lam = np.append(lam, dual.single_member_weight(row) * max(1.0 - weight, 1e-3))
        lam, _ = _solve_dual(dual, rows, lam, inner_tol)
        rho = dual.rho(rows.T @ lam)
    else:
        it = max_iter

    if by_gap:
        rho, min_mass = best, best_mass
    report = _make_report(dual, rows, lam, rho, members, min_mass, it, converged, p, history)
    report.lower_bound = lower
    report.upper_bound = upper
    report.certificate = "gap" if by_gap else ("feasibility" if converged else "none")
    if not converged and raise_on_fail:
        raise NotConvergedError(
            f"modulus solve stopped after {it} rounds with min mass {min_mass:.3g}", report)
    return report


def _make_report(dual, rows, lam, rho, members, min_mass, it, converged, p, history):
    s = rows.T @ lam if rows.shape[0] else np.zeros_like(rho)
    stationarity = float(np.max(np.abs(rho - dual.rho(s)), initial=0.0))
    masses = rows @ rho if rows.shape[0] else np.zeros(0)
    slack = float(np.max(np.abs(lam * (masses - 1.0)), initial=0.0))
    active = [m for m, l in zip(members, lam) if l > 0]
    value = float(np.sum(dual.mu * rho ** p))
    return SolveReport(
        value=value, density=rho, active_members=active, weights=lam[lam > 0].copy(),
        min_constraint=min_mass, iterations=it, converged=converged, p=p,
        stationarity=stationarity, slackness=slack, n_members=len(members), log=history,
    )


# ---------------------------------------------------------------------------
# brute force

MAX_BRUTE = 64


def brute_force_modulus(c: ToroidalComplex, members: Sequence, p: float) -> float:
    """Modulus with every member present, solved as one conic program.

    Intended as a test oracle for small families.
    """
    import cvxpy as cp

    p = clamp_p(p)
    members = list(members)
    if len(members) > MAX_BRUTE or c.n_edges > MAX_BRUTE:
        raise ValueError(f"brute force is limited to {MAX_BRUTE} members and edges")
    if not members:
        return 0.0
    rows = []
    for m in members:
        if not isinstance(m, Member):
            m = Member(m[0], m[1])
        if m.is_null():
            raise NoAdmissibleError("family contains a member of zero mass")
        rows.append(m.dense(c.n_edges))
    C = np.array(rows)
    used = np.flatnonzero(C.any(axis=0))
    x = cp.Variable(used.size, nonneg=True)
    obj = cp.Minimize(c.mu_e[used] @ cp.power(x, p))
    prob = cp.Problem(obj, [C[:, used] @ x >= 1])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise NotConvergedError(f"brute-force solve ended with status {prob.status}")
    return float(prob.value)
