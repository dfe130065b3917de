import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import ring_cap, simple_winding_cycles
from toromod import (WindingCycleOracle, build_ladder, build_ring, build_solid_torus, path_modulus,
                     scale_metric, solve_capacity, winding_cycle_oracle, winding_number)
from toromod.complex import slice_edges


def test_ring_full_cycle(ring3):
    cyc, w = winding_cycle_oracle(ring3, np.ones(3))
    assert w == pytest.approx(1.0, rel=1e-9)
    assert sorted(cyc.edges.tolist()) == [0, 1, 2]
    assert winding_number(ring3, cyc.walk) == 1


def test_flat_torus_core_circle():
    c = build_solid_torus(10, 2, 6, L=1.7)
    cyc, w = winding_cycle_oracle(c, np.ones(c.n_edges))
    assert w == pytest.approx(1.7, rel=1e-9)
    assert winding_number(c, cyc.walk) == 1
    assert len(cyc.walk) == 10


def test_free_slab_detour():
    c = build_solid_torus(10, 2, 6)
    rho = np.ones(c.n_edges)
    for s in range(3):
        rho[slice_edges(c, s)] = 0.0
    _, w = winding_cycle_oracle(c, rho)
    nd = 1 + 2 * 6
    core = [(s * nd, 1) for s in range(10)]
    explicit = sum(rho[e] * c.ell[e] for e, _ in core)
    assert w <= explicit + 1e-12
    assert w == pytest.approx(0.7, rel=1e-9)


@given(seed=st.integers(0, 10_000), offset=st.integers(0, 2))
def test_oracle_is_minimal_over_simple_cycles(seed, offset):
    c = build_ladder(4, 1, 1, offset=offset)
    rho = np.random.default_rng(seed).uniform(0, 2, c.n_edges)
    _, w = winding_cycle_oracle(c, rho)
    weights = [sum(rho[e] * c.ell[e] for e in cyc) for cyc in simple_winding_cycles(c)]
    assert w == pytest.approx(min(weights), rel=1e-9, abs=1e-12)


def test_enumeration_matches_dfs():
    for off in range(3):
        c = build_ladder(4, 1, 1, offset=off)
        mine = sorted(tuple(m.support.tolist()) for m in WindingCycleOracle(c).enumerate())
        assert mine == simple_winding_cycles(c)


@pytest.mark.parametrize("m,L,A", [(3, 1, 1), (4, 2, 3), (8, 2, 1)])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_ring_closed_form(m, L, A, p):
    assert path_modulus(build_ring(m, L, A), p).value == pytest.approx(ring_cap(L, A, p), rel=1e-6)


def test_flat_torus_near_pi():
    c = build_solid_torus(16, 3, 8)
    assert abs(path_modulus(c, 2).value - math.pi) / math.pi < 0.05


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_scaling_law(p):
    c = build_solid_torus(6, 1, 4)
    s = 1.7
    v = path_modulus(c, p, tol=1e-9).value
    vs = path_modulus(scale_metric(c, s), p, tol=1e-9).value
    assert vs == pytest.approx(s ** (c.q - p) * v, rel=1e-6)


@pytest.mark.parametrize("warp", ["flat", "sin:0.5", "twist:0.4"])
@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_path_below_capacity(warp, p):
    c = build_solid_torus(8, 2, 4, warp=warp)
    tol = 1e-6
    assert path_modulus(c, p, tol=tol).value <= solve_capacity(c, p).value * (1 + tol) + tol


@pytest.mark.parametrize("offset", [0, 1, 2])
def test_every_enumerated_cycle_admissible(offset):
    c = build_ladder(5, 1, 1, offset=offset)
    tol = 1e-6
    rep = path_modulus(c, 3, tol=tol)
    for m in WindingCycleOracle(c).enumerate():
        assert m.mass(rep.density) >= 1 - tol
