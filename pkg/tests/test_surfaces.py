import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import conj, ring_surf
from toromod import (CircleMap, DegreeError, EpsTooLargeError, NotSeparatingError, SeparatingCut,
                     WindingCutOracle, build_ladder, build_ring, build_solid_torus, degree, is_separating,
                     level_cut, scale_metric, solve_capacity, surface_modulus, surface_to_degree_one_map,
                     winding_cut_oracle)
from toromod.capacity import is_upper_gradient
from toromod.complex import angular_map_values, slice_edges
from toromod.surfaces import enumerate_separating_cuts, neighbourhood_edges, systole

from oracles import minimal_transversals, simple_winding_cycles


def test_ring_cut_single_edge(ring3):
    cut, w = winding_cut_oracle(ring3, np.ones(3))
    assert cut.edges.size == 1
    assert w == pytest.approx(1.0)


def test_flat_torus_meridian_cut():
    c = build_solid_torus(8, 3, 8)
    cut, w = winding_cut_oracle(c, np.ones(c.n_edges))
    explicit = SeparatingCut(slice_edges(c, 3)).H_weight(c)
    assert w <= explicit * (1 + 1e-9)
    assert abs(w - math.pi) / math.pi < 0.1
    assert is_separating(c, cut.edges)


def test_cut_avoids_expensive_slice():
    c = build_solid_torus(8, 2, 6)
    g = np.ones(c.n_edges)
    g[slice_edges(c, 7)] = 1e6
    cut, w = winding_cut_oracle(c, g)
    assert not np.intersect1d(cut.edges, slice_edges(c, 7)).size
    assert w < 10


def test_enumeration_matches_transversals():
    for off in range(3):
        c = build_ladder(4, 1, 1, offset=off)
        mine = sorted(tuple(s.edges.tolist()) for s in enumerate_separating_cuts(c))
        assert mine == sorted(minimal_transversals(c.n_edges, simple_winding_cycles(c)))


@given(seed=st.integers(0, 10_000), offset=st.integers(0, 2))
def test_cut_oracle_is_minimal(seed, offset):
    c = build_ladder(4, 1, 1, offset=offset)
    g = np.random.default_rng(seed).uniform(0, 2, c.n_edges)
    _, w = WindingCutOracle(c)(g)
    best = min(s.weight(c, g) for s in enumerate_separating_cuts(c))
    assert w == pytest.approx(best, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("m,L,A", [(3, 1, 1), (4, 2, 3), (8, 1, 3)])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_ring_closed_form(m, L, A, p):
    ps = conj(p)
    assert surface_modulus(build_ring(m, L, A), ps).value == pytest.approx(ring_surf(L, A, ps), rel=1e-6)


def test_cold_start_matches_warm():
    c = build_ladder(5, 1, 1, offset=1)
    a = surface_modulus(c, 2.5, warm_start=False).value
    b = surface_modulus(c, 2.5).value
    assert a == pytest.approx(b, rel=1e-6)


def test_flat_torus_near_inverse_pi():
    c = build_solid_torus(16, 3, 8)
    assert abs(surface_modulus(c, 2).value - 1 / math.pi) * math.pi < 0.05


@pytest.mark.parametrize("ps", [1.5, 3.0])
def test_scaling_law(ps):
    c = build_solid_torus(6, 1, 4)
    s = 0.6
    v = surface_modulus(c, ps, tol=1e-9).value
    vs = surface_modulus(scale_metric(c, s), ps, tol=1e-9).value
    assert vs == pytest.approx(s ** (c.q - ps * (c.q - 1)) * v, rel=1e-6)


def test_level_cut_ring(ring3):
    cut = level_cut(ring3, CircleMap([0, 1 / 3, 2 / 3]), 1 / 6)
    assert cut.edges.tolist() == [0]


def test_level_cut_nudges_vertex_value(ring3):
    cut = level_cut(ring3, CircleMap([0, 1 / 3, 2 / 3]), 1 / 3)
    assert cut.edges.size == 1


def test_level_cut_degree_zero(ring3):
    with pytest.raises(DegreeError):
        level_cut(ring3, CircleMap([0.3, 0.3, 0.3]), 0.5)


def test_minimizer_level_cut_near_meridian():
    c = build_solid_torus(12, 3, 8)
    rep = solve_capacity(c, 2)
    area = SeparatingCut(slice_edges(c, 0)).H_weight(c)
    for t in (0.1, 0.5, 0.83):
        cut = level_cut(c, rep.lift, t)
        assert abs(cut.H_weight(c) - area) / area < 0.1


@given(seed=st.integers(0, 10_000), t=st.floats(0, 1, exclude_max=True), noise=st.floats(0, 0.04))
def test_level_cuts_separate(seed, t, noise):
    c = build_solid_torus(9, 2, 4)
    x = angular_map_values(c) + noise * np.random.default_rng(seed).uniform(-1, 1, c.n_vertices)
    f = CircleMap.from_reals(x)
    assert degree(c, f) == 1
    assert is_separating(c, level_cut(c, f, t).edges)


def test_unseen_level_cuts_admissible():
    c = build_solid_torus(8, 2, 6, warp="sin:0.3")
    tol = 1e-6
    rep = surface_modulus(c, 2, tol=tol)
    cap = solve_capacity(c, 2)
    for t in np.random.default_rng(7).uniform(0, 1, 16):
        assert level_cut(c, cap.lift, t).weight(c, rep.density) >= 1 - tol


def _check_surface_map(c, S, eps, sm):
    assert sm.lift.deg == 1
    assert is_upper_gradient(c, sm.density, sm.lift)
    support = np.flatnonzero(sm.density)
    assert set(support.tolist()) <= set(neighbourhood_edges(c, S, eps).tolist())
    assert np.all(sm.density[support] >= 1 / sm.crossing_distance * (1 - 1e-12))


def test_surface_map_ring():
    c = build_ring(3, 1, 1)
    sm = surface_to_degree_one_map(c, [2], 1 / 3)
    _check_surface_map(c, [2], 1 / 3, sm)
    np.testing.assert_allclose(sm.lift.base[c.edge_v] - sm.lift.base[c.edge_u] + c.w, [0, 0, 1], atol=1e-12)
    assert np.count_nonzero(sm.density) == 1


def test_surface_map_meridian():
    c = build_solid_torus(12, 2, 6)
    S = slice_edges(c, 5)
    eps = systole(c) / 6
    sm = surface_to_degree_one_map(c, S, eps)
    _check_surface_map(c, S, eps, sm)
    assert sm.lift.deg == 1
    # a thin neighbourhood can put a whole turn on one edge; the raw
    # degree is only defined when every increment stays below 1/2
    if "degree" in sm.info:
        assert sm.info["degree"] == 1 == degree(c, sm.psi)


def test_surface_map_not_separating():
    c = build_solid_torus(8, 2, 6)
    S = slice_edges(c, 2)[1:]
    with pytest.raises(NotSeparatingError):
        surface_to_degree_one_map(c, S, 0.05)


def test_surface_map_eps_too_large():
    c = build_solid_torus(8, 1, 4)
    with pytest.raises(EpsTooLargeError):
        surface_to_degree_one_map(c, slice_edges(c, 0), 0.6)


@given(t=st.floats(0, 1, exclude_max=True), frac=st.floats(0.02, 0.45))
def test_surface_map_properties(t, frac):
    c = build_solid_torus(10, 2, 4, warp="twist:0.3")
    cap = solve_capacity(c, 2)
    cut = level_cut(c, cap.lift, t)
    eps = frac * systole(c)
    sm = surface_to_degree_one_map(c, cut, eps)
    _check_surface_map(c, cut.edges, eps, sm)


def test_distances_use_shortest_parallel_edge():
    from toromod.complex import ToroidalComplex
    from toromod.surfaces import _graph_distances

    # ring of three with a long duplicate of edge 0 -> 1
    c = ToroidalComplex(
        mu_v=np.zeros(3), edge_u=np.array([0, 1, 2, 0]), edge_v=np.array([1, 2, 0, 1]),
        ell=np.array([1.0, 1.0, 1.0, 5.0]), mu_e=np.ones(4), w=np.array([0, 0, 1, 0]),
        face_edges=np.zeros((0, 4)), face_signs=np.zeros((0, 4)), q=3.0,
    )
    d = _graph_distances(c, [0], c.ell)
    np.testing.assert_allclose(d, [0.0, 1.0, 1.0])
