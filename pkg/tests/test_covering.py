import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import hand_degree
from toromod import (CircleMap, DegreeError, FaceInconsistentError, LiftedMap, NotEdgeFineError, build_ladder,
                     build_ring, build_solid_torus, degree, edge_increments, lift, project, unroll,
                     winding_number)
from toromod.complex import angular_map_values
from toromod.covering import lift_from_potentials, winding_one_cycle


def test_ring_increments(ring3):
    np.testing.assert_allclose(edge_increments(ring3, CircleMap([0, 1 / 3, 2 / 3])), 1 / 3)
    np.testing.assert_allclose(edge_increments(ring3, CircleMap([0.7, 0.7, 0.7])), 0)


def test_half_step_not_edge_fine():
    with pytest.raises(NotEdgeFineError):
        edge_increments(build_ring(4, 1, 1), CircleMap([0, 0.5, 0, 0.5]))


def test_face_inconsistent():
    c = build_solid_torus(4, 1, 3)
    rng = np.random.default_rng(0)
    # independent values with large jumps cannot be face-consistent everywhere
    with pytest.raises((FaceInconsistentError, NotEdgeFineError)):
        for _ in range(50):
            edge_increments(c, CircleMap(rng.uniform(0, 1, c.n_vertices)))


@pytest.mark.parametrize("m,vals,deg", [
    (3, [0, 1 / 3, 2 / 3], 1),
    (3, [0.2, 0.2, 0.2], 0),
    (6, [0, 1 / 3, 2 / 3, 0, 1 / 3, 2 / 3], 2),
    (5, [0, 0.8, 0.6, 0.4, 0.2], -1),
])
def test_ring_degree(m, vals, deg):
    c = build_ring(m, 1, 1)
    assert degree(c, CircleMap(vals)) == deg
    assert hand_degree(vals, [(i, (i + 1) % m) for i in range(m)]) == deg


def test_unroll_ring_sizes(ring3):
    cov1 = unroll(ring3, 1)
    assert cov1.n_edges == 3
    assert cov1.n_vertices == 4
    assert unroll(ring3, 2).n_edges == 6
    with pytest.raises(ValueError):
        unroll(ring3, 0)


def test_unroll_ring_is_path(ring3):
    cov = unroll(ring3, 2)
    deg = np.bincount(np.concatenate([cov.edge_u, cov.edge_v]), minlength=cov.n_vertices)
    assert sorted(deg.tolist()) == [1, 1, 2, 2, 2, 2, 2]
    assert deg[cov.M0[0]] == 1 and deg[cov.M1[0]] == 1


def test_unroll_local_isometry():
    c = build_solid_torus(8, 2, 4)
    cov = unroll(c, 2)
    np.testing.assert_array_equal(cov.ell, c.ell[cov.edge_base])
    np.testing.assert_array_equal(cov.mu_e, c.mu_e[cov.edge_base])
    np.testing.assert_array_equal(cov.h, c.h[cov.edge_base])
    # each lifted edge joins copies of its base endpoints
    np.testing.assert_array_equal(cov.vertex_base[cov.edge_u], c.edge_u[cov.edge_base])
    np.testing.assert_array_equal(cov.vertex_base[cov.edge_v], c.edge_v[cov.edge_base])
    heads = set(np.unique(c.edge_v[c.w == 1]).tolist())
    inside = sum(1 for u, v, w in zip(c.edge_u, c.edge_v, c.w) if w == 0 and u in heads and v in heads)
    assert cov.n_edges == 2 * c.n_edges + inside


def test_deck_shift(ring3):
    cov = unroll(ring3, 2)
    i = cov.index(1, 0)
    assert cov.deck(i) == cov.index(1, 1)
    assert cov.deck(cov.index(1, 1)) is None


def test_lift_ring(ring3):
    g = lift(ring3, CircleMap([0, 1 / 3, 2 / 3]), K=2)
    np.testing.assert_allclose(g.values, [[0, 1 / 3, 2 / 3], [1, 4 / 3, 5 / 3]])
    assert g.deg == 1


def test_lift_constant(ring3):
    g = lift(ring3, CircleMap([0.25] * 3), K=3)
    assert g.deg == 0
    np.testing.assert_allclose(g.values, 0.25)


def test_project_round_trip(ring3):
    f = CircleMap([0.1, 0.5, 0.8])
    np.testing.assert_allclose(project(lift(ring3, f)).values, f.values)


def test_project_rejects_broken_deck():
    with pytest.raises(DegreeError):
        LiftedMap.from_values([[0, 0.3, 0.6], [1, 1.3, 1.7]])


def test_winding_number_checks(ring3):
    assert winding_number(ring3, [(0, 1), (1, 1), (2, 1)]) == 1
    assert winding_number(ring3, [(2, -1), (1, -1), (0, -1)]) == -1
    with pytest.raises(ValueError):
        winding_number(ring3, [(0, 1), (2, 1)])


def test_winding_one_cycle_on_ladder():
    c = build_ladder(5, 1, 1, offset=2)
    assert winding_number(c, winding_one_cycle(c)) == 1


def _random_closed_walk(c, rng, start, n):
    adj = [[] for _ in range(c.n_vertices)]
    for e in range(c.n_edges):
        adj[c.edge_u[e]].append((e, 1, int(c.edge_v[e])))
        adj[c.edge_v[e]].append((e, -1, int(c.edge_u[e])))
    walk, v = [], start
    for _ in range(n):
        e, s, v = adj[v][rng.integers(len(adj[v]))]
        walk.append((e, s))
    # return along a shortest hop path
    prev = {v: None}
    queue = [v]
    while start not in prev:
        x = queue.pop(0)
        for e, s, y in adj[x]:
            if y not in prev:
                prev[y] = (x, e, s)
                queue.append(y)
    back = []
    y = start
    while prev[y] is not None:
        x, e, s = prev[y]
        back.append((e, s))
        y = x
    return walk + back[::-1]


@given(seed=st.integers(0, 10_000), n1=st.integers(0, 12), n2=st.integers(0, 12))
def test_winding_additive_and_odd(seed, n1, n2):
    c = build_solid_torus(4, 1, 3)
    rng = np.random.default_rng(seed)
    a = _random_closed_walk(c, rng, 0, n1)
    b = _random_closed_walk(c, rng, 0, n2)
    wa, wb = winding_number(c, a), winding_number(c, b)
    assert winding_number(c, a + b) == wa + wb
    assert winding_number(c, [(e, -s) for e, s in reversed(a)]) == -wa


def _smooth_map(c, d, noise, seed):
    rng = np.random.default_rng(seed)
    x = d * angular_map_values(c) + noise * rng.uniform(-1, 1, c.n_vertices)
    return CircleMap.from_reals(x)


@given(d=st.integers(-2, 2), seed=st.integers(0, 10_000), noise=st.floats(0, 0.04))
def test_degree_survives_lift_projection(d, seed, noise):
    c = build_solid_torus(12, 2, 4)
    f = _smooth_map(c, d, noise, seed)
    g = lift(c, f, K=3)
    assert g.deg == d
    assert degree(c, project(g)) == degree(c, f) == d
    np.testing.assert_allclose(np.mod(g.values[2] - f.values + 1e-9, 1.0), 1e-9, atol=1e-9)


@given(seed=st.integers(0, 10_000), noise=st.floats(0, 0.04))
def test_degree_independent_of_cycle(seed, noise):
    c = build_solid_torus(9, 2, 4)
    f = _smooth_map(c, 1, noise, seed)
    delta = edge_increments(c, f)
    nd = 1 + 2 * 4
    # the core circle through each disk vertex is a winding-1 cycle
    sums = [sum(delta[s * nd + j] for s in range(9)) for j in range(nd)]
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)


@given(x=st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_lift_from_potentials_round_trip(x):
    g = lift_from_potentials(x, 1, 2)
    d = np.mod(project(g).values - np.asarray(x) + 0.5, 1.0) - 0.5
    np.testing.assert_allclose(d, 0, atol=1e-12)
