import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perskern.filtrations import (CUBICAL, FilteredComplex, WeightedGraph, binarize, cubical_complex,
                                  graph_sublevel_filtration, height_filtration, height_values, jaccard_weights,
                                  shortest_path_weights, takens_embedding, vietoris_rips)
from perskern.persistence import compute_diagram


def cell_values(fc):
    return {c: v for c, v in zip(fc.cells, fc.values.tolist())}


def test_rips_two_points():
    fc = vietoris_rips([[0, 0], [1, 0]], max_dim=0, max_scale=2)
    assert cell_values(fc) == {(0,): 0.0, (1,): 0.0, (0, 1): 1.0}


def test_rips_unit_square():
    fc = vietoris_rips([[0, 0], [1, 0], [1, 1], [0, 1]], max_dim=1)
    vals = cell_values(fc)
    r2 = math.sqrt(2)
    sides = [(0, 1), (1, 2), (2, 3), (0, 3)]
    assert all(vals[e] == 1.0 for e in sides)
    assert vals[(0, 2)] == pytest.approx(r2) and vals[(1, 3)] == pytest.approx(r2)
    tris = [c for c, d in zip(fc.cells, fc.dims) if d == 2]
    assert len(tris) == 4 and all(vals[t] == pytest.approx(r2) for t in tris)
    assert max(fc.dims) == 2


def test_rips_single_point_and_empty():
    fc = vietoris_rips([[3.0, 1.0]])
    assert fc.cells == ((0,),) and fc.values.tolist() == [0.0]
    with pytest.raises(ValueError):
        vietoris_rips(np.zeros((0, 2)))


def test_rips_radius_and_chebyshev():
    fc = vietoris_rips([[0, 0], [1, 2]], max_dim=0, metric="chebyshev", scale="radius")
    assert cell_values(fc)[(0, 1)] == 1.0


@given(st.integers(1, 9), st.integers(0, 10_000))
def test_rips_monotone_and_rigid_invariant(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    fc = vietoris_rips(X, max_dim=1)
    fc.check_monotone()
    th = rng.uniform(0, 2 * np.pi)
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    fc2 = vietoris_rips(X @ R.T + rng.normal(size=2), max_dim=1)
    assert fc.cells == fc2.cells
    assert np.allclose(fc.values, fc2.values, atol=1e-9, rtol=0)


@given(st.integers(2, 8), st.integers(0, 10_000))
def test_rips_permutation_invariant_diagram(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    perm = rng.permutation(n)
    a = compute_diagram(vietoris_rips(X, 1), max_dim=1)
    b = compute_diagram(vietoris_rips(X[perm], 1), max_dim=1)
    assert sorted(a) == sorted(b)


def test_check_monotone_reports_pair():
    fc = FilteredComplex.from_cells([((0,), 0, 0.0), ((1,), 0, 2.0), ((0, 1), 1, 1.0)])
    with pytest.raises(ValueError, match=r"\(1,\).*\(0, 1\)"):
        fc.check_monotone()
    with pytest.raises(ValueError, match="missing facets"):
        FilteredComplex.from_cells([((0,), 0, 0.0), ((0, 1), 1, 1.0)]).check_monotone()


def test_graph_triangle_min_incident():
    g = WeightedGraph(3, ((0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)))
    fc = graph_sublevel_filtration(g)
    vals = cell_values(fc)
    assert [vals[(i,)] for i in range(3)] == [1.0, 1.0, 2.0]
    assert [vals[(0, 1)], vals[(1, 2)], vals[(0, 2)]] == [1.0, 2.0, 3.0]
    D = compute_diagram(fc)
    assert (1, 3.0, math.inf) in list(D)


def test_graph_small_cases():
    fc = graph_sublevel_filtration(WeightedGraph(2, ((0, 1, 5.0),)))
    assert sorted(fc.values.tolist()) == [5.0, 5.0, 5.0]
    fc = graph_sublevel_filtration(WeightedGraph(3))
    assert fc.values.tolist() == [0.0, 0.0, 0.0]
    fc = graph_sublevel_filtration(WeightedGraph(3, ((0, 1, 2.0),)), vertex_birth="zero")
    assert cell_values(fc)[(0,)] == 0.0


def test_graph_triangles_flag():
    g = WeightedGraph(3, ((0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)))
    fc = graph_sublevel_filtration(g, include_triangles=True)
    assert cell_values(fc)[(0, 1, 2)] == 3.0
    assert all(p.dim == 0 for p in compute_diagram(fc))


def test_graph_rejects_bad_edges():
    with pytest.raises(ValueError):
        WeightedGraph(2, ((0, 0, 1.0),))
    with pytest.raises(ValueError):
        WeightedGraph(2, ((0, 1, 1.0), (1, 0, 2.0)))
    with pytest.raises(ValueError):
        WeightedGraph(2, ((0, 2, 1.0),))


def test_shortest_path_weights():
    path = shortest_path_weights(WeightedGraph(3, ((0, 1), (1, 2))))
    assert path.edges == ((0, 1, 1.0), (0, 2, 2.0), (1, 2, 1.0))
    tri = shortest_path_weights(WeightedGraph(3, ((0, 1), (1, 2), (0, 2))))
    assert all(w == 1.0 for *_, w in tri.edges)
    assert shortest_path_weights(WeightedGraph(2)).edges == ()


def test_jaccard_weights():
    tri = jaccard_weights(WeightedGraph(3, ((0, 1), (1, 2), (0, 2))), complement=False)
    assert all(w == pytest.approx(1 / 3) for *_, w in tri.edges)
    iso = jaccard_weights(WeightedGraph(2, ((0, 1),)), complement=False)
    assert iso.edges[0][2] == 0.0
    two = jaccard_weights(WeightedGraph(4, ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3))), complement=False)
    assert dict(((u, v), w) for u, v, w in two.edges)[(0, 1)] == pytest.approx(0.5)
    comp = jaccard_weights(WeightedGraph(3, ((0, 1), (1, 2), (0, 2))))
    assert all(w == pytest.approx(2 / 3) for *_, w in comp.edges)


@given(st.integers(2, 9), st.integers(0, 10_000))
def test_graph_weight_ranges(n, seed):
    rng = np.random.default_rng(seed)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.4]
    g = WeightedGraph(n, tuple(edges))
    assert all(0 <= w <= 1 for *_, w in jaccard_weights(g).edges)
    sp = shortest_path_weights(g)
    assert all(w >= 1 and w == int(w) for *_, w in sp.edges)
    graph_sublevel_filtration(sp, include_triangles=True).check_monotone()


def test_binarize():
    assert binarize([[0, 200], [90, 128]]).tolist() == [[0, 1], [0, 1]]
    assert binarize(np.zeros((2, 2))).sum() == 0
    assert binarize([[3, 4]], threshold=-1).tolist() == [[1, 1]]


def test_height_values():
    assert height_values([[1, 1, 1]], (0, 1)).tolist() == [[0, 1, 2]]
    bg = height_values(np.zeros((2, 3)), (1, 0))
    assert np.all(bg == 2 * (2 + 3))
    up = height_values(np.ones((3, 1)), (1, 0))[:, 0]
    down = height_values(np.ones((3, 1)), (-1, 0))[:, 0]
    assert np.array_equal(np.argsort(up), np.argsort(down)[::-1])
    with pytest.raises(ValueError):
        height_values(np.ones((2, 2)), (1, 1))


def test_height_filtration_all_background():
    fc = height_filtration(np.zeros((2, 2)), (1, 0), h_inf=50)
    assert np.all(fc.values == 50)


def test_cubical_complex_structure():
    fc = cubical_complex(np.array([[0.0, 1.0], [2.0, 3.0]]))
    assert fc.kind == CUBICAL
    counts = np.bincount(fc.dims)
    assert counts.tolist() == [9, 12, 4]
    fc.check_monotone()
    # a ring of pixels encloses one hole
    ring = np.ones((3, 3))
    ring[1, 1] = 0
    D = compute_diagram(height_filtration(ring, (1, 0)))
    assert sum(1 for p in D if p.dim == 1) == 1


def test_takens():
    ts = [1, 2, 3, 4, 5]
    assert takens_embedding(ts, 1, 2).tolist() == [[1, 2], [2, 3], [3, 4], [4, 5]]
    assert takens_embedding(ts, 2, 2).tolist() == [[1, 3], [2, 4], [3, 5]]
    assert takens_embedding(ts, 1, 1).tolist() == [[1], [2], [3], [4], [5]]
    with pytest.raises(ValueError):
        takens_embedding(ts, 3, 3)


@given(st.integers(1, 40), st.integers(1, 5), st.integers(1, 5))
def test_takens_count(T, delay, edim):
    ts = np.arange(T, dtype=float)
    expected = T - (edim - 1) * delay
    if expected < 1:
        with pytest.raises(ValueError):
            takens_embedding(ts, delay, edim)
    else:
        assert len(takens_embedding(ts, delay, edim)) == expected
