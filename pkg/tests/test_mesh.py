import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stwave.mesh import (
    Boundary, Mesh, barycentric, is_conforming, make_initial_mesh, mesh_size,
    prolongate, refine_marked, refine_uniform,
)


def test_single_cell():
    m = make_initial_mesh(1)
    assert m.num_elements == 4
    assert m.num_nodes == 5


def test_four_cells_counts():
    m = make_initial_mesh(4)
    assert m.num_elements == 64
    # 5x5 grid nodes + 16 cell centers
    assert m.num_nodes == 41


def test_two_cells_equal_areas():
    m = make_initial_mesh(2)
    np.testing.assert_allclose(m.areas(), np.full(16, 1 / 16), rtol=0, atol=1e-15)


def test_initial_mesh_counterclockwise_and_tagged():
    m = make_initial_mesh(3)
    assert np.all(m.areas() > 0)
    x, t = m.nodes.T
    on_boundary = (np.isclose(x, 0) | np.isclose(x, 1) | np.isclose(t, 0) | np.isclose(t, 1))
    assert np.array_equal(m.boundary_tags != 0, on_boundary)
    corner = np.flatnonzero(np.isclose(x, 0) & np.isclose(t, 1))[0]
    assert m.boundary_tags[corner] == Boundary.LEFT | Boundary.TOP
    assert is_conforming(m)


def test_refinement_edge_is_longest_at_level0():
    m = make_initial_mesh(4)
    c = m.element_coords()
    ref = np.linalg.norm(c[:, 1] - c[:, 0], axis=1)
    np.testing.assert_allclose(ref, m.diameters())


def test_uniform_counts_and_areas():
    m0 = make_initial_mesh(4)
    m1 = refine_uniform(m0)
    assert m1.num_elements == 256
    assert m1.level == 1
    np.testing.assert_allclose(m1.areas(), m0.areas()[m1.parent] / 4, rtol=1e-14)
    assert is_conforming(m1)


def test_uniform_diameter_halves():
    m0 = make_initial_mesh(1)
    m2 = refine_uniform(refine_uniform(m0))
    assert mesh_size(m0)[0] == pytest.approx(1.0)
    assert mesh_size(m2)[0] == pytest.approx(mesh_size(m0)[0] / 4, rel=1e-14)


def test_mesh_size_level0():
    h_max, h_min = mesh_size(make_initial_mesh(4))
    assert h_max == pytest.approx(0.25)
    assert h_min <= h_max
    h1 = mesh_size(refine_uniform(make_initial_mesh(4)))[0]
    assert h1 == pytest.approx(0.125)


def test_refine_all_marked():
    m = make_initial_mesh(2)
    r = refine_marked(m, np.arange(m.num_elements))
    assert r.num_elements >= 2 * m.num_elements
    assert is_conforming(r)


def test_refine_single_interior_element_closure():
    m = refine_uniform(make_initial_mesh(2))
    c = m.centroids()
    k = int(np.argmin(np.linalg.norm(c - 0.5, axis=1)))
    r = refine_marked(m, [k])
    assert is_conforming(r)
    refined = np.flatnonzero(np.bincount(r.parent, minlength=m.num_elements) > 1)
    assert k in refined
    # the closure had to bisect neighbours of k as well
    assert len(refined) > 1


def test_refine_empty_marking_rejected():
    with pytest.raises(ValueError):
        refine_marked(make_initial_mesh(1), [])


def test_conformity_detects_hanging_node():
    # two triangles sharing the diagonal, one of them split at the diagonal midpoint
    nodes = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], float)
    elements = np.array([[0, 1, 2], [0, 4, 3], [4, 2, 3]])
    m = Mesh(nodes, elements, np.arange(3))
    assert not is_conforming(m)


def test_hierarchy_containment(uniform4):
    for lev in range(1, len(uniform4)):
        fine, coarse = uniform4[lev], uniform4[lev - 1]
        lam = barycentric(coarse.element_coords()[fine.parent], fine.centroids()[:, None, :])
        assert np.all(lam > -1e-12)


def test_prolongation_is_exact_for_p1(uniform4):
    coarse, fine = uniform4[1], uniform4[2]
    f = lambda p: 2 * p[:, 0] - 3 * p[:, 1] + 0.5
    np.testing.assert_allclose(prolongate(coarse, fine, f(coarse.nodes)), f(fine.nodes), atol=1e-14)


def test_child_to_parent_map(uniform4):
    assert uniform4.child_to_parent(2).shape == (uniform4[2].num_elements,)
    with pytest.raises(ValueError):
        uniform4.child_to_parent(0)


def test_mesh_is_immutable():
    m = make_initial_mesh(1)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 3.0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 2**31 - 1)), min_size=1, max_size=5))
def test_random_refinement_sequences(steps):
    m = make_initial_mesh(2)
    angle0 = m.min_angles().min()
    for uniform, seed in steps:
        if m.num_elements > 3000:
            break
        if uniform:
            m = refine_uniform(m)
        else:
            rng = np.random.default_rng(seed)
            k = max(1, m.num_elements // 10)
            m = refine_marked(m, rng.choice(m.num_elements, size=k, replace=False))
        assert is_conforming(m)
        assert np.all(m.areas() > 0)
        assert m.areas().sum() == pytest.approx(1.0, abs=1e-12)
        assert m.min_angles().min() >= angle0 / 2 - 1e-12
        x, t = m.nodes.T
        on_boundary = (np.abs(x) <= 1e-12) | (np.abs(x - 1) <= 1e-12) | (np.abs(t) <= 1e-12) | (np.abs(t - 1) <= 1e-12)
        assert np.array_equal(m.boundary_tags != 0, on_boundary)


def test_nvb_similarity_classes():
    m = make_initial_mesh(1)
    for seed in range(6):
        rng = np.random.default_rng(seed)
        m = refine_marked(m, rng.choice(m.num_elements, size=max(1, m.num_elements // 3), replace=False))
    c = m.element_coords()
    lengths = np.sort(np.stack([np.linalg.norm(c[:, (i + 1) % 3] - c[:, i], axis=1) for i in range(3)], 1), 1)
    shapes = np.unique(np.round(lengths / lengths[:, 2:], 10), axis=0)
    assert len(shapes) <= 4
