import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stwave.mesh import make_initial_mesh
from stwave.targets import P1Field, TargetKind, eval_target, get_target, hat, zero_target

unit = st.floats(0, 1, allow_nan=False)


@pytest.mark.parametrize("kind, x, t, expected", [
    ("u2", 0.5, 0.5, 1.0),
    ("u2", 0.1, 0.1, 0.0),
    ("u3", 0.5, 0.5, 1.0),
    ("u3", 0.375, 0.5, 0.5),
    ("u1", 0.5, 0.75, -13.5),
    ("u4", 0.5, 0.5, 0.5),
])
def test_point_values(kind, x, t, expected):
    assert eval_target(kind, x, t) == pytest.approx(expected, rel=1e-14)


def test_u2_boundary_of_square_is_outside():
    assert eval_target("u2", 0.25, 0.5) == 0.0
    assert eval_target("u2", 0.5, 0.75) == 0.0


def test_hat():
    np.testing.assert_allclose(hat([0.0, 0.25, 0.375, 0.5, 0.625, 0.75, 1.0]), [0, 0, 0.5, 1, 0.5, 0, 0])


@given(unit, unit)
def test_value_ranges(x, t):
    assert eval_target("u2", x, t) in (0.0, 1.0)
    assert 0.0 <= eval_target("u3", x, t) <= 1.0
    assert abs(eval_target("u4", x, t)) <= 1.0
    assert eval_target("u3", x, t) == pytest.approx(eval_target("u3", t, x))


@given(unit, unit)
def test_u4_vanishes_on_dirichlet_boundary(x, t):
    for xb in (0.0, 1.0):
        assert abs(eval_target("u4", xb, t)) < 1e-15
    assert eval_target("u4", x, 0.0) == 0.0


@given(unit, unit)
def test_u1_variants(x, t):
    s = 6 * t - 3 * x
    verbatim = eval_target("u1", x, t)
    band = eval_target("u1", x, t, u1_variant="band")
    if x > t:
        assert verbatim == 0.0
    if not 0 <= s <= 2:
        assert band == 0.0
    else:
        # both cubic factors are nonpositive on the band
        assert band >= 0.0


def test_u1_jump_along_diagonal():
    # the printed support ends on x = t where the polynomial is not zero
    below, above = eval_target("u1", 0.5 + 1e-9, 0.5), eval_target("u1", 0.5 - 1e-9, 0.5)
    assert below == 0.0
    assert above == pytest.approx(0.5 * 0.5**3 * 1.5**3, rel=1e-6)


def test_get_target_flags():
    assert get_target("u2").discontinuous
    assert not get_target("u3").discontinuous
    assert get_target(TargetKind.U4_SINE).name == "u4"
    with pytest.raises(ValueError):
        get_target("u9")
    with pytest.raises(ValueError):
        get_target("u1", "other")


def test_sample_shapes():
    m = make_initial_mesh(2)
    bary = np.array([[1.0, 0, 0], [0, 1.0, 0], [1 / 3, 1 / 3, 1 / 3]])
    vals = get_target("u3").sample(m, bary)
    assert vals.shape == (m.num_elements, 3)
    np.testing.assert_allclose(vals[:, 0], eval_target("u3", *m.element_coords()[:, 0].T))
    assert np.all(zero_target().sample(m, bary) == 0.0)


def test_p1field_only_on_own_mesh():
    m = make_initial_mesh(2)
    f = P1Field(m, m.nodes[:, 0] + 2 * m.nodes[:, 1])
    bary = np.array([[1 / 3, 1 / 3, 1 / 3]])
    c = m.centroids()
    np.testing.assert_allclose(f.sample(m, bary)[:, 0], c[:, 0] + 2 * c[:, 1])
    with pytest.raises(ValueError):
        f.sample(make_initial_mesh(2), bary)
