import numpy as np
import pytest

from stwave.adapt import AdaptiveConfig, AlreadyConverged, adaptive_loop, mark
from stwave.mesh import MeshHierarchy, is_conforming, make_initial_mesh
from stwave.optcontrol import build_system, solve
from stwave.postproc import ErrorField, element_errors, fitted_dof_rate
from stwave.targets import get_target, zero_target


def test_mark_example():
    # threshold 0.5 * 4 = 2; the rule is inclusive, so the indicator equal to 2 is marked too
    assert mark(np.array([4.0, 2.0, 1.0, 3.0]), 0.5).tolist() == [0, 1, 3]
    assert mark(ErrorField(np.array([4.0, 2.0, 1.0, 3.0]))).tolist() == [0, 1, 3]
    assert mark(np.array([4.0, 1.9, 1.0, 3.0]), 0.5).tolist() == [0, 3]


def test_mark_small_theta_marks_all_positive():
    eta = np.array([1e-3, 0.0, 5.0, 2.0])
    assert mark(eta, 1e-9).tolist() == [0, 2, 3]


def test_mark_uniform_indicators():
    assert mark(np.full(7, 0.3), 0.5).tolist() == list(range(7))


def test_mark_threshold_is_inclusive():
    assert mark(np.array([2.0, 1.0, 0.5]), 0.5).tolist() == [0, 1]


def test_mark_all_zero():
    with pytest.raises(AlreadyConverged):
        mark(np.zeros(4), 0.5)


@pytest.mark.parametrize("theta", [0.0, 1.0, -0.1, 1.5])
def test_mark_rejects_theta(theta):
    with pytest.raises(ValueError):
        mark(np.ones(3), theta)


def test_bulk_marking():
    eta = np.array([4.0, 2.0, 1.0, 3.0])  # squares 16, 4, 1, 9; total 30
    assert mark(eta, 0.5, "bulk").tolist() == [0]  # 16 >= 15
    assert mark(eta, 0.8, "bulk").tolist() == [0, 3]  # 25 >= 24
    with pytest.raises(ValueError):
        mark(eta, 0.5, "other")


def test_config_validation():
    with pytest.raises(ValueError):
        AdaptiveConfig(theta=1.5)
    with pytest.raises(ValueError):
        AdaptiveConfig(rho_mode="both")
    with pytest.raises(ValueError):
        AdaptiveConfig(marking="random")


def test_single_cell_stops_on_max_levels():
    res = adaptive_loop(make_initial_mesh(1), get_target("u3"), config=AdaptiveConfig(max_levels=3))
    assert len(res.records) == 4
    assert len(res.hierarchy) == 4


def test_zero_target_converges_immediately():
    res = adaptive_loop(make_initial_mesh(2), zero_target(), config=AdaptiveConfig(max_levels=3))
    assert len(res.records) == 1
    assert res.records[0].error == 0.0


def test_max_dofs_cap():
    res = adaptive_loop(make_initial_mesh(4), get_target("u2"), config=AdaptiveConfig(max_levels=20, max_dofs=500))
    assert res.records[-1].dofs >= 500
    assert all(r.dofs < 500 for r in res.records[:-1])


@pytest.fixture(scope="module")
def u1_run():
    cfg = AdaptiveConfig(max_levels=6)
    return adaptive_loop(make_initial_mesh(4), get_target("u1"), config=cfg)


def test_element_count_increases_and_meshes_conform(u1_run):
    counts = [r.elements for r in u1_run.records]
    assert all(b > a for a, b in zip(counts, counts[1:]))
    assert all(is_conforming(m) for m in u1_run.hierarchy)
    assert all(len(mk) > 0 for mk in u1_run.marked)


def test_records_use_minimal_mesh_size(u1_run):
    for rec, m in zip(u1_run.records, u1_run.hierarchy):
        assert rec.h == m.diameters().min()
        assert rec.rho == pytest.approx(rec.h**2)


def test_u1_marking_concentrates_on_support(u1_run):
    for lev in range(2, len(u1_run.marked)):
        m = u1_run.hierarchy[lev]
        c = m.element_coords()[u1_run.marked[lev]]
        # the support x <= t meets an element iff one of its vertices satisfies it
        touches = np.any(c[..., 0] <= c[..., 1] + 1e-14, axis=1)
        assert touches.mean() >= 0.7


@pytest.mark.slow
def test_u1_adaptive_beats_uniform_near_8k_dofs():
    res = adaptive_loop(make_initial_mesh(4), get_target("u1"), config=AdaptiveConfig(max_levels=30, max_dofs=8000))
    assert [r.error for r in res.records][-1] < res.records[0].error
    h = MeshHierarchy.uniform(4, 4)
    target = get_target("u1")
    s = build_system(h, 4, target)
    uniform_err = element_errors(s.mesh, s.xmap, solve(s).u, target, s.quad).global_error
    assert abs(res.records[-1].dofs / s.xmap.count - 1) < 0.3
    assert res.records[-1].error < uniform_err


@pytest.mark.slow
def test_u2_adaptive_rate():
    res = adaptive_loop(make_initial_mesh(4), get_target("u2"), config=AdaptiveConfig(max_levels=9))
    assert len(res.records) >= 6
    # half a power of the DoF count, with slack for the pre-asymptotic levels in the fit
    assert fitted_dof_rate(res.records, last=6) <= -0.45


def test_variable_rho_mode_runs():
    cfg = AdaptiveConfig(max_levels=2, rho_mode="variable")
    res = adaptive_loop(make_initial_mesh(4), get_target("u3"), config=cfg)
    assert len(res.records) == 3
    assert res.records[-1].error < res.records[0].error
