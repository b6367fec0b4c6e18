import numpy as np
import pytest

from dmpfem.analysis import (
    ConvergenceStudy,
    diagnose,
    errors_l2_h1,
    fit_rate,
    mesh_size_h,
    refinement_study,
)
from dmpfem.mesh import build_interval_mesh, build_unit_square_quad_mesh, build_unit_square_tri_mesh
from dmpfem.model import make_case


def test_diagnose_counts_and_threshold():
    c = np.array([1.0, -1e-13, -2e-12, 0.0, -0.5, 1.2])
    d = diagnose(c, bounds=(0.0, 1.0))
    assert d.negative_node_count == 2
    assert d.negative_nodes == [2, 4]
    assert d.negative_node_fraction == pytest.approx(100 * 2 / 6)
    assert d.bound_violation_count == 3
    assert [i for i, _ in d.violations] == [2, 4, 5]
    assert d.violations[-1][1] == pytest.approx(0.2)
    assert (d.min_nodal, d.max_nodal) == (-0.5, 1.2)
    # the threshold scales with the Dirichlet data
    assert diagnose(c, scale=2.0).negative_node_count == 1


def test_diagnose_one_sided_bounds():
    d = diagnose(np.array([-1.0, 5.0]), bounds=(0.0, None))
    assert d.bound_violation_count == 1
    d = diagnose(np.array([-1.0, 5.0]), bounds=(None, 1.0))
    assert d.bound_violation_count == 1


def test_errors_zero_for_linear_exact():
    def val(p):
        return 1 + 3 * p[:, 0] - 2 * p[:, 1]

    def grad(p):
        return np.tile([3.0, -2.0], (p.shape[0], 1))

    for mesh in (build_unit_square_tri_mesh(1, 1), build_unit_square_quad_mesh(3, 2)):
        l2, h1 = errors_l2_h1(val(mesh.nodes), mesh, val, grad)
        assert l2 == pytest.approx(0.0, abs=1e-14) and h1 == pytest.approx(0.0, abs=1e-13)


def test_errors_zero_for_constant_1d():
    mesh = build_interval_mesh(4)
    l2, h1 = errors_l2_h1(np.ones(5), mesh, lambda p: np.ones(len(p)), lambda p: np.zeros((len(p), 1)))
    assert (l2, h1) == (0.0, 0.0)


def test_errors_of_known_interpolation():
    # P1 interpolant of x^2 on one element [0, 1]: e = x - x^2
    mesh = build_interval_mesh(1)
    l2, h1 = errors_l2_h1(np.array([0.0, 1.0]), mesh,
                          lambda p: p[:, 0] ** 2, lambda p: 2 * p[:, [0]])
    # the 2-point Gauss rule integrates (x - x^2)^2 (degree 4) approximately;
    # |e|^2 in H1 is exactly 1/3
    assert h1 == pytest.approx(np.sqrt(1 / 3), rel=1e-14)
    assert l2 == pytest.approx(np.sqrt(1 / 36), rel=1e-14)


def test_fit_rate():
    h = np.array([0.5, 0.25, 0.125, 0.0625])
    assert fit_rate(h, 3 * h**2) == pytest.approx(2.0)
    # coarsest point is dropped
    err = 3 * h**2
    err[0] *= 10
    assert fit_rate(h, err) == pytest.approx(2.0)
    assert fit_rate(h, err, skip_coarsest=False) > 2.1
    s = ConvergenceStudy(list(h), list(h**2), list(h))
    assert s.l2_rate == pytest.approx(2.0) and s.h1_rate == pytest.approx(1.0)


def test_mesh_size_h():
    assert mesh_size_h(build_interval_mesh(4)) == pytest.approx(0.25)
    assert mesh_size_h(build_unit_square_tri_mesh(4, 4)) == pytest.approx(np.sqrt(2) / 4)


def test_decay1d_rates_alpha_100():
    study = refinement_study(make_case("decay1d", alpha=100.0), [8, 16, 32, 64, 128])
    conv = study.convergence
    assert 1.9 <= conv.l2_rate <= 2.1
    assert 0.9 <= conv.h1_rate <= 1.1
    assert [r.mesh_size for r in study.rows] == [8, 16, 32, 64, 128]


def test_study_rows_ordered_and_threaded(monkeypatch):
    monkeypatch.setenv("DMP_FEM_THREADS", "3")
    case = make_case("aniso2d")
    study = refinement_study(case, [18, 6, 12], solver="galerkin", element="quad")
    assert [r.mesh_size for r in study.rows] == [6, 12, 18]
    assert all(25 <= r.diagnostics.negative_node_fraction <= 40 for r in study.rows[1:])
    text = study.to_csv().splitlines()
    assert text[0] == ("mesh,nodes,elements,h,negative_nodes,percent_violated,"
                       "min_concentration,iterations,l2_error,h1_error")
    assert text[2].startswith("12,144,121,")


@pytest.mark.parametrize("element", ["tri", "quad"])
def test_iso2d_violation_vanishes_with_refinement(element):
    # monotone once h is near sqrt(6 D / alpha) ~ 0.11; coarser meshes have
    # too few interior nodes for the fraction to be meaningful (see below)
    study = refinement_study(make_case("iso2d"), [9, 11, 13, 17, 33], element=element)
    frac = [r.diagnostics.negative_node_fraction for r in study.rows]
    assert all(b <= a for a, b in zip(frac, frac[1:]))
    assert frac[-1] == 0.0


def test_iso2d_fraction_rises_before_it_falls():
    study = refinement_study(make_case("iso2d"), [3, 5, 9, 17])
    frac = [r.diagnostics.negative_node_fraction for r in study.rows]
    assert frac[0] < frac[1] < frac[2] and frac[3] == 0.0


def test_decay1d_iterations_vanish_beyond_critical_h():
    for alpha in (1.0, 100.0, 500.0, 1000.0):
        hc = np.sqrt(6 / alpha)
        study = refinement_study(make_case("decay1d", alpha=alpha), [4, 8, 16, 32], solver="constrained")
        for row in study.rows:
            if row.h < hc:
                assert row.iterations == 0
            assert row.diagnostics.bound_violation_count == 0


def test_constrained_study_violation_free():
    study = refinement_study(make_case("aniso2d"), [6, 12], solver="constrained", element="tri")
    assert all(r.diagnostics.bound_violation_count == 0 for r in study.rows)
    assert all(r.iterations > 0 for r in study.rows)
