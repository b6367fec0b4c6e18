import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmpfem.model import (
    CASE_NAMES,
    ProblemError,
    ProblemSpec,
    benchmark_catalog,
    constant,
    exact_gradient_1d,
    exact_solution_1d,
    exact_solution_2d_isotropic,
    isotropic_diffusivity,
    lepotier_tensor,
    make_case,
    rotated_anisotropic_tensor,
    rotation_tensor,
)

# 200-digit evaluation of the closed form at alpha = 1000, x = 0.5 (and x = 0.25)
EXACT_1000_HALF = 2.71788643059979597263096253419e-07
EXACT_1000_QUARTER = 3.68638520049822040872944776057e-04


@pytest.mark.parametrize("alpha", [0.0, 1.0, 100.0, 1000.0, 1e8])
def test_exact_1d_boundary_values(alpha):
    np.testing.assert_allclose(exact_solution_1d(alpha, [0.0, 1.0]), 1.0, rtol=1e-15)


def test_exact_1d_values():
    assert exact_solution_1d(0.0, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert exact_solution_1d(1000.0, 0.5) == pytest.approx(EXACT_1000_HALF, rel=1e-13)
    assert exact_solution_1d(1000.0, 0.25) == pytest.approx(EXACT_1000_QUARTER, rel=1e-13)


def test_exact_1d_matches_extended_precision():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 200
    s = mp.sqrt(1000)
    for x in ("0.1", "0.5", "0.73"):
        xm = mp.mpf(x)
        ref = (mp.exp(-s * (1 - xm)) + mp.exp(-s * xm)) / (1 + mp.exp(-s))
        assert exact_solution_1d(1000.0, float(x)) == pytest.approx(float(ref), rel=1e-13)


@pytest.mark.parametrize("alpha", [1.0, 100.0, 1000.0])
def test_exact_1d_satisfies_strong_form(alpha):
    x = np.linspace(0.05, 0.95, 19)
    eps = 1e-4
    c = exact_solution_1d(alpha, x)
    cxx = (exact_solution_1d(alpha, x + eps) - 2 * c + exact_solution_1d(alpha, x - eps)) / eps**2
    scale = max(1.0, np.abs(alpha * c).max())
    assert np.abs(alpha * c - cxx).max() <= 1e-5 * scale * max(1.0, alpha)
    d = (exact_solution_1d(alpha, x + eps) - exact_solution_1d(alpha, x - eps)) / (2 * eps)
    np.testing.assert_allclose(exact_gradient_1d(alpha, x), d, rtol=1e-5, atol=1e-9)


def test_exact_1d_rejects_negative_alpha():
    with pytest.raises(ProblemError):
        exact_solution_1d(-1.0, 0.5)


def test_exact_2d_values():
    for a in (1.0, 500.0):
        assert exact_solution_2d_isotropic(a, 1.0, 1.0) == pytest.approx(2.0)
        assert exact_solution_2d_isotropic(a, 1.0, 0.0) == pytest.approx(1 + np.exp(-np.sqrt(a)))
    assert exact_solution_2d_isotropic(500.0, 0.0, 0.0) == pytest.approx(2 * np.exp(-np.sqrt(500.0)), rel=1e-14)


def test_exact_2d_satisfies_strong_form():
    a = 50.0
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0.1, 0.9, (2, 10))
    e = 1e-4
    c = exact_solution_2d_isotropic(a, x, y)
    lap = (exact_solution_2d_isotropic(a, x + e, y) + exact_solution_2d_isotropic(a, x - e, y)
           + exact_solution_2d_isotropic(a, x, y + e) + exact_solution_2d_isotropic(a, x, y - e) - 4 * c) / e**2
    np.testing.assert_allclose(a * c - lap, 0.0, atol=1e-4)


def test_rotated_tensor_examples():
    np.testing.assert_allclose(rotation_tensor(0.0, 5.0, 5.0), 5 * np.eye(2))
    D = rotation_tensor(np.pi / 6, 1e4, 1.0)
    assert np.trace(D) == pytest.approx(10001.0)
    assert np.linalg.det(D) == pytest.approx(1e4, rel=1e-10)
    np.testing.assert_allclose(rotation_tensor(np.pi / 4, 2.0, 1.0), [[1.5, -0.5], [-0.5, 1.5]], atol=1e-15)
    field = rotated_anisotropic_tensor(np.pi / 4, 2.0, 1.0)
    vals = field(np.zeros((3, 2)))
    assert vals.shape == (3, 2, 2)
    np.testing.assert_allclose(vals[1], [[1.5, -0.5], [-0.5, 1.5]], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(theta=st.floats(-10, 10), k1=st.floats(1e-3, 1e6), k2=st.floats(1e-3, 1e6))
def test_rotated_tensor_is_spd_with_given_eigenvalues(theta, k1, k2):
    D = rotation_tensor(theta, k1, k2)
    np.testing.assert_array_equal(D, D.T)
    ev = np.linalg.eigvalsh(D)
    np.testing.assert_allclose(ev, sorted([k1, k2]), rtol=1e-9, atol=1e-9 * max(k1, k2))


def test_rotated_tensor_rejects_nonpositive():
    with pytest.raises(ProblemError):
        rotation_tensor(0.0, 0.0, 1.0)


def test_lepotier_tensor_examples():
    eps = 1e-4
    np.testing.assert_allclose(lepotier_tensor(eps, 1.0, 0.0), [[eps, 0], [0, 1]], atol=1e-15)
    np.testing.assert_allclose(lepotier_tensor(eps, 1.0, 1.0),
                               [[1 + eps, -(1 - eps)], [-(1 - eps), 1 + eps]], rtol=1e-14)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(1e-3, 1), y=st.floats(1e-3, 1))
def test_lepotier_tensor_eigenvalues(x, y):
    # eigenvectors (x, y) and (-y, x) with eigenvalues eps r^2 and r^2
    eps = 1e-4
    D = lepotier_tensor(eps, x, y)
    np.testing.assert_array_equal(D, D.T)
    r2 = x * x + y * y
    np.testing.assert_allclose(np.linalg.eigvalsh(D), [eps * r2, r2], rtol=1e-8)


def test_isotropic_field_and_constant():
    f = constant(3.0)
    np.testing.assert_array_equal(f(np.zeros((4, 2))), 3.0)
    D = isotropic_diffusivity(2.0, ndim=1)
    np.testing.assert_array_equal(D(np.zeros((2, 1))), [[[2.0]], [[2.0]]])
    with pytest.raises(ProblemError):
        isotropic_diffusivity(0.0)


def test_problem_spec_checks():
    one = constant(1.0)
    D = isotropic_diffusivity(1.0)
    with pytest.raises(ProblemError):
        ProblemSpec(one, D, one, {"left": one}, {"left": one})
    with pytest.raises(ProblemError):
        ProblemSpec(one, D, one, bounds=(1.0, 0.0))


def test_catalog_cases():
    cases = benchmark_catalog()
    assert [c.name for c in cases] == list(CASE_NAMES)
    aniso = make_case("aniso2d")
    assert aniso.problem.dirichlet["bottom"](np.array([[0.5, 0.0]]))[0] == pytest.approx(1.0)
    het = make_case("hetero2d")
    np.testing.assert_array_equal(het.problem.forcing(np.array([[0.5, 0.5], [0.1, 0.1]])), [1.0, 0.0])
    hole = make_case("hole2d")
    assert hole.problem.dirichlet["inner"](np.array([[0.5, 4 / 9]]))[0] == 2.0
    assert make_case("decay1d", alpha=7.0).params["alpha"] == 7.0


def test_catalog_rejects_bad_input():
    with pytest.raises(ProblemError):
        make_case("nope")
    with pytest.raises(ProblemError):
        make_case("decay1d", epsilon=1.0)
    with pytest.raises(ProblemError):
        make_case("decay1d", alpha=-1.0)
