"""Continuous problem data for ``alpha c - div(D grad c) = f`` and the benchmark catalog.

All coefficient callables are vectorized: they receive an array of points with
shape ``(n, ndim)`` and return one value (or one ``ndim x ndim`` matrix) per point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import mesh as meshlib

ScalarField = Callable[[np.ndarray], np.ndarray]


class ProblemError(ValueError):
    """Inconsistent or physically inadmissible problem data."""


def constant(value: float) -> ScalarField:
    """A spatially constant scalar field."""
    value = float(value)

    def evaluate(x):
        return np.full(np.asarray(x).shape[0], value)

    evaluate.constant_value = value
    return evaluate


@dataclass(frozen=True)
class DiffusivityField:
    """Symmetric positive definite diffusivity tensor field.

    ``evaluator(points)`` returns an array of shape ``(n, ndim, ndim)``.
    ``kind`` is one of ``'isotropic'``, ``'anisotropic'``, ``'heterogeneous'``.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    kind: str
    description: str = ""

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.evaluator(pts)


def isotropic_diffusivity(value: float = 1.0, ndim: int = 2) -> DiffusivityField:
    if value <= 0:
        raise ProblemError(f"diffusivity must be positive, got {value}")
    mat = value * np.eye(ndim)
    return DiffusivityField(
        lambda x: np.broadcast_to(mat, (x.shape[0], ndim, ndim)).copy(),
        "isotropic",
        f"isotropic:{value!r}",
    )


def constant_tensor(matrix, description: str = "") -> DiffusivityField:
    mat = np.array(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ProblemError("diffusivity matrix must be square")
    if not np.allclose(mat, mat.T, rtol=0, atol=1e-14 * max(1.0, np.abs(mat).max())):
        raise ProblemError("diffusivity matrix must be symmetric")
    mat = 0.5 * (mat + mat.T)
    if np.linalg.eigvalsh(mat).min() <= 0:
        raise ProblemError("diffusivity matrix must be positive definite")
    nd = mat.shape[0]
    iso = np.allclose(mat, mat[0, 0] * np.eye(nd))
    return DiffusivityField(
        lambda x: np.broadcast_to(mat, (x.shape[0], nd, nd)).copy(),
        "isotropic" if iso else "anisotropic",
        description or "matrix:" + ",".join(repr(float(v)) for v in mat.ravel()),
    )


def rotation_tensor(theta: float, k1: float, k2: float) -> np.ndarray:
    """``R diag(k1, k2) R^T`` with ``R = [[cos, sin], [-sin, cos]]``."""
    if k1 <= 0 or k2 <= 0:
        raise ProblemError(f"principal diffusivities must be positive, got {k1}, {k2}")
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, s], [-s, c]])
    mat = rot @ np.diag([k1, k2]) @ rot.T
    return 0.5 * (mat + mat.T)


def rotated_anisotropic_tensor(theta: float, k1: float, k2: float) -> DiffusivityField:
    """Constant anisotropic diffusivity with principal values ``k1``, ``k2``."""
    return constant_tensor(
        rotation_tensor(theta, k1, k2), f"anisotropic:{theta!r},{k1!r},{k2!r}"
    )


def lepotier_tensor(epsilon: float, x, y) -> np.ndarray:
    """Heterogeneous anisotropic tensor; vectorized over ``x``, ``y``.

    Degenerates to zero at the origin.
    """
    if epsilon <= 0:
        raise ProblemError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    off = -(1.0 - epsilon) * x * y
    out = np.empty(np.broadcast(x, y).shape + (2, 2))
    out[..., 0, 0] = y**2 + epsilon * x**2
    out[..., 0, 1] = off
    out[..., 1, 0] = off
    out[..., 1, 1] = x**2 + epsilon * y**2
    return out


def lepotier_diffusivity(epsilon: float = 1e-4) -> DiffusivityField:
    return DiffusivityField(
        lambda p: lepotier_tensor(epsilon, p[:, 0], p[:, 1]),
        "heterogeneous",
        f"lepotier:{epsilon!r}",
    )


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients, source and boundary data of one boundary value problem.

    ``bounds`` is an optional ``(c_min, c_max)`` pair for the constrained solve;
    either entry may be ``None`` for a one-sided bound.
    """

    decay: ScalarField
    diffusivity: DiffusivityField
    forcing: ScalarField
    dirichlet: dict[str, ScalarField] = field(default_factory=dict)
    neumann: dict[str, ScalarField] = field(default_factory=dict)
    bounds: tuple[float | None, float | None] | None = None

    def __post_init__(self):
        overlap = set(self.dirichlet) & set(self.neumann)
        if overlap:
            raise ProblemError(f"segments {sorted(overlap)} are both Dirichlet and Neumann")
        if self.bounds is not None:
            lo, hi = self.bounds
            if lo is not None and hi is not None and lo > hi:
                raise ProblemError(f"c_min {lo} exceeds c_max {hi}")

    def check_segments(self, mesh) -> None:
        unknown = (set(self.dirichlet) | set(self.neumann)) - set(mesh.boundary_nodes)
        if unknown:
            raise ProblemError(
                f"segments {sorted(unknown)} not in mesh (has {sorted(mesh.boundary_nodes)})"
            )


# --- analytical solutions -------------------------------------------------------

def exact_solution_1d(alpha: float, x):
    """Closed-form solution of ``alpha c - c'' = 0`` on (0, 1) with c(0) = c(1) = 1.

    Evaluated as ``(exp(-s(1-x)) + exp(-s x)) / (1 + exp(-s))``, ``s = sqrt(alpha)``,
    which never overflows.
    """
    if alpha < 0:
        raise ProblemError("alpha must be nonnegative")
    s = np.sqrt(alpha)
    x = np.asarray(x, dtype=float)
    return (np.exp(-s * (1.0 - x)) + np.exp(-s * x)) / (1.0 + np.exp(-s))


def exact_gradient_1d(alpha: float, x):
    s = np.sqrt(alpha)
    x = np.asarray(x, dtype=float)
    return s * (np.exp(-s * (1.0 - x)) - np.exp(-s * x)) / (1.0 + np.exp(-s))


def exact_solution_2d_isotropic(alpha: float, x, y):
    """``(exp(s x) + exp(s y)) / exp(s)`` evaluated as ``exp(s(x-1)) + exp(s(y-1))``."""
    if alpha < 0:
        raise ProblemError("alpha must be nonnegative")
    s = np.sqrt(alpha)
    return np.exp(s * (np.asarray(x, dtype=float) - 1.0)) + np.exp(s * (np.asarray(y, dtype=float) - 1.0))


def exact_gradient_2d_isotropic(alpha: float, x, y):
    s = np.sqrt(alpha)
    return np.stack(
        [s * np.exp(s * (np.asarray(x) - 1.0)), s * np.exp(s * (np.asarray(y) - 1.0))], axis=-1
    )


@dataclass(frozen=True)
class ExactSolution:
    """Analytical value and gradient, both vectorized over points ``(n, ndim)``."""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]


# --- benchmark catalog ----------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkCase:
    """One of the reference problems, parameterized by its coefficients.

    ``build_mesh(size, element)`` turns a mesh size into a :class:`~dmpfem.mesh.Mesh`.
    ``mesh_convention`` explains what ``size`` counts for this case.
    """

    name: str
    problem: ProblemSpec
    build_mesh: Callable[..., meshlib.Mesh]
    default_mesh: object
    mesh_convention: str
    exact: ExactSolution | None = None
    bounds: tuple[float | None, float | None] | None = None
    params: dict = field(default_factory=dict)
    elements: tuple[str, ...] = ("tri",)


def _interval_recipe(size, element="line"):
    return meshlib.build_interval_mesh(int(size), 0.0, 1.0)


def _square_recipe(size, element="tri", diagonal="NW"):
    """``size`` counts nodes per side, either ``n`` or ``(nx, ny)``."""
    nx, ny = (size, size) if np.isscalar(size) else size
    nx, ny = int(nx) - 1, int(ny) - 1
    if element == "quad":
        return meshlib.build_unit_square_quad_mesh(nx, ny)
    if element == "tri":
        return meshlib.build_unit_square_tri_mesh(nx, ny, diagonal)
    raise ProblemError(f"element must be 'tri' or 'quad', got {element!r}")


def _hole_recipe(size, element="tri", diagonal="NW"):
    if element != "tri":
        raise ProblemError("the square-with-hole mesh is triangular only")
    return meshlib.build_square_with_hole_mesh(int(size), diagonal)


def _sin_pi_x(p):
    return np.sin(np.pi * p[:, 0])


def _central_box_source(p):
    inside = (p[:, 0] >= 3 / 8) & (p[:, 0] <= 5 / 8) & (p[:, 1] >= 3 / 8) & (p[:, 1] <= 5 / 8)
    return inside.astype(float)


def make_case(name: str, **params) -> BenchmarkCase:
    """Build a catalog case, overriding defaults with ``params``.

    Recognized parameters: ``alpha`` for every case; ``theta``, ``k1``, ``k2``
    for ``aniso2d`` and ``hole2d``; ``epsilon`` for ``hetero2d``.
    """
    if name not in CASE_NAMES:
        raise ProblemError(f"unknown case {name!r}; choose from {', '.join(CASE_NAMES)}")
    p = dict(_DEFAULTS[name])
    unknown = set(params) - set(p)
    if unknown:
        raise ProblemError(f"case {name!r} has no parameters {sorted(unknown)}")
    p.update({k: v for k, v in params.items() if v is not None})
    alpha = float(p["alpha"])
    if alpha < 0:
        raise ProblemError("alpha must be nonnegative (negative decay is a Helmholtz problem)")

    if name == "decay1d":
        one = constant(1.0)
        problem = ProblemSpec(constant(alpha), isotropic_diffusivity(1.0, ndim=1), constant(0.0),
                              {"left": one, "right": one}, bounds=(0.0, 1.0))
        exact = ExactSolution(lambda x: exact_solution_1d(alpha, x[:, 0]),
                              lambda x: exact_gradient_1d(alpha, x[:, 0])[:, None])
        return BenchmarkCase(name, problem, _interval_recipe, 4, "elements", exact,
                             (0.0, 1.0), p, ("line",))

    if name == "iso2d":
        def bc(x):
            return exact_solution_2d_isotropic(alpha, x[:, 0], x[:, 1])
        problem = ProblemSpec(constant(alpha), isotropic_diffusivity(1.0), constant(0.0),
                              {s: bc for s in ("bottom", "right", "top", "left")}, bounds=(0.0, 2.0))
        exact = ExactSolution(bc, lambda x: exact_gradient_2d_isotropic(alpha, x[:, 0], x[:, 1]))
        return BenchmarkCase(name, problem, _square_recipe, 5, "nodes per side", exact,
                             (0.0, 2.0), p, ("tri", "quad"))

    if name == "aniso2d":
        D = rotated_anisotropic_tensor(p["theta"], p["k1"], p["k2"])
        zero = constant(0.0)
        problem = ProblemSpec(constant(alpha), D, constant(0.0),
                              {"bottom": _sin_pi_x, "right": zero, "top": zero, "left": zero},
                              bounds=(0.0, 1.0))
        return BenchmarkCase(name, problem, _square_recipe, 12, "nodes per side", None,
                             (0.0, 1.0), p, ("tri", "quad"))

    if name == "hole2d":
        D = rotated_anisotropic_tensor(p["theta"], p["k1"], p["k2"])
        problem = ProblemSpec(constant(alpha), D, constant(0.0),
                              {"outer": constant(0.0), "inner": constant(2.0)}, bounds=(0.0, 2.0))
        return BenchmarkCase(name, problem, _hole_recipe, 2, "elements per ninth-band", None,
                             (0.0, 2.0), p, ("tri",))

    # hetero2d
    problem = ProblemSpec(constant(alpha), lepotier_diffusivity(p["epsilon"]), _central_box_source,
                          {s: constant(0.0) for s in ("bottom", "right", "top", "left")},
                          bounds=(0.0, None))
    return BenchmarkCase(name, problem, _square_recipe, 33, "nodes per side", None,
                         (0.0, None), p, ("tri", "quad"))


_ANISO = {"theta": np.pi / 6, "k1": 1e4, "k2": 1.0}
_DEFAULTS = {
    "decay1d": {"alpha": 1000.0},
    "iso2d": {"alpha": 500.0},
    "aniso2d": {"alpha": 1.0, **_ANISO},
    "hole2d": {"alpha": 1.0, **_ANISO},
    "hetero2d": {"alpha": 1.0, "epsilon": 1e-4},
}
CASE_NAMES = tuple(_DEFAULTS)


def benchmark_catalog() -> list[BenchmarkCase]:
    """The five reference cases with their default parameters."""
    return [make_case(name) for name in CASE_NAMES]
