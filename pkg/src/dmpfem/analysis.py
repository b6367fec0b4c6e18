"""Violation diagnostics, discretization errors and mesh-refinement studies."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble
from .model import BenchmarkCase
from .qp import clip, dmp_bounds_from_data, solve_constrained, solve_galerkin
from .quadrature import reference_rule

NEGATIVE_RTOL = 1e-12
SOLVERS = ("galerkin", "constrained", "clip")


@dataclass
class DiagnosticsReport:
    min_nodal: float
    max_nodal: float
    n_nodes: int
    negative_node_count: int
    negative_nodes: list[int]
    bound_violation_count: int = 0
    violations: list[tuple[int, float]] = field(default_factory=list)
    bounds: tuple[float | None, float | None] | None = None

    @property
    def negative_node_fraction(self) -> float:
        """Percentage of all mesh nodes (Dirichlet nodes included)."""
        return 100.0 * self.negative_node_count / self.n_nodes if self.n_nodes else 0.0


def diagnose(solution, bounds=None, scale: float = 1.0) -> DiagnosticsReport:
    """Count negative nodes and bound violations of a nodal field.

    A node is negative when its value is below ``-1e-12 * scale``; the same
    slack applies to ``bounds = (c_min, c_max)`` (either may be ``None``).
    """
    c = np.asarray(solution, dtype=float)
    thr = NEGATIVE_RTOL * max(scale, 0.0)
    neg = np.flatnonzero(c < -thr)
    viol: list[tuple[int, float]] = []
    if bounds is not None:
        lo, hi = bounds
        amount = np.zeros_like(c)
        if lo is not None:
            amount = np.maximum(amount, lo - c)
        if hi is not None:
            amount = np.maximum(amount, c - hi)
        idx = np.flatnonzero(amount > thr)
        viol = [(int(i), float(amount[i])) for i in idx]
    return DiagnosticsReport(
        float(c.min()), float(c.max()), c.size, int(neg.size), neg.tolist(),
        len(viol), viol, None if bounds is None else tuple(bounds),
    )


def errors_l2_h1(solution, mesh, exact_value, exact_gradient) -> tuple[float, float]:
    """L2 norm and H1 seminorm of ``c_h - c`` by element quadrature.

    ``exact_value(points)`` and ``exact_gradient(points)`` take ``(n, ndim)`` arrays.
    """
    rule = reference_rule(mesh.kind)
    coords = mesh.nodes[mesh.elements]
    c_el = np.asarray(solution, dtype=float)[mesh.elements]
    J = np.einsum("qai,eaj->eqij", rule.dN, coords)
    detJ = np.linalg.det(J)
    G = np.einsum("eqji,qai->eqaj", np.linalg.inv(J), rule.dN)
    xq = np.einsum("qa,eaj->eqj", rule.N, coords)
    E, q, nd = xq.shape
    flat = xq.reshape(-1, nd)
    ch = np.einsum("qa,ea->eq", rule.N, c_el)
    grad_h = np.einsum("eqaj,ea->eqj", G, c_el)
    u = np.asarray(exact_value(flat), dtype=float).reshape(E, q)
    gu = np.asarray(exact_gradient(flat), dtype=float).reshape(E, q, nd)
    w = rule.weights[None, :] * detJ
    l2 = np.sqrt(np.sum(w * (ch - u) ** 2))
    h1 = np.sqrt(np.sum(w * np.sum((grad_h - gu) ** 2, axis=-1)))
    return float(l2), float(h1)


def fit_rate(h, err, skip_coarsest: bool = True) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    order = np.argsort(-h)
    h, err = h[order], err[order]
    if skip_coarsest and h.size > 2:
        h, err = h[1:], err[1:]
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class ConvergenceStudy:
    h: list[float]
    l2: list[float]
    h1: list[float]

    @property
    def l2_rate(self) -> float:
        return fit_rate(self.h, self.l2)

    @property
    def h1_rate(self) -> float:
        return fit_rate(self.h, self.h1)


@dataclass
class MeshResult:
    mesh_size: object
    n_nodes: int
    n_elements: int
    h: float
    diagnostics: DiagnosticsReport
    iterations: int
    min_nodal: float
    l2: float | None = None
    h1: float | None = None


@dataclass
class StudyResult:
    case: str
    solver: str
    element: str
    rows: list[MeshResult]

    @property
    def convergence(self) -> ConvergenceStudy | None:
        rows = [r for r in self.rows if r.l2 is not None]
        if not rows:
            return None
        rows.sort(key=lambda r: -r.h)
        return ConvergenceStudy([r.h for r in rows], [r.l2 for r in rows], [r.h1 for r in rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mesh", "nodes", "elements", "h", "negative_nodes", "percent_violated",
                    "min_concentration", "iterations", "l2_error", "h1_error"])
        for r in self.rows:
            w.writerow([_mesh_label(r.mesh_size), r.n_nodes, r.n_elements, repr(r.h),
                        r.diagnostics.negative_node_count,
                        f"{r.diagnostics.negative_node_fraction:.2f}", repr(r.min_nodal),
                        r.iterations, "" if r.l2 is None else repr(r.l2),
                        "" if r.h1 is None else repr(r.h1)])
        return buf.getvalue()


def _mesh_label(size) -> str:
    if np.isscalar(size):
        return str(size)
    return "x".join(str(s) for s in size)


def mesh_size_h(mesh) -> float:
    """Largest element edge length."""
    return float(mesh.edge_lengths().max())


def dirichlet_scale(system) -> float:
    vals = np.abs(system.dirichlet_values)
    return float(vals.max()) if vals.size and vals.max() > 0 else 1.0


def solve_case_on_mesh(case: BenchmarkCase, mesh, solver: str = "galerkin",
                       warm_start: str = "violated-galerkin"):
    """Assemble and solve ``case`` on ``mesh``; returns ``(system, field, report)``.

    ``report`` is the QP report for ``solver='constrained'`` and ``None`` otherwise.
    """
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}")
    system = assemble(mesh, case.problem)
    galerkin = solve_galerkin(system)
    bounds = dmp_bounds_from_data(case.problem, mesh)
    lo, hi = bounds.qp_bounds()
    if solver == "galerkin":
        return system, galerkin, None
    if solver == "clip":
        return system, clip(galerkin, lo, hi), None
    report = solve_constrained(system, lo, hi, warm_start=warm_start)
    return system, report.nodal, report


def _study_row(case, size, solver, element):
    mesh = case.build_mesh(size, element)
    system, c, report = solve_case_on_mesh(case, mesh, solver)
    diag = diagnose(c, case.bounds, scale=dirichlet_scale(system))
    row = MeshResult(size, mesh.n_nodes, mesh.n_elements, mesh_size_h(mesh), diag,
                     report.iterations if report is not None else 0, float(c.min()))
    if case.exact is not None:
        row.l2, row.h1 = errors_l2_h1(c, mesh, case.exact.value, case.exact.gradient)
    return row


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("DMP_FEM_THREADS", "1")))
    except ValueError:
        return 1


def refinement_study(case: BenchmarkCase, mesh_sizes, solver: str = "galerkin",
                     element: str | None = None) -> StudyResult:
    """Solve ``case`` on each mesh size, diagnose, and (with an exact solution) measure errors.

    Rows come back ordered from coarsest to finest. Per-mesh solves run on up
    to ``DMP_FEM_THREADS`` worker threads.
    """
    element = element or case.elements[0]
    sizes = list(mesh_sizes)
    workers = min(worker_count(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda s: _study_row(case, s, solver, element), sizes))
    else:
        rows = [_study_row(case, s, solver, element) for s in sizes]
    rows.sort(key=lambda r: -r.h)
    return StudyResult(case.name, solver, element, rows)
