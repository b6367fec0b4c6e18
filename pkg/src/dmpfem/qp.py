"""Maximum-principle enforcement through a box-constrained convex QP.

The reduced Galerkin system ``K c = f`` is the optimality condition of
``min 1/2 <c, K c> - <c, f>``. Adding the bounds ``lower <= c <= upper`` gives a
strictly convex QP, solved here by a primal active-set method that works on the
free-variable principal submatrix of ``K`` at every iteration.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import AssembledSystem, dirichlet_data, quadrature_points
from .linsolve import SpdSolver

WARM_STARTS = ("violated-galerkin", "empty")
TOL = 1e-10
STATIONARITY_TOL = 1e-8


class QpError(RuntimeError):
    """Base class for constrained-solve failures."""


class InfeasibleBoundsError(QpError, ValueError):
    """Bounds are inconsistent, or Dirichlet data already violates them."""


class IterationLimitError(QpError):
    """The active-set loop hit its iteration cap; ``report`` holds the trace."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, eq=False)
class BoxQp:
    """``min 1/2 <x, Q x> - <x, g>`` subject to ``lower <= x <= upper``."""

    Q: sp.csr_matrix
    g: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = self.g.shape[0]
        object.__setattr__(self, "Q", sp.csr_matrix(self.Q, dtype=float))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float))
        object.__setattr__(self, "lower", _broadcast(self.lower, n, -np.inf))
        object.__setattr__(self, "upper", _broadcast(self.upper, n, np.inf))
        bad = np.flatnonzero(self.lower > self.upper)
        if bad.size:
            i = int(bad[0])
            raise InfeasibleBoundsError(f"lower bound {self.lower[i]} exceeds upper {self.upper[i]} at {i}")

    @property
    def n(self) -> int:
        return self.g.shape[0]

    def objective(self, x) -> float:
        return float(0.5 * x @ (self.Q @ x) - x @ self.g)


def _broadcast(b, n, default):
    if b is None:
        return np.full(n, default)
    arr = np.asarray(b, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"bound has shape {arr.shape}, expected ({n},)")
    return arr.copy()


@dataclass
class IterationRecord:
    iteration: int
    active_lower: list[int]
    active_upper: list[int]
    objective: float
    max_violation: float
    action: str

    @property
    def active_set_size(self) -> int:
        return len(self.active_lower) + len(self.active_upper)


@dataclass(eq=False)
class QpSolveReport:
    """Result of a constrained solve.

    ``x`` is over the QP variables; :func:`solve_constrained` additionally
    fills ``nodal`` with the Dirichlet values inserted. ``x_scale`` and
    ``force_scale`` set the tolerances of the KKT checks: primal quantities are
    compared against ``1e-10 * x_scale``, multipliers against
    ``1e-10 * force_scale``.
    """

    x: np.ndarray
    lagrange_lower: np.ndarray
    lagrange_upper: np.ndarray
    iterations: int
    trace: list[IterationRecord]
    kkt_residuals: dict[str, float]
    x_scale: float
    force_scale: float
    converged: bool = True
    nodal: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def active_set_trace(self) -> list[list[int]]:
        return [sorted(r.active_lower + r.active_upper) for r in self.trace]

    def kkt_satisfied(self) -> bool:
        r = self.kkt_residuals
        return (
            r["primal"] <= TOL * self.x_scale
            and r["dual"] <= TOL * self.force_scale
            and r["complementarity"] <= TOL * self.force_scale * self.x_scale
            and r["stationarity"] <= STATIONARITY_TOL * self.force_scale
        )

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "active_set_size", "objective", "max_primal_violation"])
        for r in self.trace:
            w.writerow([r.iteration, r.active_set_size, repr(r.objective), repr(r.max_violation)])
        return buf.getvalue()


def kkt_residuals(qp: BoxQp, x, lam_lo, lam_up) -> dict[str, float]:
    """Primal, dual, complementarity and stationarity residuals (all >= 0)."""
    r = qp.Q @ x - qp.g
    stat = r - lam_lo + lam_up
    viol = np.maximum(qp.lower - x, 0.0).max(initial=0.0)
    viol = max(viol, np.maximum(x - qp.upper, 0.0).max(initial=0.0))
    dual = max(np.maximum(-lam_lo, 0).max(initial=0.0), np.maximum(-lam_up, 0).max(initial=0.0))
    gap_lo = np.where(np.isfinite(qp.lower), x - qp.lower, 0.0)
    gap_up = np.where(np.isfinite(qp.upper), qp.upper - x, 0.0)
    comp = max(np.abs(lam_lo * gap_lo).max(initial=0.0), np.abs(lam_up * gap_up).max(initial=0.0))
    return {
        "primal": float(viol),
        "dual": float(dual),
        "complementarity": float(comp),
        "stationarity": float(np.abs(stat).max(initial=0.0)),
    }


def _scales(qp: BoxQp) -> tuple[float, float]:
    qnorm = float(abs(qp.Q).sum(axis=1).max()) if qp.n else 1.0
    qnorm = qnorm or 1.0
    finite = np.concatenate([qp.lower[np.isfinite(qp.lower)], qp.upper[np.isfinite(qp.upper)]])
    x_scale = max(1.0, float(np.abs(qp.g).max(initial=0.0)) / qnorm, float(np.abs(finite).max(initial=0.0)))
    return x_scale, qnorm * x_scale


def _multipliers(r, at_lo, at_up):
    lam_lo = np.zeros_like(r)
    lam_up = np.zeros_like(r)
    lam_lo[at_lo] = r[at_lo]
    lam_up[at_up] = -r[at_up]
    return lam_lo, lam_up


def solve_box_qp(
    qp: BoxQp,
    warm_start: str = "violated-galerkin",
    max_iter: int | None = None,
    method: str = "direct",
) -> QpSolveReport:
    """Primal active-set method for a strictly convex box-constrained QP.

    The unconstrained minimizer is computed first; if it is feasible it is the
    answer and no iterations are taken. Otherwise the iterate starts at its
    projection onto the box (iteration 1), with the working set holding the
    projected components (``'violated-galerkin'``) or nothing (``'empty'``).
    Each further iteration solves the equality-constrained subproblem on the
    free variables and then

    * steps toward its solution, adding the first blocking bound (ratio test), or
    * at a subproblem optimum, releases the bound with the most negative
      multiplier, or stops when all multipliers are nonnegative.

    Ties go to the lowest index. Variables with ``lower == upper`` are fixed
    and never enter the working set.
    """
    if warm_start not in WARM_STARTS:
        raise ValueError(f"warm_start must be one of {WARM_STARTS}, got {warm_start!r}")
    n = qp.n
    x_scale, force_scale = _scales(qp)
    tol_x = TOL * x_scale
    tol_lam = TOL * force_scale
    max_iter = 10 * n + 10 if max_iter is None else max_iter
    Q = qp.Q.tocsr()
    lo, up = qp.lower, qp.upper

    fixed = lo == up
    x = np.zeros(n)
    x[fixed] = lo[fixed]
    movable = np.flatnonzero(~fixed)

    def subproblem(free_mask):
        """Minimizer with non-free variables held at their current values."""
        idx = np.flatnonzero(free_mask)
        y = x.copy()
        if idx.size:
            rhs = qp.g[idx] - Q[idx] @ np.where(free_mask, 0.0, x)
            y[idx] = SpdSolver(Q[idx][:, idx], method=method).solve(rhs)
        return y

    x_unc = subproblem(~fixed)
    extra = {"unconstrained": x_unc.copy()}
    trace: list[IterationRecord] = []

    def finish(at_lo, at_up, converged=True):
        r = Q @ x - qp.g
        lam_lo, lam_up = _multipliers(r, at_lo, at_up)
        # fixed variables carry whichever multiplier has the right sign
        lam_lo[fixed] = np.maximum(r[fixed], 0.0)
        lam_up[fixed] = np.maximum(-r[fixed], 0.0)
        res = kkt_residuals(qp, x, lam_lo, lam_up)
        return QpSolveReport(x.copy(), lam_lo, lam_up, len(trace), trace, res,
                             x_scale, force_scale, converged, extra=extra)

    def violation(y):
        return float(max(np.maximum(lo - y, 0).max(initial=0.0), np.maximum(y - up, 0).max(initial=0.0)))

    def record(action):
        trace.append(IterationRecord(len(trace) + 1, np.flatnonzero(at_lo).tolist(),
                                     np.flatnonzero(at_up).tolist(), qp.objective(x),
                                     violation(x), action))

    at_lo = np.zeros(n, dtype=bool)
    at_up = np.zeros(n, dtype=bool)
    if violation(x_unc) <= tol_x:
        x = x_unc
        return finish(at_lo, at_up)

    below = (x_unc < lo) & ~fixed
    above = (x_unc > up) & ~fixed
    x = np.clip(x_unc, lo, up)
    if warm_start == "violated-galerkin":
        at_lo, at_up = below.copy(), above.copy()
    record("warm-start")

    while True:
        if len(trace) >= max_iter:
            report = finish(at_lo, at_up, converged=False)
            raise IterationLimitError(f"active-set method exceeded {max_iter} iterations", report)
        free = ~(at_lo | at_up | fixed)
        y = subproblem(free)
        p = y - x
        if np.abs(p).max(initial=0.0) > tol_x:
            ratio = np.full(n, np.inf)
            dec = free & (p < 0) & np.isfinite(lo)
            inc = free & (p > 0) & np.isfinite(up)
            ratio[dec] = (lo[dec] - x[dec]) / p[dec]
            ratio[inc] = (up[inc] - x[inc]) / p[inc]
            np.maximum(ratio, 0.0, out=ratio)
            j = int(np.argmin(ratio))
            step = min(1.0, ratio[j])
            x = x + step * p
            if ratio[j] <= 1.0:
                if p[j] < 0:
                    x[j] = lo[j]
                    at_lo[j] = True
                else:
                    x[j] = up[j]
                    at_up[j] = True
                record(f"add {j}")
            else:
                x = y
                record("step")
            continue
        x = y
        r = Q @ x - qp.g
        lam_lo, lam_up = _multipliers(r, at_lo, at_up)
        lam = np.where(at_lo, lam_lo, np.where(at_up, lam_up, np.inf))
        j = int(np.argmin(lam))
        if lam[j] >= -tol_lam:
            record("optimal")
            return finish(at_lo, at_up)
        at_lo[j] = at_up[j] = False
        record(f"release {j}")


# --- problem-level operations ------------------------------------------------------

def solve_galerkin(system: AssembledSystem, method: str = "direct") -> np.ndarray:
    """Unconstrained Galerkin solution as a nodal vector (Dirichlet values included)."""
    return system.expand(SpdSolver(system.K, method=method).solve(system.f))


def _nodal_bounds(system, bound, default):
    n_nodes = system.mesh.n_nodes
    if bound is None:
        return np.full(n_nodes, default)
    arr = np.asarray(bound, dtype=float)
    if arr.ndim == 0:
        return np.full(n_nodes, float(arr))
    if arr.shape == (n_nodes,):
        return arr.copy()
    if arr.shape == (system.ndofs,):
        out = np.full(n_nodes, default)
        out[system.node_of_dof] = arr
        return out
    raise ValueError(f"bound of shape {arr.shape} matches neither nodes nor dofs")


def solve_constrained(
    system: AssembledSystem,
    lower=0.0,
    upper=None,
    warm_start: str = "violated-galerkin",
    max_iter: int | None = None,
    method: str = "direct",
) -> QpSolveReport:
    """Minimize the Galerkin energy subject to ``lower <= c <= upper`` at free nodes.

    Bounds are scalars, nodal arrays or per-dof arrays; ``None`` means
    unbounded. The Dirichlet values must already satisfy the bounds.
    """
    lo = _nodal_bounds(system, lower, -np.inf)
    up = _nodal_bounds(system, upper, np.inf)
    dn, dv = system.dirichlet_nodes, system.dirichlet_values
    bad = np.flatnonzero((dv < lo[dn] - TOL * max(1.0, np.abs(dv).max(initial=0))) |
                         (dv > up[dn] + TOL * max(1.0, np.abs(dv).max(initial=0))))
    if bad.size:
        i = int(dn[bad[0]])
        raise InfeasibleBoundsError(
            f"Dirichlet value {dv[bad[0]]} at node {i} lies outside [{lo[i]}, {up[i]}]"
        )
    qp = BoxQp(system.K, system.f, lo[system.node_of_dof], up[system.node_of_dof])
    report = solve_box_qp(qp, warm_start=warm_start, max_iter=max_iter, method=method)
    report.nodal = system.expand(report.x)
    return report


@dataclass(frozen=True)
class DmpBounds:
    """Bounds implied by the boundary data and which of them the maximum
    principle actually guarantees given the sign of the source."""

    c_min: float
    c_max: float
    forcing_nonnegative: bool
    forcing_nonpositive: bool

    @property
    def lower_backed(self) -> bool:
        return self.forcing_nonnegative

    @property
    def upper_backed(self) -> bool:
        return self.forcing_nonpositive

    def qp_bounds(self) -> tuple[float | None, float | None]:
        """(lower, upper) to impose; ``None`` where the source sign gives no bound."""
        return (self.c_min if self.lower_backed else None,
                self.c_max if self.upper_backed else None)


def dmp_bounds_from_data(problem, mesh) -> DmpBounds:
    """``c_min = min(0, min c_p)``, ``c_max = max(0, max c_p)`` over Dirichlet nodes.

    The source sign is sampled at nodes and element quadrature points.
    """
    _, values = dirichlet_data(mesh, problem)
    c_min = min(0.0, float(values.min(initial=0.0)))
    c_max = max(0.0, float(values.max(initial=0.0)))
    pts = np.vstack([mesh.nodes, quadrature_points(mesh).reshape(-1, mesh.ndim)])
    f = np.asarray(problem.forcing(pts), dtype=float)
    return DmpBounds(c_min, c_max, bool(np.all(f >= 0)), bool(np.all(f <= 0)))


def clip(solution, lower=0.0, upper=None) -> np.ndarray:
    """Componentwise truncation to the bounds (the post-processing baseline)."""
    out = np.asarray(solution, dtype=float).copy()
    if lower is not None:
        out = np.maximum(out, lower)
    if upper is not None:
        out = np.minimum(out, upper)
    return out
