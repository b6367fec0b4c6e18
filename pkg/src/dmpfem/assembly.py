"""Element matrices and the reduced global system ``K c = f``.

Dirichlet nodes are eliminated: ``K`` and ``f`` live on the free nodes only, and
the prescribed values enter the load as ``f_free - K_fc c_p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels
from .mesh import ELEMENT_KINDS, LOCAL_EDGES, Mesh
from .model import ProblemError, ProblemSpec
from .quadrature import gauss_line_2pt, reference_rule


class AssemblyError(ValueError):
    """Invalid geometry or coefficients met during assembly."""


@dataclass(frozen=True)
class ElementMatrices:
    stiffness: np.ndarray
    decay_mass: np.ndarray
    load: np.ndarray


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Reduced SPD system on the free (non-Dirichlet) nodes.

    Attributes
    ----------
    K : scipy.sparse.csr_matrix, shape (ndofs, ndofs)
    f : ndarray, shape (ndofs,)
    node_of_dof : ndarray
        Free node id of each unknown.
    dof_of_node : ndarray
        Unknown index of each node, ``-1`` for Dirichlet nodes.
    dirichlet_nodes, dirichlet_values : ndarray
        Constrained nodes and their prescribed values.
    """

    K: sp.csr_matrix
    f: np.ndarray
    node_of_dof: np.ndarray
    dof_of_node: np.ndarray
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    mesh: Mesh

    @property
    def ndofs(self) -> int:
        return self.node_of_dof.size

    @property
    def dirichlet_map(self) -> dict[int, float]:
        return {int(n): float(v) for n, v in zip(self.dirichlet_nodes, self.dirichlet_values)}

    def expand(self, x_free) -> np.ndarray:
        """Nodal vector with the free values and the Dirichlet data inserted."""
        c = np.empty(self.mesh.n_nodes)
        c[self.node_of_dof] = x_free
        c[self.dirichlet_nodes] = self.dirichlet_values
        return c


def quadrature_points(mesh: Mesh) -> np.ndarray:
    """Physical coordinates of every element quadrature point, shape (E, q, ndim)."""
    rule = reference_rule(mesh.kind)
    return np.einsum("qa,eaj->eqj", rule.N, mesh.nodes[mesh.elements])


def _check_diffusivity(D: np.ndarray, points: np.ndarray) -> None:
    flat = D.reshape(-1, D.shape[-2], D.shape[-1])
    asym = np.abs(flat - np.swapaxes(flat, 1, 2)).max(axis=(1, 2))
    scale = np.maximum(np.abs(flat).max(axis=(1, 2)), 1e-300)
    bad = np.flatnonzero(asym > 1e-12 * scale)
    if bad.size:
        raise AssemblyError(f"diffusivity not symmetric at {points.reshape(-1, points.shape[-1])[bad[0]]}")
    # semidefinite is tolerated here (D = 0 gives a pure reaction element);
    # a singular global matrix is caught by the SPD solver instead
    eig_min = np.linalg.eigvalsh(flat)[:, 0]
    bad = np.flatnonzero(eig_min < -1e-14 * scale)
    if bad.size:
        pt = points.reshape(-1, points.shape[-1])[bad[0]]
        raise AssemblyError(f"diffusivity indefinite at quadrature point {pt} (min eigenvalue {eig_min[bad[0]]})")


def _coefficients(mesh: Mesh, problem: ProblemSpec):
    xq = quadrature_points(mesh)
    E, q, nd = xq.shape
    flat = xq.reshape(-1, nd)
    alpha = np.asarray(problem.decay(flat), dtype=float).reshape(E, q)
    if np.any(alpha < 0):
        i = int(np.argmin(alpha))
        raise ProblemError(f"negative decay coefficient {alpha.flat[i]} at {flat[i]}")
    D = np.asarray(problem.diffusivity(flat), dtype=float).reshape(E, q, nd, nd)
    _check_diffusivity(D, xq)
    f = np.asarray(problem.forcing(flat), dtype=float).reshape(E, q)
    return D, alpha, f


def element_matrices(coords, kind: str, problem: ProblemSpec, backend=None) -> ElementMatrices:
    """Stiffness, decay mass and load of a single element.

    ``coords`` is the (k, ndim) array of its node coordinates.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if kind == "Line2" and coords.shape[1] != 1:
        coords = coords.reshape(-1, 1)
    conn = np.arange(ELEMENT_KINDS[kind])[None, :]
    single = Mesh(coords, conn, kind)
    K, M, F = _element_batch(single, problem, backend)
    return ElementMatrices(K[0], M[0], F[0])


def _element_batch(mesh: Mesh, problem: ProblemSpec, backend=None):
    impl = backend or kernels
    rule = reference_rule(mesh.kind)
    D, alpha, f = _coefficients(mesh, problem)
    coords = np.ascontiguousarray(mesh.nodes[mesh.elements], dtype=float)
    K, M, F, detJ = impl.element_arrays(
        coords,
        np.ascontiguousarray(rule.N),
        np.ascontiguousarray(rule.dN),
        np.ascontiguousarray(rule.weights),
        np.ascontiguousarray(D),
        np.ascontiguousarray(alpha),
        np.ascontiguousarray(f),
    )
    bad = np.flatnonzero(np.any(detJ <= 0, axis=1))
    if bad.size:
        raise AssemblyError(f"element {int(bad[0])} has a nonpositive Jacobian")
    return K, M, F


def _neumann_load(mesh: Mesh, problem: ProblemSpec) -> np.ndarray:
    load = np.zeros(mesh.n_nodes)
    if not problem.neumann:
        return load
    for e, le, name in mesh.boundary_edges:
        flux = problem.neumann.get(name)
        if flux is None:
            continue
        loc = LOCAL_EDGES[mesh.kind][le]
        ids = mesh.elements[e, list(loc)]
        if mesh.kind == "Line2":
            load[ids[0]] += float(np.asarray(flux(mesh.nodes[ids]))[0])
            continue
        a, b = mesh.nodes[ids[0]], mesh.nodes[ids[1]]
        t, w = gauss_line_2pt()
        pts = a[None, :] + t[:, None] * (b - a)[None, :]
        length = np.linalg.norm(b - a)
        tp = np.asarray(flux(pts), dtype=float)
        load[ids[0]] += length * np.sum(w * tp * (1 - t))
        load[ids[1]] += length * np.sum(w * tp * t)
    return load


def global_matrix(mesh: Mesh, problem: ProblemSpec, backend=None):
    """Unreduced global matrix (CSR) and load vector over all nodes."""
    impl = backend or kernels
    K, M, F = _element_batch(mesh, problem, backend)
    conn = mesh.elements
    k = conn.shape[1]
    rows = np.repeat(conn, k, axis=1).ravel()
    cols = np.tile(conn, (1, k)).ravel()
    indptr, indices, data = impl.csr_from_triplets(rows, cols, (K + M).ravel(), mesh.n_nodes)
    A = sp.csr_matrix((data, indices, indptr), shape=(mesh.n_nodes, mesh.n_nodes))
    load = np.zeros(mesh.n_nodes)
    np.add.at(load, conn.ravel(), F.ravel())
    load += _neumann_load(mesh, problem)
    return A, load


def dirichlet_data(mesh: Mesh, problem: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Constrained node ids (sorted, deduplicated) and their prescribed values.

    Corner nodes shared by two segments take the value of the segment listed
    first in ``problem.dirichlet``.
    """
    values: dict[int, float] = {}
    for name, data in problem.dirichlet.items():
        ids = mesh.boundary_nodes[name]
        vals = np.asarray(data(mesh.nodes[ids]), dtype=float)
        for n, v in zip(ids.tolist(), vals.tolist()):
            values.setdefault(n, v)
    nodes = np.array(sorted(values), dtype=np.int64)
    return nodes, np.array([values[n] for n in nodes.tolist()])


def assemble(mesh: Mesh, problem: ProblemSpec, backend=None) -> AssembledSystem:
    """Assemble and reduce the Galerkin system for ``problem`` on ``mesh``."""
    problem.check_segments(mesh)
    A, load = global_matrix(mesh, problem, backend)
    dnodes, dvals = dirichlet_data(mesh, problem)
    free = np.ones(mesh.n_nodes, dtype=bool)
    free[dnodes] = False
    node_of_dof = np.flatnonzero(free)
    if node_of_dof.size == 0:
        raise AssemblyError("every node is constrained; nothing to solve")
    dof_of_node = -np.ones(mesh.n_nodes, dtype=np.int64)
    dof_of_node[node_of_dof] = np.arange(node_of_dof.size)
    Kff = A[node_of_dof][:, node_of_dof].tocsr()
    Kfc = A[node_of_dof][:, dnodes]
    f = load[node_of_dof] - Kfc @ dvals
    Kff.sort_indices()
    return AssembledSystem(Kff, f, node_of_dof, dof_of_node, dnodes, dvals, mesh)


@dataclass(frozen=True)
class MMatrixReport:
    """Sufficient conditions for a nonnegative inverse, evaluated on reduced ``K``.

    ``strict_row_dominance`` holds when every row is weakly diagonally dominant
    and every connected block of the matrix graph contains a strictly dominant
    row (irreducible diagonal dominance).
    """

    positive_diagonal: bool
    nonpositive_offdiagonal: bool
    strict_row_dominance: bool
    strictly_dominant_rows: int
    worst_diagonal: tuple[int, float]
    worst_offdiagonal: tuple[int, int, float]
    worst_dominance_margin: tuple[int, float]

    @property
    def all_hold(self) -> bool:
        return self.positive_diagonal and self.nonpositive_offdiagonal and self.strict_row_dominance


def check_mmatrix_conditions(system, rtol: float = 1e-12) -> MMatrixReport:
    """Check positive diagonal, nonpositive off-diagonals and row dominance.

    Entries smaller than ``rtol * max|K|`` count as zero so assembly roundoff
    does not flip a sign.
    """
    K = system.K if hasattr(system, "K") else sp.csr_matrix(system)
    K = sp.csr_matrix(K)
    tol = rtol * abs(K).max()
    diag = K.diagonal()
    i_min = int(np.argmin(diag))
    off = (K - sp.diags(diag)).tocoo()
    if off.nnz:
        j = int(np.argmax(off.data))
        worst_off = (int(off.row[j]), int(off.col[j]), float(off.data[j]))
    else:
        worst_off = (-1, -1, 0.0)
    off_abs = np.asarray(abs(off).sum(axis=1)).ravel()
    margin = np.abs(diag) - off_abs
    i_marg = int(np.argmin(margin))
    weak = bool(np.all(margin >= -tol))
    strict_rows = margin > tol
    n_comp, labels = connected_components(abs(off) > tol, directed=False)
    blocks_ok = all(np.any(strict_rows[labels == b]) for b in range(n_comp))
    return MMatrixReport(
        positive_diagonal=bool(np.all(diag > tol)),
        nonpositive_offdiagonal=bool(off.nnz == 0 or off.data.max() <= tol),
        strict_row_dominance=weak and blocks_ok,
        strictly_dominant_rows=int(strict_rows.sum()),
        worst_diagonal=(i_min, float(diag[i_min])),
        worst_offdiagonal=worst_off,
        worst_dominance_margin=(i_marg, float(margin[i_marg])),
    )


def critical_h_1d(alpha: float, D: float) -> float:
    """Largest uniform Line2 size with nonpositive off-diagonals: ``sqrt(6 D / alpha)``."""
    if alpha <= 0 or D <= 0:
        raise ValueError(f"alpha and D must be positive, got alpha={alpha}, D={D}")
    return float(np.sqrt(6.0 * D / alpha))


def interior_offdiagonal_1d(h: float, alpha: float, D: float = 1.0, backend=None) -> float:
    """Off-diagonal entry of an interior row of the assembled uniform 1D matrix."""
    from .mesh import build_interval_mesh
    from .model import constant, isotropic_diffusivity

    mesh = build_interval_mesh(4, 0.0, 4.0 * h)
    problem = ProblemSpec(constant(alpha), isotropic_diffusivity(D, ndim=1), constant(0.0),
                          {"left": constant(0.0), "right": constant(0.0)})
    system = assemble(mesh, problem, backend)
    return float(system.K[1, 0])


def empirical_critical_h_1d(alpha: float, D: float = 1.0, rtol: float = 1e-10) -> float:
    """Bisect on ``h`` for the sign change of the assembled interior off-diagonal."""
    lo, hi = 1e-6, 1.0
    while interior_offdiagonal_1d(hi, alpha, D) <= 0:
        hi *= 2.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if interior_offdiagonal_1d(mid, alpha, D) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def write_matrix_market(system: AssembledSystem, path_prefix) -> tuple[Path, Path]:
    """Dump ``K`` (coordinate, 1-based) and ``f`` (array) in Matrix Market text."""
    import scipy.io

    prefix = Path(path_prefix)
    k_path = prefix.with_name(prefix.name + "_K.mtx")
    f_path = prefix.with_name(prefix.name + "_f.mtx")
    scipy.io.mmwrite(str(k_path), system.K, symmetry="symmetric", precision=17)
    scipy.io.mmwrite(str(f_path), system.f[:, None], precision=17)
    return k_path, f_path
