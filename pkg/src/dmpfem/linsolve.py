"""Solvers for the sparse symmetric positive definite systems.

The default is a sparse LDL^T-type factorization: SuperLU with a symmetric
fill-reducing ordering and diagonal pivoting disabled, so the pivots are those
of a Cholesky factorization and a nonpositive pivot exposes an indefinite
matrix. Jacobi-preconditioned CG is available for large meshes.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

CG_RTOL = 1e-10


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """The matrix handed to an SPD solver is not positive definite."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SpdSolver:
    """Factor (or prepare CG for) a sparse SPD matrix once and solve repeatedly.

    Parameters
    ----------
    K : sparse or dense (n, n) matrix
    method : {'direct', 'cg'}
    tol : float
        Relative residual target for CG.
    """

    def __init__(self, K, method: str = "direct", tol: float = CG_RTOL, maxiter: int | None = None):
        self.K = sp.csc_matrix(K, dtype=float)
        self.n = self.K.shape[0]
        self.method = method
        self.tol = tol
        self.maxiter = maxiter or 10 * self.n + 100
        self.iterations = 0
        if method == "direct":
            self._factorize()
        elif method == "cg":
            diag = self.K.diagonal()
            bad = np.flatnonzero(diag <= 0)
            if bad.size:
                raise NotPositiveDefiniteError(f"nonpositive diagonal at index {bad[0]}", int(bad[0]))
            self._inv_diag = 1.0 / diag
        else:
            raise ValueError(f"unknown method {method!r}")

    def _factorize(self):
        if self.n == 0:
            self._lu = None
            return
        try:
            lu = spla.splu(
                self.K,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise NotPositiveDefiniteError(f"factorization failed: {exc}") from exc
        pivots = lu.U.diagonal()
        bad = np.flatnonzero(~(pivots > 0))
        if bad.size:
            # position bad[0] of the factor is column perm_c^-1 of the input
            index = int(np.flatnonzero(lu.perm_c == bad[0])[0])
            raise NotPositiveDefiniteError(
                f"nonpositive pivot {pivots[bad[0]]!r} at index {index}", index
            )
        self._lu = lu

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros(0)
        if self.method == "direct":
            return self._lu.solve(b)
        return self._pcg(b)

    def _pcg(self, b):
        x = np.zeros(self.n)
        r = b.copy()
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return x
        z = self._inv_diag * r
        p = z.copy()
        rz = r @ z
        for it in range(1, self.maxiter + 1):
            Ap = self.K @ p
            curv = p @ Ap
            if curv <= 0:
                i = int(np.argmax(np.abs(p)))
                raise NotPositiveDefiniteError(f"CG breakdown: p^T K p = {curv!r} (largest component {i})", i)
            step = rz / curv
            x += step * p
            r -= step * Ap
            if np.linalg.norm(r) <= self.tol * bnorm:
                self.iterations = it
                return x
            z = self._inv_diag * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise np.linalg.LinAlgError(f"CG did not reach rtol {self.tol} in {self.maxiter} iterations")


def solve_spd(K, b, method: str = "direct", tol: float = CG_RTOL) -> np.ndarray:
    """Solve ``K x = b`` for sparse SPD ``K``."""
    return SpdSolver(K, method=method, tol=tol).solve(b)
