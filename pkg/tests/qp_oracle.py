"""Exhaustive reference solver for small box-constrained QPs.

Every split of the variables into free / at-lower / at-upper is tried; the
free block is solved exactly and the primal-feasible candidate with the lowest
objective wins. For a strictly convex problem the minimizer is one of these
candidates, so no optimality conditions are needed to identify it.
"""
import itertools

import numpy as np


def enumerate_box_qp(Q, g, lower, upper, tol=1e-12):
    Q = np.asarray(Q, dtype=float)
    g = np.asarray(g, dtype=float)
    lo = np.asarray(lower, dtype=float)
    up = np.asarray(upper, dtype=float)
    n = g.size
    best_x, best_obj = None, np.inf
    scale = max(1.0, np.abs(np.concatenate([lo[np.isfinite(lo)], up[np.isfinite(up)]])).max(initial=0.0))
    for mask in range(1 << n):
        free = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        F = np.flatnonzero(free)
        B = np.flatnonzero(~free)
        # all bound choices for the fixed block, as columns
        choices = [[v for v in (lo[i], up[i]) if np.isfinite(v)] for i in B]
        if any(len(c) == 0 for c in choices):
            continue
        XB = np.array(list(itertools.product(*choices)), dtype=float).T if B.size else np.zeros((0, 1))
        X = np.empty((n, XB.shape[1]))
        X[B] = XB
        if F.size:
            rhs = g[F][:, None] - Q[np.ix_(F, B)] @ XB
            X[F] = np.linalg.solve(Q[np.ix_(F, F)], rhs)
        ok = np.all((X >= lo[:, None] - tol * scale) & (X <= up[:, None] + tol * scale), axis=0)
        if not ok.any():
            continue
        Xf = X[:, ok]
        obj = 0.5 * np.einsum("ik,ij,jk->k", Xf, Q, Xf) - g @ Xf
        k = int(np.argmin(obj))
        if obj[k] < best_obj:
            best_obj, best_x = obj[k], Xf[:, k].copy()
    return best_x, best_obj


def random_box_qp(rng, n):
    """SPD ``Q``, load ``g`` and mixed bounds (finite, one-sided, degenerate)."""
    M = rng.standard_normal((n, n))
    Q = M.T @ M + rng.uniform(0.05, 1.0) * np.eye(n)
    g = rng.standard_normal(n) * rng.uniform(0.5, 5.0)
    lo = rng.uniform(-1.0, 0.5, n)
    up = lo + rng.uniform(0.0, 2.0, n)
    kind = rng.integers(0, 10, n)
    lo[kind == 0] = -np.inf
    up[kind == 1] = np.inf
    up[kind == 2] = lo[kind == 2]
    return Q, g, lo, up
