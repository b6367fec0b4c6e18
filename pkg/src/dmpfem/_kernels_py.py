"""Pure numpy implementations of the assembly kernels (fallback backend)."""
import numpy as np


def element_arrays(coords, N, dN, weights, D, alpha, f):
    """Element stiffness, decay mass and load for a batch of same-kind elements.

    Parameters
    ----------
    coords : (E, k, nd) node coordinates per element
    N, dN : (q, k) shape values and (q, k, nd) reference derivatives
    weights : (q,) reference quadrature weights
    D : (E, q, nd, nd) diffusivity at quadrature points
    alpha, f : (E, q) decay and source at quadrature points

    Returns
    -------
    K, M : (E, k, k)
    F : (E, k)
    detJ : (E, q)
    """
    J = np.einsum("qai,eaj->eqij", dN, coords)
    detJ = np.linalg.det(J)
    invJ = np.linalg.inv(J)
    G = np.einsum("eqji,qai->eqaj", invJ, dN)
    wdet = weights[None, :] * detJ
    K = np.einsum("eq,eqaj,eqjl,eqbl->eab", wdet, G, D, G)
    M = np.einsum("eq,qa,qb->eab", wdet * alpha, N, N)
    F = np.einsum("eq,qa->ea", wdet * f, N)
    return K, M, F, detJ


def csr_from_triplets(rows, cols, vals, n_rows):
    """Sum duplicate (row, col) entries into CSR arrays with sorted columns.

    Duplicates are accumulated in input order, so results are reproducible.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    order = np.lexsort((cols, rows))
    r, c, v = rows[order], cols[order], vals[order]
    if r.size == 0:
        return np.zeros(n_rows + 1, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0)
    start = np.ones(r.size, dtype=bool)
    start[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    heads = np.flatnonzero(start)
    data = np.add.reduceat(v, heads)
    indices = c[heads]
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(indptr, r[heads] + 1, 1)
    return np.cumsum(indptr), indices, data
