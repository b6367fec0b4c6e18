# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled assembly kernels. Same contract as ``dmpfem._kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def element_arrays(const double[:, :, ::1] coords, const double[:, ::1] N,
                   const double[:, :, ::1] dN, const double[::1] weights,
                   const double[:, :, :, ::1] D, const double[:, ::1] alpha,
                   const double[:, ::1] f):
    cdef Py_ssize_t E = coords.shape[0], k = coords.shape[1], nd = coords.shape[2]
    cdef Py_ssize_t nq = N.shape[0]
    if nd > 2 or k > 4:
        raise ValueError("kernels support up to 2D elements with at most 4 nodes")
    K_arr = np.zeros((E, k, k))
    M_arr = np.zeros((E, k, k))
    F_arr = np.zeros((E, k))
    det_arr = np.zeros((E, nq))
    cdef double[:, :, ::1] K = K_arr
    cdef double[:, :, ::1] M = M_arr
    cdef double[:, ::1] F = F_arr
    cdef double[:, ::1] dets = det_arr
    cdef double J[2][2]
    cdef double inv[2][2]
    cdef double G[4][2]
    cdef double DG[4][2]
    cdef double det, wdet, s
    cdef Py_ssize_t e, q, a, b, i, j

    for e in range(E):
        for q in range(nq):
            for i in range(nd):
                for j in range(nd):
                    s = 0.0
                    for a in range(k):
                        s += dN[q, a, i] * coords[e, a, j]
                    J[i][j] = s
            if nd == 1:
                det = J[0][0]
                inv[0][0] = 1.0 / det if det != 0.0 else 0.0
            else:
                det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
                if det != 0.0:
                    inv[0][0] = J[1][1] / det
                    inv[0][1] = -J[0][1] / det
                    inv[1][0] = -J[1][0] / det
                    inv[1][1] = J[0][0] / det
            dets[e, q] = det
            wdet = weights[q] * det
            # physical gradients G[a][j] = sum_i inv[j][i] dN[q, a, i]
            for a in range(k):
                for j in range(nd):
                    s = 0.0
                    for i in range(nd):
                        s += inv[j][i] * dN[q, a, i]
                    G[a][j] = s
            for a in range(k):
                for j in range(nd):
                    s = 0.0
                    for i in range(nd):
                        s += D[e, q, j, i] * G[a][i]
                    DG[a][j] = s
            for a in range(k):
                F[e, a] += wdet * f[e, q] * N[q, a]
                for b in range(k):
                    s = 0.0
                    for j in range(nd):
                        s += G[a][j] * DG[b][j]
                    K[e, a, b] += wdet * s
                    M[e, a, b] += wdet * alpha[e, q] * N[q, a] * N[q, b]
    return K_arr, M_arr, F_arr, det_arr


def csr_from_triplets(rows, cols, vals, Py_ssize_t n_rows):
    cdef const cnp.int64_t[::1] r = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const cnp.int64_t[::1] c = np.ascontiguousarray(cols, dtype=np.int64)
    cdef const double[::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0], t, p, lo, hi, m, pos, nnz
    cdef cnp.int64_t key
    cdef double val

    # stable counting sort by row
    counts_arr = np.zeros(n_rows + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    for t in range(n):
        counts[r[t] + 1] += 1
    for t in range(n_rows):
        counts[t + 1] += counts[t]
    col_arr = np.empty(n, dtype=np.int64)
    val_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] cs = col_arr
    cdef double[::1] vs = val_arr
    fill_arr = counts_arr[:-1].copy()
    cdef cnp.int64_t[::1] fill = fill_arr
    for t in range(n):
        p = fill[r[t]]
        cs[p] = c[t]
        vs[p] = v[t]
        fill[r[t]] += 1

    indptr_arr = np.zeros(n_rows + 1, dtype=np.int64)
    indices_arr = np.empty(n, dtype=np.int64)
    data_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] indptr = indptr_arr
    cdef cnp.int64_t[::1] indices = indices_arr
    cdef double[::1] data = data_arr
    nnz = 0
    for t in range(n_rows):
        lo = counts[t]
        hi = counts[t + 1]
        # stable insertion sort of this row by column
        for p in range(lo + 1, hi):
            key = cs[p]
            val = vs[p]
            m = p - 1
            while m >= lo and cs[m] > key:
                cs[m + 1] = cs[m]
                vs[m + 1] = vs[m]
                m -= 1
            cs[m + 1] = key
            vs[m + 1] = val
        pos = lo
        while pos < hi:
            key = cs[pos]
            val = vs[pos]
            pos += 1
            while pos < hi and cs[pos] == key:
                val += vs[pos]
                pos += 1
            indices[nnz] = key
            data[nnz] = val
            nnz += 1
        indptr[t + 1] = nnz
    return indptr_arr, indices_arr[:nnz].copy(), data_arr[:nnz].copy()
