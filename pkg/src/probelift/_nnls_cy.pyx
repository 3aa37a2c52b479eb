# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Lawson-Hanson NNLS kernel on the normal equations.

Works on the Gram matrix G = A'A and h = A'b, so every inner iteration is
O(k^3) Cholesky on the passive submatrix plus O(n^2) dual updates --
independent of the row count m.  The dispatcher computes G and h once with
BLAS and verifies the KKT conditions on the original system afterwards,
falling back to the pure-python backend if this kernel reports a singular
passive block (status 1) or the verification fails.
"""

import numpy as np

from libc.math cimport sqrt


cdef int _chol_solve(double[:, ::1] g, double[::1] h,
                     long[::1] idx, Py_ssize_t k,
                     double[:, ::1] mat, double[::1] z) nogil:
    """Solve g[idx, idx] z = h[idx] by Cholesky.  Returns 0, or 1 if singular."""
    cdef Py_ssize_t i, j, t
    cdef double s, piv
    for i in range(k):
        for j in range(i + 1):
            mat[i, j] = g[idx[i], idx[j]]
        z[i] = h[idx[i]]
    # in-place lower Cholesky
    for j in range(k):
        s = mat[j, j]
        for t in range(j):
            s -= mat[j, t] * mat[j, t]
        if s <= 1e-300:
            return 1
        piv = sqrt(s)
        mat[j, j] = piv
        for i in range(j + 1, k):
            s = mat[i, j]
            for t in range(j):
                s -= mat[i, t] * mat[j, t]
            mat[i, j] = s / piv
    # forward substitution L y = z
    for i in range(k):
        s = z[i]
        for t in range(i):
            s -= mat[i, t] * z[t]
        z[i] = s / mat[i, i]
    # back substitution L' z = y
    for i in range(k - 1, -1, -1):
        s = z[i]
        for t in range(i + 1, k):
            s -= mat[t, i] * z[t]
        z[i] = s / mat[i, i]
    return 0


def lawson_hanson_gram(double[:, ::1] g, double[::1] h, double tol, long max_iter):
    """Lawson-Hanson on normal equations.

    Returns (status, x, iterations): status 0 = converged, 1 = singular
    passive block (caller should fall back), 2 = iteration bound hit.
    """
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t i, j, t, k, jbest, drop
    cdef long iterations = 0
    cdef double wbest, s, alpha, ratio, xmax

    x_arr = np.zeros(n)
    w_arr = np.asarray(h).copy()
    idx_arr = np.zeros(n, dtype=np.int64)
    mat_arr = np.zeros((n, n))
    z_arr = np.zeros(n)
    passive_arr = np.zeros(n, dtype=np.uint8)

    cdef double[::1] x = x_arr
    cdef double[::1] w = w_arr
    cdef long[::1] idx = idx_arr
    cdef double[:, ::1] mat = mat_arr
    cdef double[::1] z = z_arr
    cdef unsigned char[::1] passive = passive_arr

    cdef Py_ssize_t npass = 0
    cdef int bad

    while True:
        # pick the free variable with the largest dual
        jbest = -1
        wbest = tol
        for j in range(n):
            if not passive[j] and w[j] > wbest:
                wbest = w[j]
                jbest = j
        if jbest < 0:
            break
        passive[jbest] = 1
        idx[npass] = jbest
        npass += 1

        while True:
            iterations += 1
            if iterations > max_iter:
                return 2, x_arr, int(iterations)
            bad = _chol_solve(g, h, idx, npass, mat, z)
            if bad:
                return 1, x_arr, int(iterations)
            s = 1.0
            for i in range(npass):
                if z[i] <= 0.0:
                    s = -1.0
                    break
            if s > 0.0:
                for j in range(n):
                    x[j] = 0.0
                for i in range(npass):
                    x[idx[i]] = z[i]
                break
            # alpha step toward z, stopping at the first boundary
            alpha = 1e308
            for i in range(npass):
                if z[i] <= 0.0:
                    s = x[idx[i]] - z[i]
                    if s < 1e-300:
                        s = 1e-300
                    ratio = x[idx[i]] / s
                    if ratio < alpha:
                        alpha = ratio
            xmax = 1.0
            for i in range(npass):
                x[idx[i]] += alpha * (z[i] - x[idx[i]])
                if x[idx[i]] > xmax:
                    xmax = x[idx[i]]
            # drop variables that hit zero
            k = 0
            for i in range(npass):
                if x[idx[i]] <= 1e-13 * xmax:
                    x[idx[i]] = 0.0
                    passive[idx[i]] = 0
                else:
                    idx[k] = idx[i]
                    k += 1
            npass = k
        # refresh duals: w = h - g x
        for j in range(n):
            s = h[j]
            for t in range(n):
                if x[t] != 0.0:
                    s -= g[j, t] * x[t]
            w[j] = s

    return 0, x_arr, int(iterations)
