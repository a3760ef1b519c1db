# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the sweep kernels in ``_fallback``.

Each routine fills the output buffer and returns -1, or the index of the
first row / block / cell at which it failed.
"""

import numpy as np
from libc.math cimport fabs, sqrt, INFINITY

DEF PIVOT_RATIO_MIN = 1e-14
DEF TINY_PIVOT = 1e-300


def thomas(const double[:, ::1] lower, const double[:, ::1] diag,
           const double[:, ::1] upper, const double[:, ::1] rhs,
           double[:, ::1] x):
    cdef Py_ssize_t n = diag.shape[0], m = diag.shape[1], i, k
    cdef double[:, ::1] cp = np.empty((n, m))
    cdef double[:, ::1] dp = np.empty((n, m))
    cdef double piv
    for k in range(m):
        piv = diag[0, k]
        if fabs(piv) < TINY_PIVOT:
            return 0
        cp[0, k] = upper[0, k] / piv
        dp[0, k] = rhs[0, k] / piv
    for i in range(1, n):
        for k in range(m):
            piv = diag[i, k] - lower[i, k] * cp[i - 1, k]
            if fabs(piv) < TINY_PIVOT:
                return i
            cp[i, k] = upper[i, k] / piv
            dp[i, k] = (rhs[i, k] - lower[i, k] * dp[i - 1, k]) / piv
    for k in range(m):
        x[n - 1, k] = dp[n - 1, k]
    for i in range(n - 2, -1, -1):
        for k in range(m):
            x[i, k] = dp[i, k] - cp[i, k] * x[i + 1, k]
    return -1


cdef int _lu(double[:, ::1] a, Py_ssize_t[::1] perm) nogil:
    """In-place partial-pivoting LU. Returns 0, or 1 when the pivot ratio is too small."""
    cdef Py_ssize_t m = a.shape[0], i, j, k, p
    cdef double amax, t, dmin = INFINITY, dmax = 0.0
    for k in range(m):
        perm[k] = k
    for k in range(m):
        p = k
        amax = fabs(a[k, k])
        for i in range(k + 1, m):
            if fabs(a[i, k]) > amax:
                amax = fabs(a[i, k])
                p = i
        if p != k:
            for j in range(m):
                t = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = t
            i = perm[k]
            perm[k] = perm[p]
            perm[p] = i
        if amax < dmin:
            dmin = amax
        if amax > dmax:
            dmax = amax
        if amax == 0.0:
            return 1
        for i in range(k + 1, m):
            a[i, k] /= a[k, k]
            t = a[i, k]
            if t != 0.0:
                for j in range(k + 1, m):
                    a[i, j] -= t * a[k, j]
    if not (dmax > 0.0) or dmax == INFINITY or dmin < PIVOT_RATIO_MIN * dmax:
        return 1
    return 0


cdef void _lu_solve(double[:, ::1] a, Py_ssize_t[::1] perm,
                    double[::1] b, double[::1] work) nogil:
    cdef Py_ssize_t m = a.shape[0], i, j
    cdef double s
    for i in range(m):
        work[i] = b[perm[i]]
    for i in range(m):
        s = work[i]
        for j in range(i):
            s -= a[i, j] * work[j]
        work[i] = s
    for i in range(m - 1, -1, -1):
        s = work[i]
        for j in range(i + 1, m):
            s -= a[i, j] * work[j]
        work[i] = s / a[i, i]
    for i in range(m):
        b[i] = work[i]


def block_thomas(const double[:, :, ::1] L, const double[:, :, ::1] D,
                 const double[:, :, ::1] R, const double[:, ::1] rhs,
                 double[:, ::1] x):
    cdef Py_ssize_t n = D.shape[0], m = D.shape[1], i, j, k, l
    cdef double[:, :, ::1] cp = np.empty((n, m, m))
    cdef double[:, ::1] dp = np.empty((n, m))
    cdef double[:, ::1] a = np.empty((m, m))
    cdef double[::1] col = np.empty(m)
    cdef double[::1] work = np.empty(m)
    cdef Py_ssize_t[::1] perm = np.empty(m, dtype=np.intp)
    cdef double s
    for i in range(n):
        # a = D_i - L_i cp_{i-1};  dp_i = rhs_i - L_i dp_{i-1}
        for j in range(m):
            s = rhs[i, j]
            for k in range(m):
                a[j, k] = D[i, j, k]
            if i > 0:
                for l in range(m):
                    if L[i, j, l] != 0.0:
                        s -= L[i, j, l] * dp[i - 1, l]
                        for k in range(m):
                            a[j, k] -= L[i, j, l] * cp[i - 1, l, k]
            dp[i, j] = s
        if _lu(a, perm):
            return i
        _lu_solve(a, perm, dp[i], work)
        if i < n - 1:
            for k in range(m):
                for j in range(m):
                    col[j] = R[i, j, k]
                _lu_solve(a, perm, col, work)
                for j in range(m):
                    cp[i, j, k] = col[j]
    for j in range(m):
        x[n - 1, j] = dp[n - 1, j]
    for i in range(n - 2, -1, -1):
        for j in range(m):
            s = dp[i, j]
            for k in range(m):
                s -= cp[i, j, k] * x[i + 1, k]
            x[i, j] = s
    return -1


def quartic(const double[::1] alpha, const double[::1] beta,
            const double[::1] gamma, const double[::1] t_init,
            double tol, int max_iter, double[::1] root,
            long[::1] iters, unsigned char[::1] clamped):
    cdef Py_ssize_t n = alpha.shape[0], i
    cdef int it
    cdef double a, b, g, lo, hi, T, T2, f, Tn, thr
    for i in range(n):
        a = alpha[i]
        b = beta[i]
        g = gamma[i]
        if g < 0.0:
            clamped[i] = 1
            root[i] = 0.0
            iters[i] = 0
            continue
        clamped[i] = 0
        hi = g / b
        if a > 0.0 and sqrt(sqrt(g / a)) < hi:
            hi = sqrt(sqrt(g / a))
        lo = 0.0
        T = t_init[i]
        if T < 0.0:
            T = 0.0
        if T > hi:
            T = hi
        thr = tol * (g if g > 1.0 else 1.0)
        it = 0
        while True:
            T2 = T * T
            f = a * T2 * T2 + b * T - g
            if fabs(f) <= thr or hi - lo <= 4e-16 * hi:
                break
            if it == max_iter:
                return i
            if f > 0.0:
                hi = T
            else:
                lo = T
            Tn = T - f / (4.0 * a * T2 * T + b)
            if not (Tn >= lo and Tn <= hi):
                Tn = 0.5 * (lo + hi)
            T = Tn
            it += 1
        root[i] = T
        iters[i] = it
    return -1
