"""Pure NumPy kernels.

Same calling convention as the compiled ``_kernels`` module: each routine
returns a status code, ``-1`` on success or the failing index.
"""

import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

PIVOT_RATIO_MIN = 1e-14
TINY_PIVOT = 1e-300


def thomas(lower, diag, upper, rhs, x):
    """Batched tridiagonal solve, one system per column of the (n, m) arrays."""
    n = diag.shape[0]
    cp = np.empty_like(diag)
    dp = np.empty_like(rhs)
    piv = diag[0]
    if np.any(np.abs(piv) < TINY_PIVOT):
        return 0
    cp[0] = upper[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * cp[i - 1]
        if np.any(np.abs(piv) < TINY_PIVOT):
            return i
        cp[i] = upper[i] / piv
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / piv
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return -1


def _factor(block):
    # singular blocks are reported through the pivot check below
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, perm = lu_factor(block, check_finite=False)
    d = np.abs(np.diag(lu))
    dmax = d.max()
    if not np.isfinite(dmax) or dmax == 0.0 or d.min() < PIVOT_RATIO_MIN * dmax:
        return None
    return lu, perm


def block_thomas(L, D, R, rhs, x):
    """Block tridiagonal solve with (n, m, m) blocks and (n, m) right-hand side."""
    n = D.shape[0]
    cp = np.empty_like(R)
    dp = np.empty_like(rhs)
    fac = _factor(D[0])
    if fac is None:
        return 0
    cp[0] = lu_solve(fac, R[0], check_finite=False)
    dp[0] = lu_solve(fac, rhs[0], check_finite=False)
    for i in range(1, n):
        fac = _factor(D[i] - L[i] @ cp[i - 1])
        if fac is None:
            return i
        cp[i] = lu_solve(fac, R[i], check_finite=False)
        dp[i] = lu_solve(fac, rhs[i] - L[i] @ dp[i - 1], check_finite=False)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] @ x[i + 1]
    return -1


def quartic(alpha, beta, gamma, t_init, tol, max_iter, root, iters, clamped):
    """Root of alpha*T**4 + beta*T = gamma on [0, inf), vectorised over cells.

    Newton with a shrinking bracket [lo, hi]; iterates that leave the bracket
    are replaced by bisection. gamma < 0 clamps to zero.
    """
    clamped[:] = gamma < 0.0
    g = np.maximum(gamma, 0.0)
    with np.errstate(divide="ignore"):
        hi = g / beta
        hi_a = np.where(alpha > 0.0, np.sqrt(np.sqrt(g / np.where(alpha > 0.0, alpha, 1.0))), np.inf)
    hi = np.minimum(hi, hi_a)
    lo = np.zeros_like(hi)
    T = np.minimum(np.maximum(t_init, 0.0), hi)
    thr = tol * np.maximum(1.0, np.abs(g))
    iters[:] = 0
    active = np.ones(T.shape, dtype=bool)
    for it in range(max_iter + 1):
        T2 = T * T
        f = alpha * T2 * T2 + beta * T - g
        done = (np.abs(f) <= thr) | (hi - lo <= 4e-16 * hi)
        newly = active & done
        iters[newly] = it
        active &= ~done
        if not active.any():
            break
        if it == max_iter:
            return int(np.flatnonzero(active)[0])
        hi = np.where(active & (f > 0.0), T, hi)
        lo = np.where(active & (f < 0.0), T, lo)
        Tn = T - f / (4.0 * alpha * T2 * T + beta)
        bad = ~((Tn >= lo) & (Tn <= hi))
        Tn = np.where(bad, 0.5 * (lo + hi), Tn)
        T = np.where(active, Tn, T)
    root[:] = np.where(clamped, 0.0, T)
    return -1
