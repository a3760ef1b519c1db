"""Banded direct solvers and the Newton iterations used by every scheme.

The sweep kernels come from the compiled ``_kernels`` extension when it is
importable, else from ``_fallback``. Set ``RADTRANS_PURE_PYTHON=1`` to force
the fallback. ``BACKEND`` records which one was picked.
"""

import importlib
import os
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from radtrans.errors import InvalidArgumentError, NonConvergenceError, SingularSystemError
from radtrans.linalg import _fallback

if os.environ.get("RADTRANS_PURE_PYTHON"):
    _kernels = _fallback
    BACKEND = "python"
else:
    try:
        from radtrans.linalg import _kernels
        BACKEND = "cython"
    except ImportError:
        _kernels = _fallback
        BACKEND = "python"

__all__ = [
    "BACKEND",
    "Tridiagonal",
    "BlockTridiagonal",
    "QuarticResult",
    "thomas_solve",
    "block_thomas_solve",
    "newton_quartic",
    "newton_tridiag_system",
    "use_backend",
]


def use_backend(name):
    """Switch kernels at runtime ("cython" or "python"); returns the previous name."""
    global _kernels, BACKEND
    prev = BACKEND
    if name == "python":
        _kernels, BACKEND = _fallback, "python"
    elif name == "cython":
        # import by full name: the package attribute may currently hold the fallback
        _kernels, BACKEND = importlib.import_module("radtrans.linalg._kernels"), "cython"
    else:
        raise InvalidArgumentError(f"unknown backend {name!r}")
    return prev


@dataclass
class Tridiagonal:
    """``lower[i]`` multiplies x[i-1], ``upper[i]`` multiplies x[i+1].

    Arrays may be (n,) or (n, m); the trailing axis holds m independent systems.
    ``lower[0]`` and ``upper[n-1]`` are ignored.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def n(self):
        return self.diag.shape[0]

    def matvec(self, x):
        y = self.diag * x
        y[1:] += self.lower[1:] * x[:-1]
        y[:-1] += self.upper[:-1] * x[1:]
        return y

    def to_dense(self):
        if self.diag.ndim != 1:
            raise InvalidArgumentError("to_dense needs a single (unbatched) system")
        n = self.n
        A = np.diag(self.diag.astype(float))
        A[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        A[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return A


@dataclass
class BlockTridiagonal:
    """Blocks of shape (n, m, m). ``lower[0]`` and ``upper[n-1]`` are ignored."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def n(self):
        return self.diag.shape[0]

    @property
    def m(self):
        return self.diag.shape[1]

    def matvec(self, x):
        y = np.einsum("ijk,ik->ij", self.diag, x)
        y[1:] += np.einsum("ijk,ik->ij", self.lower[1:], x[:-1])
        y[:-1] += np.einsum("ijk,ik->ij", self.upper[:-1], x[1:])
        return y

    def to_dense(self):
        n, m = self.n, self.m
        A = np.zeros((n * m, n * m))
        for i in range(n):
            A[i * m:(i + 1) * m, i * m:(i + 1) * m] = self.diag[i]
            if i > 0:
                A[i * m:(i + 1) * m, (i - 1) * m:i * m] = self.lower[i]
            if i < n - 1:
                A[i * m:(i + 1) * m, (i + 1) * m:(i + 2) * m] = self.upper[i]
        return A


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def thomas_solve(sys, rhs):
    """Solve a (batched) tridiagonal system by forward elimination / back substitution."""
    rhs = np.asarray(rhs, dtype=np.float64)
    flat = rhs.ndim == 1
    shape2 = (rhs.shape[0], 1) if flat else rhs.shape

    def as2d(a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim == 1:
            a = a[:, None]
        return _c(np.broadcast_to(a, shape2))

    lower, diag, upper = as2d(sys.lower), as2d(sys.diag), as2d(sys.upper)
    b = _c(rhs.reshape(shape2))
    x = np.empty(shape2)
    status = _kernels.thomas(lower, diag, upper, b, x)
    if status >= 0:
        raise SingularSystemError(status, f"zero pivot in tridiagonal elimination at row {status}")
    return x[:, 0] if flat else x


def block_thomas_solve(sys, rhs):
    """Solve a block-tridiagonal system; ``rhs`` has shape (n, m)."""
    x = np.empty((sys.n, sys.m))
    status = _kernels.block_thomas(_c(sys.lower), _c(sys.diag), _c(sys.upper), _c(rhs), x)
    if status >= 0:
        raise SingularSystemError(status, f"ill-conditioned diagonal block at spatial index {status}")
    return x


class QuarticResult(NamedTuple):
    root: np.ndarray
    iterations: np.ndarray
    clamped: np.ndarray


def newton_quartic(alpha, beta, gamma, T_init, tol=1e-12, max_iter=50):
    """Nonnegative root of ``alpha*T**4 + beta*T = gamma``, elementwise.

    Needs alpha >= 0 and beta > 0, which make the left side strictly
    increasing on [0, inf). Entries with gamma < 0 have no nonnegative root;
    they return 0 and are marked in ``clamped``. Scalars in, scalars out.
    """
    scalar = all(np.ndim(v) == 0 for v in (alpha, beta, gamma, T_init))
    alpha, beta, gamma, T_init = (_c(np.atleast_1d(v)) for v in np.broadcast_arrays(alpha, beta, gamma, T_init))
    for name, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma), ("T_init", T_init)):
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError(f"non-finite {name} in quartic solve")
    if np.any(alpha < 0.0) or np.any(beta <= 0.0):
        raise InvalidArgumentError("quartic needs alpha >= 0 and beta > 0")
    n = alpha.shape[0]
    root = np.empty(n)
    iters = np.zeros(n, dtype=np.int_)
    clamped = np.zeros(n, dtype=np.uint8)
    status = _kernels.quartic(alpha, beta, gamma, T_init, float(tol), int(max_iter), root, iters, clamped)
    if status >= 0:
        g = gamma[status]
        t = root[status] if np.isfinite(root[status]) else T_init[status]
        raise NonConvergenceError(abs(alpha[status] * t**4 + beta[status] * t - g), index=status)
    clamped = clamped.astype(bool)
    if scalar:
        return QuarticResult(float(root[0]), int(iters[0]), bool(clamped[0]))
    return QuarticResult(root, iters, clamped)


def newton_tridiag_system(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], Tridiagonal],
    x0,
    tol=1e-12,
    max_iter=50,
    lower_bound=None,
):
    """Damped Newton for a system whose Jacobian is tridiagonal.

    The step is halved while the residual norm grows (down to a 1e-4
    damping floor). With ``lower_bound`` set, iterates are projected onto
    x >= lower_bound. Returns ``(x, iterations)``.
    """
    x = np.array(x0, dtype=np.float64)
    r = residual(x)
    rn = np.max(np.abs(r)) if r.size else 0.0
    for it in range(max_iter + 1):
        if rn <= tol:
            return x, it
        if it == max_iter:
            break
        dx = thomas_solve(jacobian(x), -r)
        lam = 1.0
        while True:
            xn = x + lam * dx
            if lower_bound is not None:
                xn = np.maximum(xn, lower_bound)
            rn_new_vec = residual(xn)
            rn_new = np.max(np.abs(rn_new_vec))
            if rn_new <= rn or lam <= 1e-4:
                break
            lam *= 0.5
        x, r, rn = xn, rn_new_vec, rn_new
    raise NonConvergenceError(rn)
