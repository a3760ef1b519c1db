"""Independent dense assemblies used as test oracles.

Every unknown of a step is placed in one vector and the unreduced equations
are written row by row, then solved by Gaussian elimination with partial
pivoting in extended precision (the small-eps systems have condition numbers
near 1e10, beyond what a double-precision oracle can resolve to 1e-10).
Nothing here shares code with the elimination path in radtrans.transport.
"""

import numpy as np

from radtrans.core import TransportState


def solve_extended(A, b):
    """Dense solve in np.longdouble with partial pivoting."""
    A = np.array(A, dtype=np.longdouble)
    b = np.array(b, dtype=np.longdouble)
    n = len(b)
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if p != k:
            A[[k, p]] = A[[p, k]]
            b[[k, p]] = b[[p, k]]
        m = A[k + 1:, k] / A[k, k]
        A[k + 1:, k:] -= m[:, None] * A[k, k:]
        b[k + 1:] -= m * b[k]
    x = np.zeros(n, dtype=np.longdouble)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x.astype(float)


def random_instance(seed, nx=None, nv=None, eps=None, eps_range=(1e-2, 1.0)):
    rng = np.random.default_rng(seed)
    nx = nx or int(rng.integers(2, 9))
    nv = nv or int(rng.integers(1, 5))
    lo, hi = np.log10(eps_range[0]), np.log10(eps_range[1])
    eps = eps if eps is not None else float(10.0 ** rng.uniform(lo, hi))
    T = rng.uniform(0.3, 1.5, nx)
    E = rng.uniform(0.2, 2.0, (nx, nv))
    O = rng.normal(size=(nx + 1, nv))
    state = TransportState(E, O, T, T**4, 0.0)
    sigma = rng.uniform(0.2, 3.0, nx)
    bL = rng.uniform(0.0, 2.0, nv)
    bR = rng.uniform(0.0, 2.0, nv)
    dt = float(10.0 ** rng.uniform(-3, -1))
    consts = dict(a=float(rng.uniform(0.5, 2)), c=float(rng.uniform(0.5, 2)), C_v=float(rng.uniform(0.2, 2)),
                  epsilon=eps)
    return state, sigma, bL, bR, dt, consts


LD = np.longdouble


def midpoint_rule(nv):
    """Velocity nodes and weights formed in extended precision."""
    k = np.arange(nv, dtype=LD)
    return (2 * k + 1) / (2 * LD(nv)), np.full(nv, 1 / LD(nv))


def _ld_consts(consts):
    eps, c, a, Cv = (LD(x) for x in (consts.epsilon, consts.c, consts.a, consts.C_v))
    return eps, c, a * c, Cv


def _nodes(c):
    out = np.empty(len(c) + 1, dtype=LD)
    out[1:-1] = 0.5 * (c[1:] + c[:-1])
    out[0], out[-1] = c[0], c[-1]
    return out


def _layout(nx, nv):
    nE, nO = nx * nv, (nx + 1) * nv
    return nE, nO, (lambda j, k: j * nv + k), (lambda i, k: nE + i * nv + k)


def dense_prediction(state, dt, length, consts, sigma, bL, bR, nonlinear=False):
    """Unknowns (E*, O*, U*).

    Constant opacity: K = 1 and U* couples through g = 4 sigma T^3 / eps^2.
    ``nonlinear``: K = T^3 multiplies the time and transport terms and
    g = 4 sigma / eps^2. All coefficients are formed in extended precision
    from the raw inputs.
    """
    nx, nv = state.E.shape
    eps, c, ac, Cv = _ld_consts(consts)
    v, w = midpoint_rule(nv)
    dx = LD(length) / nx
    dt = LD(dt)
    lam = 1 / (c * dt)
    sigma = np.asarray(sigma, dtype=LD)
    T3 = np.asarray(state.T, dtype=LD) ** 3
    K = T3 if nonlinear else np.ones(nx, dtype=LD)
    g = 4 * sigma / eps**2 * (1 if nonlinear else T3)
    sn, Kn = _nodes(sigma), _nodes(K)
    nE, nO, iE, iO = _layout(nx, nv)
    iU = lambda j: nE + nO + j  # noqa: E731
    N = nE + nO + nx
    A = np.zeros((N, N), dtype=LD)
    b = np.zeros(N, dtype=LD)
    r = 0
    for j in range(nx):
        for k in range(nv):
            A[r, iE(j, k)] = K[j] * lam + sigma[j] / eps**2
            A[r, iO(j + 1, k)] += K[j] * v[k] / dx
            A[r, iO(j, k)] -= K[j] * v[k] / dx
            A[r, iU(j)] = -sigma[j] * ac / eps**2
            b[r] = K[j] * lam * state.E[j, k]
            r += 1
    for i in range(1, nx):
        for k in range(nv):
            A[r, iO(i, k)] = Kn[i] * lam + sn[i] / eps**2
            A[r, iE(i, k)] += Kn[i] * v[k] / (eps**2 * dx)
            A[r, iE(i - 1, k)] -= Kn[i] * v[k] / (eps**2 * dx)
            b[r] = Kn[i] * lam * state.O[i, k]
            r += 1
    for k in range(nv):
        # E_0 + (eps/2)(O_0 + O_1) = b_L ;  E_last - (eps/2)(O_nx-1 + O_nx) = b_R
        A[r, iE(0, k)] = 1.0
        A[r, iO(0, k)] = A[r, iO(1, k)] = eps / 2
        b[r] = bL[k]
        r += 1
        A[r, iE(nx - 1, k)] = 1.0
        A[r, iO(nx, k)] = A[r, iO(nx - 1, k)] = -eps / 2
        b[r] = bR[k]
        r += 1
    for j in range(nx):
        A[r, iU(j)] = Cv / dt + g[j] * ac
        for k in range(nv):
            A[r, iE(j, k)] = -g[j] * w[k]
        b[r] = Cv / dt * state.U[j]
        r += 1
    x = solve_extended(A, b)
    return x[:nE].reshape(nx, nv), x[nE:nE + nO].reshape(nx + 1, nv), x[nE + nO:]


def dense_fluctuation(state, T_new, dt, length, consts, sigma, bL, bR, nonlinear=False):
    """Unknowns (E_J, O_J) with U = T_new^4 fixed; K = T_new^3 if ``nonlinear``."""
    nx, nv = state.E.shape
    eps, c, ac, _ = _ld_consts(consts)
    v, _ = midpoint_rule(nv)
    dx = LD(length) / nx
    dt = LD(dt)
    lam = 1 / (c * dt)
    U = np.asarray(T_new, dtype=LD) ** 4
    sigma = np.asarray(sigma, dtype=LD)
    K = np.asarray(T_new, dtype=LD) ** 3 if nonlinear else np.ones(nx, dtype=LD)
    sn, Kn = _nodes(sigma), _nodes(K)
    nE, nO, iE, iO = _layout(nx, nv)
    N = nE + nO
    A = np.zeros((N, N), dtype=LD)
    b = np.zeros(N, dtype=LD)
    r = 0
    for j in range(nx):
        for k in range(nv):
            # K lam (acU + eps E_J - E^n) + K v dO_J/dx = -(sigma/eps) E_J
            A[r, iE(j, k)] = K[j] * lam * eps + sigma[j] / eps
            A[r, iO(j + 1, k)] += K[j] * v[k] / dx
            A[r, iO(j, k)] -= K[j] * v[k] / dx
            b[r] = K[j] * lam * (state.E[j, k] - ac * U[j])
            r += 1
    for i in range(1, nx):
        for k in range(nv):
            A[r, iO(i, k)] = Kn[i] * lam + sn[i] / eps**2
            A[r, iE(i, k)] += Kn[i] * v[k] / (eps * dx)
            A[r, iE(i - 1, k)] -= Kn[i] * v[k] / (eps * dx)
            b[r] = Kn[i] * lam * state.O[i, k] - Kn[i] * ac * v[k] * (U[i] - U[i - 1]) / (eps**2 * dx)
            r += 1
    for k in range(nv):
        # the inflow relation with E = acU + eps E_J
        A[r, iE(0, k)] = eps
        A[r, iO(0, k)] = A[r, iO(1, k)] = eps / 2
        b[r] = bL[k] - ac * U[0]
        r += 1
        A[r, iE(nx - 1, k)] = eps
        A[r, iO(nx, k)] = A[r, iO(nx - 1, k)] = -eps / 2
        b[r] = bR[k] - ac * U[-1]
        r += 1
    x = solve_extended(A, b)
    return x[:nE].reshape(nx, nv), x[nE:].reshape(nx + 1, nv)


def bisect_quartic(alpha, beta, gamma, iters=200):
    """Nonnegative root of alpha T^4 + beta T = gamma by plain bisection."""
    if gamma <= 0:
        return 0.0
    lo, hi = 0.0, gamma / beta
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if alpha * mid**4 + beta * mid > gamma:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def mirror_transport(state):
    """Reflect x -> L - x: cells reverse, v -> -v swaps E (even) and flips O (odd)."""
    return TransportState(state.E[::-1].copy(), -state.O[::-1].copy(), state.T[::-1].copy(),
                          state.U[::-1].copy(), state.t)
