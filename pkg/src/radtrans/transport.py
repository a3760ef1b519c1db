"""Asymptotic-preserving prediction-correction-projection scheme for the
1D gray radiative transfer equation in even-odd parity form.

One step (``ap_step``):

1. predict  -- linear implicit solve for (E*, O*, U*). U* is eliminated
   cell by cell, O* node by node, leaving a block-tridiagonal system in E*
   whose nv x nv blocks are diagonal plus a rank-one velocity coupling.
2. correct  -- a scalar quartic per cell for T^{n+1}, then one tridiagonal
   solve per velocity for the fluctuation (E_J, O_J).
3. project  -- U = T^4, E = a c U + eps E_J, O = O_J.

The T^-3 opacity variants multiply the transport and time-derivative terms
by K = T^3 instead of dividing sigma by T^3, so cold cells (K = 0) are
handled without special cases: there O = 0 and E relaxes to a c U.

Boundaries use the parity ghost relations
    O_0  = (2/eps)(b_L - E_0)  - O_1
    O_nx = (2/eps)(E_nx-1 - b_R) - O_nx-1
which place the inflow condition at the first/last cell center.
"""

from dataclasses import dataclass

import numpy as np

from radtrans.core import (
    DEFAULT_OPTIONS,
    StepDiagnostics,
    TransportState,
    is_temperature_dependent,
    opacity_at_centers,
    opacity_at_nodes,
)
from radtrans.errors import InstabilityError, InvalidArgumentError
from radtrans.linalg import BlockTridiagonal, Tridiagonal, block_thomas_solve, newton_quartic, thomas_solve

__all__ = [
    "PredictionOutput",
    "FluctuationOutput",
    "predict",
    "predict_nlopacity",
    "correct_temperature",
    "correct_temperature_nlopacity",
    "correct_fluctuation",
    "correct_fluctuation_nlopacity",
    "project",
    "ap_step",
    "ap_step_nlopacity",
    "inflow_mobility",
    "energy_balance_residual",
    "assemble_prediction",
]


@dataclass(frozen=True)
class PredictionOutput:
    E_star: np.ndarray
    O_star: np.ndarray
    U_star: np.ndarray


@dataclass(frozen=True)
class FluctuationOutput:
    E_J: np.ndarray
    O_J: np.ndarray
    T_new: np.ndarray


def _check_finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InstabilityError(f"non-finite values in {name}")


def _flux_rows(a, b, phi, g_left, g_right):
    """Write F_j = O_{j+1} - O_j as f0 + fm X_{j-1} + fc X_j + fp X_{j+1}.

    Interior nodes: O_i = a_i + b_i (X_i - X_{i-1}).
    Left node:      O_0  = g_left - phi X_0 - O_1.
    Right node:     O_nx = phi X_{nx-1} - g_right - O_{nx-1}.
    """
    f0 = a[1:] - a[:-1]
    fm = b[:-1].copy()
    fc = -(b[1:] + b[:-1])
    fp = b[1:].copy()
    f0[0] = 2.0 * a[1] - g_left
    fm[0] = 0.0
    fc[0] = phi - 2.0 * b[1]
    fp[0] = 2.0 * b[1]
    f0[-1] = -g_right - 2.0 * a[-2]
    fm[-1] = 2.0 * b[-2]
    fc[-1] = phi - 2.0 * b[-2]
    fp[-1] = 0.0
    return f0, fm, fc, fp


def _recover_O(a, b, X, phi, g_left, g_right):
    O = np.empty_like(a)
    O[1:-1] = a[1:-1] + b[1:-1] * (X[1:] - X[:-1])
    O[0] = g_left - phi * X[0] - O[1]
    O[-1] = phi * X[-1] - g_right - O[-2]
    return O


def _node_K(Kc):
    return opacity_at_nodes(Kc)


# --------------------------------------------------------------------------
# prediction


def _prediction_pieces(state, dt, grid, quad, consts, sigma_c, Kc, g, bc):
    eps = consts.epsilon
    lam = 1.0 / (consts.c * dt)
    v = quad.nodes
    sigma_n = opacity_at_nodes(sigma_c)
    Kn = _node_K(Kc)

    den = Kn * lam + sigma_n / eps**2
    a = (Kn * lam / den)[:, None] * state.O
    b = -(Kn / den)[:, None] * (v / (eps**2 * grid.dx))[None, :]
    a[0] = a[-1] = 0.0
    b[0] = b[-1] = 0.0
    phi = 2.0 / eps
    g_left = phi * bc.left_intensity
    g_right = phi * bc.right_intensity
    return dict(
        lam=lam,
        flux=(a, b, phi, g_left, g_right),
        rows=_flux_rows(a, b, phi, g_left, g_right),
        s_c=sigma_c / eps**2,
        Dden=consts.C_v / dt + g * consts.ac,
        tr=Kc[:, None] * (v / grid.dx)[None, :],
    )


def assemble_prediction(state, dt, grid, quad, consts, sigma_c, Kc, g, bc):
    """Eliminate U* and O* and build the block system for E*.

    ``Kc`` multiplies the time and transport terms (ones for constant
    opacity), ``g`` is the U*-coupling coefficient 4 sigma T^3 / eps^2 or
    4 sigma / eps^2. Each diagonal block is diag(K lam + s + K v fc / dx)
    minus the rank-one coupling (s a c g / D) 1 w^T. Returns the block
    system, its right-hand side and the pieces needed for back-substitution.
    """
    p = _prediction_pieces(state, dt, grid, quad, consts, sigma_c, Kc, g, bc)
    f0, fm, fc, fp = p["rows"]
    s_c, Dden, tr, lam = p["s_c"], p["Dden"], p["tr"], p["lam"]
    w, nv, nx = quad.weights, quad.nv, grid.nx
    rank1 = s_c * consts.ac * g / Dden

    idx = np.arange(nv)
    Dblk = np.zeros((nx, nv, nv))
    Lblk = np.zeros((nx, nv, nv))
    Rblk = np.zeros((nx, nv, nv))
    Dblk -= rank1[:, None, None] * w[None, None, :]
    Dblk[:, idx, idx] += (Kc * lam + s_c)[:, None] + tr * fc
    Lblk[:, idx, idx] = tr * fm
    Rblk[:, idx, idx] = tr * fp
    rhs = (Kc * lam)[:, None] * state.E + (s_c * consts.ac * consts.C_v / dt * state.U / Dden)[:, None] - tr * f0
    return BlockTridiagonal(Lblk, Dblk, Rblk), rhs, p["flux"] + (Dden,)


def _predict(state, dt, grid, quad, consts, sigma_c, Kc, g, bc):
    # Solved in defect form for E* - E^n. The O(1/eps^2) relaxation is
    # written as s (E_k - <E>) + m (<E> - a c U^n) with m = s (C_v/dt) / D,
    # differences that vanish exactly at equilibrium.
    sys, _, (a, b, phi, gl, gr, Dden) = assemble_prediction(state, dt, grid, quad, consts, sigma_c, Kc, g, bc)
    w = quad.weights
    E0 = state.E
    s_c = sigma_c / consts.epsilon**2
    m = s_c * (consts.C_v / dt) / Dden
    spread = (E0[:, :, None] - E0[:, None, :]) @ w  # E_k - <E>
    gap = (E0 - consts.ac * state.U[:, None]) @ w  # <E> - a c U^n
    O0 = _recover_O(a, b, E0, phi, gl, gr)
    tr = Kc[:, None] * (quad.nodes / grid.dx)[None, :]
    resid = -(s_c[:, None] * spread + (m * gap)[:, None] + tr * (O0[1:] - O0[:-1]))
    dE = block_thomas_solve(sys, resid)
    E = E0 + dE
    U = state.U + g * (gap + dE @ w) / Dden
    O = _recover_O(a, b, E, phi, gl, gr)
    _check_finite("prediction", E, O, U)
    return PredictionOutput(E, O, U)


def _require_constant(opacity):
    if is_temperature_dependent(opacity):
        raise InvalidArgumentError("use the *_nlopacity variant for TemperatureDependent opacity")


def predict(state, dt, grid, quad, consts, opacity, bc):
    """Prediction for T-independent opacity; U* couples through 4 sigma (T^n)^3 / eps^2."""
    _require_constant(opacity)
    sigma = opacity_at_centers(opacity, grid)
    g = 4.0 * sigma * state.T**3 / consts.epsilon**2
    return _predict(state, dt, grid, quad, consts, sigma, np.ones(grid.nx), g, bc)


def inflow_mobility(T, quad, consts, bc):
    """Cell values of K = T^3 with each boundary cell raised to T_in^3.

    T_in = (<b> / a c)^(1/4) is the temperature of the incoming half-range
    mean. A cold boundary cell has K ~ 0, which makes it opaque to the
    prediction while the temperature update still receives the full O(1/eps)
    ghost inflow; the floor lets the prediction see that cell heat up.
    """
    K = T**3
    for cell, b in ((0, bc.left_intensity), (-1, bc.right_intensity)):
        T_in = (max(float(quad.weights @ b), 0.0) / consts.ac) ** 0.25
        K[cell] = max(K[cell], T_in**3)
    return K


def predict_nlopacity(state, dt, grid, quad, consts, opacity, bc, K=None):
    """Prediction for sigma / T^3 with K = (T^n)^3 multiplied onto the left side.

    ``K`` overrides the cell values of K (the Picard reference freezes it
    at its own iterate).
    """
    if not is_temperature_dependent(opacity):
        raise InvalidArgumentError("predict_nlopacity needs a TemperatureDependent opacity")
    sigma = opacity_at_centers(opacity, grid)
    Kc = state.T**3 if K is None else np.asarray(K, dtype=float)
    g = 4.0 * sigma / consts.epsilon**2
    return _predict(state, dt, grid, quad, consts, sigma, Kc, g, bc)


# --------------------------------------------------------------------------
# correction


def _solve_temperature(state, pred, dt, grid, quad, consts, sigma, Kstar, opts):
    eps = consts.epsilon
    wv = quad.weights * quad.nodes
    free = sigma <= opts.sigma_floor
    sig = np.where(free, 1.0, sigma)
    alpha = np.full(grid.nx, consts.a / dt)
    beta = consts.C_v / dt + eps**2 * consts.C_v * Kstar / (consts.c * sig * dt**2)
    source = state.E @ quad.weights / (consts.c * dt) - (pred.O_star[1:] - pred.O_star[:-1]) @ wv / grid.dx
    gamma = beta * state.T + source
    res = newton_quartic(alpha, beta, gamma, state.T, tol=opts.newton_tol, max_iter=opts.newton_max_iter)
    T = np.where(free, state.T, res.root)
    clamped = res.clamped & ~free
    return T, res.iterations, clamped


def correct_temperature(state, pred, dt, grid, quad, consts, opacity, opts=DEFAULT_OPTIONS, return_info=False):
    """Per-cell quartic for T^{n+1}. Cells with sigma <= sigma_floor keep T^n."""
    _require_constant(opacity)
    sigma = opacity_at_centers(opacity, grid)
    T, iters, clamped = _solve_temperature(state, pred, dt, grid, quad, consts, sigma, np.ones(grid.nx), opts)
    return (T, iters, clamped) if return_info else T


def correct_temperature_nlopacity(state, pred, dt, grid, quad, consts, opacity, opts=DEFAULT_OPTIONS,
                                  return_info=False):
    """Quartic with the K* = (U*)^(3/4)-weighted relaxation term; K* = 0 is allowed."""
    sigma = opacity_at_centers(opacity, grid)
    if np.any(sigma <= opts.sigma_floor):
        raise InvalidArgumentError("T-dependent opacity needs a positive base opacity")
    Kstar = np.maximum(pred.U_star, 0.0) ** 0.75
    T, iters, clamped = _solve_temperature(state, pred, dt, grid, quad, consts, sigma, Kstar, opts)
    return (T, iters, clamped) if return_info else T


def _fluctuation(state, T_new, dt, grid, quad, consts, sigma_c, Kc, bc):
    eps = consts.epsilon
    lam = 1.0 / (consts.c * dt)
    v = quad.nodes
    U = T_new**4
    sigma_n = opacity_at_nodes(sigma_c)
    Kn = _node_K(Kc)

    den = Kn * lam + sigma_n / eps**2
    a = np.zeros_like(state.O)
    dU = np.zeros(grid.nx + 1)
    dU[1:-1] = U[1:] - U[:-1]
    a[:] = (Kn / den)[:, None] * (lam * state.O - consts.ac * v[None, :] * dU[:, None] / (eps**2 * grid.dx))
    b = -(Kn / den)[:, None] * (v / (eps * grid.dx))[None, :]
    a[0] = a[-1] = 0.0
    b[0] = b[-1] = 0.0
    phi = 2.0
    g_left = 2.0 / eps * (bc.left_intensity - consts.ac * U[0])
    g_right = 2.0 / eps * (bc.right_intensity - consts.ac * U[-1])
    f0, fm, fc, fp = _flux_rows(a, b, phi, g_left, g_right)

    tr = Kc[:, None] * (v / grid.dx)[None, :]
    diag = (Kc * lam * eps + sigma_c / eps)[:, None] + tr * fc
    rhs = (Kc * lam)[:, None] * (state.E - consts.ac * U[:, None]) - tr * f0
    EJ = thomas_solve(Tridiagonal(tr * fm, diag, tr * fp), rhs)
    OJ = _recover_O(a, b, EJ, phi, g_left, g_right)
    _check_finite("fluctuation", EJ, OJ)
    return FluctuationOutput(EJ, OJ, T_new)


def correct_fluctuation(state, pred, T_new, dt, grid, quad, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """One tridiagonal solve per velocity for (E_J, O_J) with U replaced by T_new^4."""
    _require_constant(opacity)
    sigma = opacity_at_centers(opacity, grid)
    sigma = np.where(sigma <= opts.sigma_floor, 0.0, sigma)
    return _fluctuation(state, T_new, dt, grid, quad, consts, sigma, np.ones(grid.nx), bc)


def correct_fluctuation_nlopacity(state, pred, T_new, dt, grid, quad, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """As ``correct_fluctuation`` with K^{n+1} = T_new^3 multipliers."""
    sigma = opacity_at_centers(opacity, grid)
    return _fluctuation(state, T_new, dt, grid, quad, consts, sigma, T_new**3, bc)


# --------------------------------------------------------------------------
# projection and full steps


def project(state, T_new, fluct, consts, bc, dt):
    eps = consts.epsilon
    U = T_new**4
    E = consts.ac * U[:, None] + eps * fluct.E_J
    O = fluct.O_J.copy()
    O[0] = 2.0 / eps * (bc.left_intensity - E[0]) - O[1]
    O[-1] = 2.0 / eps * (E[-1] - bc.right_intensity) - O[-2]
    return TransportState(E, O, T_new, U, state.t + dt)


def energy_balance_residual(state_n, state_np1, pred, dt, grid, quad, consts, opacity):
    """Per-cell residual of the discrete energy balance

        A + C_v (T' - T)/dt + <v dO*>/dx
            - [(K* - K') A + K* <v dO*>/dx - K' <v dO'>/dx] / (c sigma dt / eps^2 + K*)

    with A = (<E'> - <E>)/(c dt). The bracket is the exact difference
    between the fluctuation used in the temperature update and the one
    solved for afterwards. K* = K' = 1 for constant opacity; otherwise
    K* = (U*)^(3/4) and K' = T'^3.
    """
    eps = consts.epsilon
    sigma = opacity_at_centers(opacity, grid)
    if is_temperature_dependent(opacity):
        Ks, Kn = np.maximum(pred.U_star, 0.0) ** 0.75, state_np1.T**3
    else:
        Ks = Kn = np.ones(grid.nx)
    wv = quad.weights * quad.nodes
    div_star = (pred.O_star[1:] - pred.O_star[:-1]) @ wv / grid.dx
    div_new = (state_np1.O[1:] - state_np1.O[:-1]) @ wv / grid.dx
    A = (state_np1.E @ quad.weights - state_n.E @ quad.weights) / (consts.c * dt)
    gap = ((Ks - Kn) * A + Ks * div_star - Kn * div_new) / (consts.c * sigma * dt / eps**2 + Ks)
    return A + consts.C_v * (state_np1.T - state_n.T) / dt + div_star - gap


def _diagnostics(state, new, pred, dt, grid, quad, consts, opacity, iters, clamped, opts):
    r = energy_balance_residual(state, new, pred, dt, grid, quad, consts, opacity)
    return StepDiagnostics.for_state(
        new.T,
        (new.E, new.O, new.T, new.U),
        opts.blowup_bound,
        newton_iterations_max=int(np.max(iters)),
        energy_residual_max=float(np.max(np.abs(r[1:-1]))) if r.size > 2 else 0.0,
        clamped_cells=int(np.count_nonzero(clamped)),
    )


def ap_step(state, dt, grid, quad, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """predict -> correct_temperature -> correct_fluctuation -> project."""
    pred = predict(state, dt, grid, quad, consts, opacity, bc)
    T, iters, clamped = correct_temperature(state, pred, dt, grid, quad, consts, opacity, opts, return_info=True)
    fl = correct_fluctuation(state, pred, T, dt, grid, quad, consts, opacity, bc, opts)
    new = project(state, T, fl, consts, bc, dt)
    return new, _diagnostics(state, new, pred, dt, grid, quad, consts, opacity, iters, clamped, opts)


def ap_step_nlopacity(state, dt, grid, quad, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """The same pipeline for sigma_T = sigma / T^3.

    With ``opts.inflow_mobility`` (the default) the prediction uses
    ``inflow_mobility`` for K; otherwise K = (T^n)^3 everywhere.
    """
    K = inflow_mobility(state.T, quad, consts, bc) if opts.inflow_mobility else None
    pred = predict_nlopacity(state, dt, grid, quad, consts, opacity, bc, K=K)
    T, iters, clamped = correct_temperature_nlopacity(state, pred, dt, grid, quad, consts, opacity, opts,
                                                      return_info=True)
    fl = correct_fluctuation_nlopacity(state, pred, T, dt, grid, quad, consts, opacity, bc, opts)
    new = project(state, T, fl, consts, bc, dt)
    return new, _diagnostics(state, new, pred, dt, grid, quad, consts, opacity, iters, clamped, opts)
