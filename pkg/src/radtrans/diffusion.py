"""Solvers for the nonlinear degenerate diffusion limit

    a d_t T^4 + C_v d_t T = d_x (a c / (D_d sigma) d_x T^4)

on the cell-centered grid: the three-stage prediction-correction-projection
scheme (constant and T^-3 opacity), the two-stage variant without
correction (kept as a negative control: it cannot move a front), and fully
implicit Newton references.

Face coefficients live on nodes (length nx + 1). Boundary closures:
Dirichlet puts a ghost cell at distance dx holding the boundary value,
ZeroFlux zeroes the boundary face coefficient.
"""

import numpy as np

from radtrans.core import (
    DEFAULT_OPTIONS,
    Dirichlet,
    DiffusionState,
    StepDiagnostics,
    is_temperature_dependent,
    opacity_at_centers,
    opacity_at_nodes,
)
from radtrans.errors import InvalidArgumentError
from radtrans.linalg import Tridiagonal, newton_quartic, newton_tridiag_system, thomas_solve

__all__ = [
    "diffusion3_step",
    "diffusion3_nlopacity_step",
    "diffusion2stage_step",
    "implicit_diffusion_step",
    "implicit_diffusion_T7_step",
    "predict_U",
    "flux_divergence",
    "implicit_system",
]


def _ghosts(bc, power):
    """Ghost values of T**power (None for zero-flux ends)."""
    out = []
    for d in (bc.left_diffusion, bc.right_diffusion):
        out.append(d.T**power if isinstance(d, Dirichlet) else None)
    return out


def _close_faces(coef, bc):
    coef = np.array(coef, dtype=float)
    if not isinstance(bc.left_diffusion, Dirichlet):
        coef[0] = 0.0
    if not isinstance(bc.right_diffusion, Dirichlet):
        coef[-1] = 0.0
    return coef


def flux_divergence(W, coef, dx, ghost_left=None, ghost_right=None):
    """(1/dx^2) [coef_{j+1} (W_{j+1} - W_j) - coef_j (W_j - W_{j-1})] with ghost ends."""
    ext = np.empty(W.shape[0] + 2)
    ext[1:-1] = W
    ext[0] = W[0] if ghost_left is None else ghost_left
    ext[-1] = W[-1] if ghost_right is None else ghost_right
    flux = coef * np.diff(ext)
    return np.diff(flux) / dx**2


def _linear_faces(grid, consts, opacity, bc):
    sigma = opacity_at_centers(opacity, grid)
    if np.any(sigma <= 0):
        raise InvalidArgumentError("diffusion solvers need strictly positive opacity")
    return _close_faces(consts.ac / (consts.D_d * opacity_at_nodes(sigma)), bc)


def _nonlinear_faces(T, sigma, consts, bc):
    """Arithmetic node mean of a c T^3 / (D_d sigma); Dirichlet ends average with the ghost."""
    q = consts.ac * T**3 / (consts.D_d * sigma)
    faces = opacity_at_nodes(q)
    gl, gr = _ghosts(bc, 3)
    if gl is not None:
        faces[0] = 0.5 * (q[0] + consts.ac * gl / (consts.D_d * sigma[0]))
    if gr is not None:
        faces[-1] = 0.5 * (q[-1] + consts.ac * gr / (consts.D_d * sigma[-1]))
    return _close_faces(faces, bc)


def predict_U(state, dt, grid, consts, faces, bc):
    """Linear implicit update of U with the mobility 4T^3/(4aT^3 + C_v) frozen at time n."""
    T3 = state.T**3
    m = 4.0 * T3 / (4.0 * consts.a * T3 + consts.C_v)
    k = dt * m / grid.dx**2
    lower = -k * faces[:-1]
    upper = -k * faces[1:]
    diag = 1.0 - lower - upper
    rhs = state.U.copy()
    gl, gr = _ghosts(bc, 4)
    if gl is not None:
        rhs[0] -= lower[0] * gl
    if gr is not None:
        rhs[-1] -= upper[-1] * gr
    return thomas_solve(Tridiagonal(lower, diag, upper), rhs)


def _correct(state, dt, consts, F, opts):
    alpha = np.full_like(F, consts.a / dt)
    beta = np.full_like(F, consts.C_v / dt)
    gamma = consts.a * state.T**4 / dt + consts.C_v * state.T / dt + F
    res = newton_quartic(alpha, beta, gamma, state.T, tol=opts.newton_tol, max_iter=opts.newton_max_iter)
    T = res.root
    resid = consts.a * (T**4 - state.T**4) / dt + consts.C_v * (T - state.T) / dt - F
    resid[res.clamped] = 0.0
    return T, res, resid


def _finish(T, dt, state, opts, res=None, resid=None, iters=0):
    new = DiffusionState(T, T**4, state.t + dt)
    diag = StepDiagnostics.for_state(
        T,
        (T, new.U),
        opts.blowup_bound,
        newton_iterations_max=int(np.max(res.iterations)) if res is not None else iters,
        energy_residual_max=float(np.max(np.abs(resid))) if resid is not None and resid.size else 0.0,
        clamped_cells=int(np.count_nonzero(res.clamped)) if res is not None else 0,
    )
    return new, diag


def diffusion3_step(state, dt, grid, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """Prediction (linear solve for U*), correction (per-cell quartic for T),
    projection U = T^4. Returns ``(state, diagnostics)``."""
    faces = _linear_faces(grid, consts, opacity, bc)
    U_star = predict_U(state, dt, grid, consts, faces, bc)
    gl, gr = _ghosts(bc, 4)
    F = flux_divergence(U_star, faces, grid.dx, gl, gr)
    T, res, resid = _correct(state, dt, consts, F, opts)
    return _finish(T, dt, state, opts, res, resid)


def diffusion3_nlopacity_step(state, dt, grid, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """Three-stage scheme for sigma_T = sigma / T^3.

    The prediction uses a c (T^n)^3 / (3 sigma) on the faces, the correction
    rebuilds it from T* = (U*)^(1/4).
    """
    if not is_temperature_dependent(opacity):
        raise InvalidArgumentError("diffusion3_nlopacity needs a TemperatureDependent opacity")
    sigma = opacity_at_centers(opacity, grid)
    if np.any(sigma <= 0):
        raise InvalidArgumentError("diffusion solvers need strictly positive opacity")
    U_star = predict_U(state, dt, grid, consts, _nonlinear_faces(state.T, sigma, consts, bc), bc)
    T_star = np.maximum(U_star, 0.0) ** 0.25
    faces = _nonlinear_faces(T_star, sigma, consts, bc)
    gl, gr = _ghosts(bc, 4)
    F = flux_divergence(U_star, faces, grid.dx, gl, gr)
    T, res, resid = _correct(state, dt, consts, F, opts)
    return _finish(T, dt, state, opts, res, resid)


def diffusion2stage_step(state, dt, grid, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """Prediction then T = U^(1/4); the mobility vanishes where T = 0 so the
    support never grows."""
    faces = _linear_faces(grid, consts, opacity, bc)
    U_star = predict_U(state, dt, grid, consts, faces, bc)
    T = np.maximum(U_star, 0.0) ** 0.25
    return _finish(T, dt, state, opts)


def implicit_system(state, dt, grid, power, coef, weight_T4, weight_T, faces, bc):
    """Residual and tridiagonal Jacobian of

        w4 (T^4 - Tn^4) + w1 (T - Tn) - dt coef div(faces grad T^power) = 0.

    ``faces`` must already be closed (zero on ZeroFlux ends).
    """
    Tn = state.T
    gl, gr = _ghosts(bc, power)
    k = dt * coef / grid.dx**2
    base = weight_T4 * Tn**4 + weight_T * Tn

    def residual(T):
        return weight_T4 * T**4 + weight_T * T - base - dt * coef * flux_divergence(T**power, faces, grid.dx, gl, gr)

    def jacobian(T):
        dP = power * T ** (power - 1)
        lower = np.zeros_like(T)
        upper = np.zeros_like(T)
        lower[1:] = -k * faces[1:-1] * dP[:-1]
        upper[:-1] = -k * faces[1:-1] * dP[1:]
        diag = 4.0 * weight_T4 * T**3 + weight_T + k * (faces[:-1] + faces[1:]) * dP
        return Tridiagonal(lower, diag, upper)

    return residual, jacobian, base


def _implicit_solve(state, dt, grid, power, coef, weight_T4, weight_T, faces, bc, opts):
    residual, jacobian, base = implicit_system(state, dt, grid, power, coef, weight_T4, weight_T, faces, bc)
    tol = opts.newton_tol * max(1.0, float(np.max(np.abs(base), initial=0.0)))
    T, iters = newton_tridiag_system(residual, jacobian, state.T, tol=tol, max_iter=opts.newton_max_iter,
                                     lower_bound=0.0)
    resid = residual(T) / dt
    return _finish(T, dt, state, opts, resid=resid, iters=iters)


def implicit_diffusion_step(state, dt, grid, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """Fully implicit reference: the whole nonlinear system solved by Newton."""
    faces = _linear_faces(grid, consts, opacity, bc) / consts.ac
    return _implicit_solve(state, dt, grid, 4, consts.ac, consts.a, consts.C_v, faces, bc, opts)


def implicit_diffusion_T7_step(state, dt, grid, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """Fully implicit reference for sigma_T = sigma / T^3, written for T^7:

        (T^4)_t + (C_v/a) T_t = (4c / (7 D_d)) d_x ((1/sigma) d_x T^7)

    with (1/sigma) on faces the mean of the adjacent cell values.
    """
    if not is_temperature_dependent(opacity):
        raise InvalidArgumentError("implicit_diffusion_T7 needs a TemperatureDependent opacity")
    sigma = opacity_at_centers(opacity, grid)
    if np.any(sigma <= 0):
        raise InvalidArgumentError("diffusion solvers need strictly positive opacity")
    faces = _close_faces(opacity_at_nodes(1.0 / sigma), bc)
    coef = 4.0 * consts.c / (7.0 * consts.D_d)
    return _implicit_solve(state, dt, grid, 7, coef, 1.0, consts.C_v / consts.a, faces, bc, opts)
