"""Reference solvers used to validate the AP scheme.

``explicit_transport_step`` is a first-order upwind discretization of the
kinetic equation in the plain intensity variables, integrated with explicit
Euler and internal sub-stepping. It shares no code with the parity solver.

``iterative_implicit_step`` is the lagged-opacity Picard iteration for
sigma / T^3: freeze K = T^3 from the current iterate, solve the linear
implicit system, repeat until U settles.
"""

from dataclasses import dataclass, replace

import numpy as np

from radtrans.core import (
    DEFAULT_OPTIONS,
    FlatIntensity,
    TransportState,
    initial_temperature,
    is_temperature_dependent,
    opacity_at_centers,
)
from radtrans.errors import InstabilityError, InvalidArgumentError, NonConvergenceError
from radtrans.transport import predict_nlopacity

__all__ = [
    "AngularIntensityState",
    "init_angular_state",
    "explicit_stable_dt",
    "explicit_transport_step",
    "iterative_implicit_step",
]


@dataclass(frozen=True)
class AngularIntensityState:
    """Cell-averaged intensities for +v_k (``I_plus``) and -v_k (``I_minus``), shape (nx, nv)."""

    I_plus: np.ndarray
    I_minus: np.ndarray
    T: np.ndarray
    t: float = 0.0

    def rho(self, quad):
        """Angular average of I over v in [-1, 1]."""
        return 0.5 * (self.I_plus + self.I_minus) @ quad.weights

    @property
    def U(self):
        return self.T**4


def init_angular_state(ic, grid, quad, consts):
    T = initial_temperature(ic, grid, consts)
    if isinstance(ic, FlatIntensity):
        I = ic.intensity(grid.centers, consts)
    else:
        I = consts.ac * T**4
    I = np.repeat(I[:, None], quad.nv, axis=1)
    return AngularIntensityState(I.copy(), I.copy(), T, 0.0)


def _sigma(opacity, grid, T, opts):
    sigma = opacity_at_centers(opacity, grid)
    if is_temperature_dependent(opacity):
        sigma = sigma / np.maximum(T**3, opts.K_floor)
    return sigma


def explicit_stable_dt(state, grid, quad, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """Largest sub-step keeping the explicit update positivity-preserving (with a 0.9 margin).

    Intensity: c v_max / (eps dx) + c sigma / eps^2 <= 1 / dt.
    Material:  4 a c sigma T^3 / (eps^2 C_v)     <= 1 / dt.
    """
    eps, c = consts.epsilon, consts.c
    sigma = _sigma(opacity, grid, state.T, opts)
    vmax = float(np.max(quad.nodes))
    T_hi = max(float(np.max(state.T)), bc.max_temperature(consts),
               (float(max(np.max(state.I_plus), np.max(state.I_minus))) / consts.ac) ** 0.25)
    smax = float(np.max(sigma))
    rate_I = c * vmax / (eps * grid.dx) + c * smax / eps**2
    rate_T = 4.0 * consts.ac * smax * T_hi**3 / (eps**2 * consts.C_v)
    return 0.9 / max(rate_I, rate_T)


def _substep(st, h, grid, quad, consts, opacity, bc, opts):
    eps, c = consts.epsilon, consts.c
    nu = (c * h / (eps * grid.dx)) * quad.nodes[None, :]
    sigma = _sigma(opacity, grid, st.T, opts)
    relax = (c * h * sigma / eps**2)[:, None]
    B = consts.ac * st.T**4
    Ip, Im = st.I_plus, st.I_minus
    up = np.vstack([bc.left_intensity[None, :], Ip[:-1]])
    um = np.vstack([Im[1:], bc.right_intensity[None, :]])
    Ip_new = Ip - nu * (Ip - up) + relax * (B[:, None] - Ip)
    Im_new = Im - nu * (Im - um) + relax * (B[:, None] - Im)
    rho = 0.5 * (Ip + Im) @ quad.weights
    T_new = st.T + h * sigma / (eps**2 * consts.C_v) * (rho - B)
    return AngularIntensityState(Ip_new, Im_new, T_new, st.t + h)


def explicit_transport_step(state, dt, grid, quad, consts, opacity, bc, opts=DEFAULT_OPTIONS):
    """Advance by ``dt`` with upwind transport and explicit sources.

    Sub-steps of equal length are taken when ``dt`` exceeds
    ``explicit_stable_dt``.
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    h_max = explicit_stable_dt(state, grid, quad, consts, opacity, bc, opts)
    n = max(1, int(np.ceil(dt / h_max - 1e-12)))
    h = dt / n
    st = state
    for _ in range(n):
        st = _substep(st, h, grid, quad, consts, opacity, bc, opts)
    if not (np.all(np.isfinite(st.I_plus)) and np.all(np.isfinite(st.I_minus)) and np.all(np.isfinite(st.T))):
        raise InstabilityError("explicit transport produced non-finite values")
    return replace(st, t=state.t + dt)


def iterative_implicit_step(state, dt, grid, quad, consts, opacity, bc, tol=1e-10, max_iter=200,
                            return_info=False):
    """Picard iteration on the implicit step with lagged K = (U^(k))^(3/4).

    Stops when max|U^(k+1) - U^(k)| <= tol * max(1, max|U^(k)|). With
    ``return_info`` also returns the list of increments.
    """
    if not is_temperature_dependent(opacity):
        raise InvalidArgumentError("iterative_implicit_step needs a TemperatureDependent opacity")
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    U = state.U.copy()
    increments = []
    for _ in range(max_iter):
        K = np.maximum(U, 0.0) ** 0.75
        pred = predict_nlopacity(state, dt, grid, quad, consts, opacity, bc, K=K)
        inc = float(np.max(np.abs(pred.U_star - U)))
        increments.append(inc)
        scale = max(1.0, float(np.max(np.abs(U))))
        U = pred.U_star
        if inc <= tol * scale:
            T = np.maximum(U, 0.0) ** 0.25
            new = TransportState(pred.E_star, pred.O_star, T, U, state.t + dt)
            return (new, increments) if return_info else new
    raise NonConvergenceError(increments[-1], f"Picard iteration stalled after {max_iter} iterations")
