"""Shared domain types: constants, grid, velocity quadrature, opacities,
boundary data, initial conditions and solver states.

Layout conventions (staggered grid):

* cell centers ``x_{j+1/2}``, j = 0..nx-1, carry E, T, U and sigma;
* nodes ``x_i``, i = 0..nx, carry the odd parity O;
* velocity index k runs over the quadrature nodes v_k in (0, 1).

Arrays are (space, velocity), C-contiguous.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from radtrans.errors import InvalidArgumentError


@dataclass(frozen=True)
class PhysicalConstants:
    """Radiation constant ``a``, light speed ``c``, heat capacity ``C_v``,
    scaled mean free path ``epsilon`` and the diffusion denominator ``D_d``."""

    a: float = 1.0
    c: float = 1.0
    C_v: float = 1.0
    epsilon: float = 1.0
    D_d: float = 3.0

    def __post_init__(self):
        for name in ("a", "c", "C_v", "epsilon", "D_d"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be positive, got {v!r}")

    @property
    def ac(self):
        return self.a * self.c


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    nx: int

    def __post_init__(self):
        if int(self.nx) != self.nx or self.nx < 2:
            raise InvalidArgumentError(f"nx must be an integer >= 2, got {self.nx!r}")
        if not self.x_max > self.x_min:
            raise InvalidArgumentError("x_max must exceed x_min")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.nx

    @property
    def nodes(self):
        return self.x_min + self.dx * np.arange(self.nx + 1)

    @property
    def centers(self):
        return self.x_min + self.dx * (np.arange(self.nx) + 0.5)

    @property
    def length(self):
        return self.x_max - self.x_min


@dataclass(frozen=True)
class AngularQuadrature:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def nv(self):
        return self.nodes.shape[0]

    def average(self, f):
        """Bracket average of an even integrand sampled on the nodes (last axis)."""
        return f @ self.weights


def build_quadrature(nv):
    """Midpoint rule on (0, 1): v_k = (k - 1/2)/nv, w_k = 1/nv."""
    if int(nv) != nv or nv < 1:
        raise InvalidArgumentError(f"nv must be a positive integer, got {nv!r}")
    nv = int(nv)
    v = (np.arange(nv) + 0.5) / nv
    w = np.full(nv, 1.0 / nv)
    return AngularQuadrature(v, w)


# --------------------------------------------------------------------------
# opacity


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def at(self, x):
        return np.full(np.shape(x), float(self.value))


@dataclass(frozen=True)
class Striped:
    """sigma0 on [0.2, 0.35] and [0.65, 0.8], ``background`` elsewhere."""

    sigma0: float = 0.2
    background: float = 1.0
    stripes: tuple = ((0.2, 0.35), (0.65, 0.8))

    def at(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, float(self.background))
        for lo, hi in self.stripes:
            out[(x >= lo) & (x <= hi)] = self.sigma0
        return out


@dataclass(frozen=True)
class VanishingPoly:
    """10 (x - 1)^4 + 1e-3 with the defaults."""

    scale: float = 10.0
    x_ref: float = 1.0
    power: float = 4.0
    floor: float = 1e-3

    def at(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * np.abs(x - self.x_ref) ** self.power + self.floor


@dataclass(frozen=True)
class TabulatedByCell:
    values: tuple

    def at(self, x):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != np.shape(x):
            raise InvalidArgumentError(f"tabulated opacity has {vals.size} values, grid has {np.size(x)} cells")
        return vals.copy()


@dataclass(frozen=True)
class TemperatureDependent:
    """sigma_T(x, T) = base(x) / T^3.

    Only ``base`` is ever evaluated; the schemes carry K = T^3 as a
    multiplier on the other side of the equations.
    """

    base: object = field(default_factory=Constant)

    def at(self, x):
        return self.base.at(x)


def is_temperature_dependent(model):
    return isinstance(model, TemperatureDependent)


def opacity_at_centers(model, grid, T=None):
    """sigma at cell centers (the T-independent factor for TemperatureDependent)."""
    sigma = np.asarray(model.at(grid.centers), dtype=float)
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        raise InvalidArgumentError("opacity must be finite and nonnegative")
    return sigma


def opacity_at_nodes(center_values):
    """Arithmetic mean of the two adjacent centers; end nodes copy their cell."""
    c = np.asarray(center_values, dtype=float)
    if c.shape[0] < 1:
        raise InvalidArgumentError("need at least one cell value")
    out = np.empty((c.shape[0] + 1,) + c.shape[1:])
    out[1:-1] = 0.5 * (c[1:] + c[:-1])
    out[0] = c[0]
    out[-1] = c[-1]
    return out


# --------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class Dirichlet:
    T: float


@dataclass(frozen=True)
class ZeroFlux:
    pass


@dataclass(frozen=True)
class BoundaryCondition:
    """Incoming intensities sampled on the velocity nodes, plus the
    per-end closure used by the diffusion-limit solvers."""

    left_intensity: np.ndarray
    right_intensity: np.ndarray
    left_diffusion: object = field(default_factory=ZeroFlux)
    right_diffusion: object = field(default_factory=ZeroFlux)

    def __post_init__(self):
        for name in ("left_intensity", "right_intensity"):
            b = np.asarray(getattr(self, name), dtype=float)
            if b.ndim != 1 or np.any(b < 0) or not np.all(np.isfinite(b)):
                raise InvalidArgumentError(f"{name} must be a finite nonnegative 1D array")
            object.__setattr__(self, name, b)
        for name in ("left_diffusion", "right_diffusion"):
            d = getattr(self, name)
            if isinstance(d, Dirichlet) and not d.T >= 0:
                raise InvalidArgumentError(f"{name} temperature must be nonnegative")

    @classmethod
    def isotropic(cls, left, right, nv, left_diffusion=None, right_diffusion=None):
        return cls(
            np.full(nv, float(left)),
            np.full(nv, float(right)),
            left_diffusion if left_diffusion is not None else ZeroFlux(),
            right_diffusion if right_diffusion is not None else ZeroFlux(),
        )

    @classmethod
    def from_temperatures(cls, T_left, T_right, nv, consts):
        """Planckian inflow a c T^4 on both ends and matching Dirichlet data."""
        return cls(
            np.full(nv, consts.ac * T_left**4),
            np.full(nv, consts.ac * T_right**4),
            Dirichlet(T_left),
            Dirichlet(T_right),
        )

    def mirrored(self):
        return BoundaryCondition(self.right_intensity, self.left_intensity, self.right_diffusion, self.left_diffusion)

    def max_temperature(self, consts):
        """Largest temperature implied by the inflow or the Dirichlet data."""
        t = max(float(np.max(self.left_intensity, initial=0.0)), float(np.max(self.right_intensity, initial=0.0)))
        t = (t / consts.ac) ** 0.25
        for d in (self.left_diffusion, self.right_diffusion):
            if isinstance(d, Dirichlet):
                t = max(t, d.T)
        return t


# --------------------------------------------------------------------------
# initial conditions


@dataclass(frozen=True)
class CompactParabola:
    """T = max(1 - 40 (x - 1/2)^2, 0)."""

    center: float = 0.5
    curvature: float = 40.0

    def temperature(self, x, consts):
        return np.maximum(1.0 - self.curvature * (x - self.center) ** 2, 0.0)


@dataclass(frozen=True)
class SineQuarterPower:
    """T = max(sin(2 pi (x - 1/4)), 0)^(1/4)."""

    def temperature(self, x, consts):
        return np.maximum(np.sin(2.0 * np.pi * (x - 0.25)), 0.0) ** 0.25


@dataclass(frozen=True)
class FlatIntensity:
    """Isotropic I = value; T = (value / a c)^(1/4) unless given."""

    value: float = 1e-16
    T: float = None

    def temperature(self, x, consts):
        t = (self.value / consts.ac) ** 0.25 if self.T is None else self.T
        return np.full(np.shape(x), float(t))

    def intensity(self, x, consts):
        return np.full(np.shape(x), float(self.value))


@dataclass(frozen=True)
class TanhTemperature:
    """T = T_hot (1 - tanh((x - x0) k)) / 2."""

    x0: float = 0.0024
    k: float = 1000.0
    T_hot: float = 1.0

    def temperature(self, x, consts):
        return 0.5 * self.T_hot * (1.0 - np.tanh((x - self.x0) * self.k))


@dataclass(frozen=True)
class Uniform:
    T: float = 1.0

    def temperature(self, x, consts):
        return np.full(np.shape(x), float(self.T))


@dataclass(frozen=True)
class Custom:
    """Explicit cell temperatures; isotropic Planckian intensity."""

    T: tuple

    def temperature(self, x, consts):
        T = np.asarray(self.T, dtype=float)
        if T.shape != np.shape(x):
            raise InvalidArgumentError(f"custom temperature has {T.size} values, grid has {np.size(x)} cells")
        return T.copy()


def initial_temperature(ic, grid, consts):
    T = np.asarray(ic.temperature(grid.centers, consts), dtype=float)
    if np.any(T < 0) or not np.all(np.isfinite(T)):
        raise InvalidArgumentError("initial temperature must be finite and nonnegative")
    return T


# --------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class TransportState:
    E: np.ndarray  # (nx, nv) even parity at centers
    O: np.ndarray  # (nx + 1, nv) odd parity at nodes
    T: np.ndarray  # (nx,)
    U: np.ndarray  # (nx,)
    t: float = 0.0

    def rho(self, quad):
        return self.E @ quad.weights

    def intensity(self, eps):
        """(I(+v), I(-v)) at cell centers, O averaged from the two nodes."""
        Oc = 0.5 * (self.O[1:] + self.O[:-1])
        return self.E + eps * Oc, self.E - eps * Oc

    def replace(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class DiffusionState:
    T: np.ndarray
    U: np.ndarray
    t: float = 0.0

    def replace(self, **kw):
        return replace(self, **kw)


@dataclass
class StepDiagnostics:
    newton_iterations_max: int = 0
    energy_residual_max: float = 0.0
    min_T: float = 0.0
    max_T: float = 0.0
    stable_flag: bool = True
    clamped_cells: int = 0

    @classmethod
    def for_state(cls, T, fields, blowup_bound=np.inf, **kw):
        finite = all(np.all(np.isfinite(f)) for f in fields)
        max_T = float(np.max(T)) if finite else float("nan")
        min_T = float(np.min(T)) if finite else float("nan")
        return cls(min_T=min_T, max_T=max_T, stable_flag=bool(finite and max_T <= blowup_bound), **kw)


def state_from_intensity(I_plus, I_minus, T, eps):
    """Parity split of cell-centered intensities; O is interpolated to interior
    nodes and extrapolated to the two end nodes."""
    I_plus = np.asarray(I_plus, dtype=float)
    I_minus = np.asarray(I_minus, dtype=float)
    E = 0.5 * (I_plus + I_minus)
    Oc = (I_plus - I_minus) / (2.0 * eps)
    O = np.empty((Oc.shape[0] + 1, Oc.shape[1]))
    O[1:-1] = 0.5 * (Oc[1:] + Oc[:-1])
    O[0] = Oc[0]
    O[-1] = Oc[-1]
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise InvalidArgumentError("negative temperature")
    return TransportState(E, O, T, T**4)


def init_transport_state(ic, grid, quad, consts):
    T = initial_temperature(ic, grid, consts)
    if hasattr(ic, "intensity"):
        E = np.repeat(ic.intensity(grid.centers, consts)[:, None], quad.nv, axis=1)
    else:
        E = np.repeat((consts.ac * T**4)[:, None], quad.nv, axis=1)
    O = np.zeros((grid.nx + 1, quad.nv))
    return TransportState(E, O, T, T**4, 0.0)


def init_diffusion_state(ic, grid, consts):
    T = initial_temperature(ic, grid, consts)
    return DiffusionState(T, T**4, 0.0)


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and guards shared by the step functions."""

    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    linear_tol: float = 1e-10
    fixedpoint_tol: float = 1e-10
    fixedpoint_max_iter: int = 200
    sigma_floor: float = 1e-14
    blowup_bound: float = np.inf
    K_floor: float = 1e-12
    # raise K = T^3 in a boundary cell to at least the cube of the inflow
    # temperature before the T^-3 prediction (False keeps K = (T^n)^3)
    inflow_mobility: bool = True


DEFAULT_OPTIONS = SolverOptions()
