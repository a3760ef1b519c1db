"""JSON run configuration.

Minimal document::

    {"solver": "ap", "nx": 100, "nv": 16, "epsilon": 1e-5, "cfl": 0.1,
     "tmax": 0.1, "opacity": {"type": "constant", "value": 1},
     "ic": "compact_parabola"}

Optional keys: ``dt`` (overrides cfl * dx), ``domain`` [x_min, x_max],
``constants`` {a, c, cv, dd}, ``bc`` {left, right} or {temps: [TL, TR]},
``tolerances`` {newton, newton_max_iter, linear, fixedpoint,
fixedpoint_max_iter, sigma_floor, blowup}, ``output`` {snapshots},
``scheme`` {inflow_mobility} (boolean, default true; false keeps
K = T^3 in the boundary cells of the T^-3 prediction).

Boundary sides take one of
``{"type": "incoming", "intensity": b}`` (diffusion: Dirichlet (b/ac)^(1/4)),
``{"type": "temperature", "T": T}`` (transport: Planckian inflow a c T^4),
``{"type": "zero_flux"}`` (diffusion solvers only).
An optional ``"diffusion_T"`` entry overrides the Dirichlet value seen by
the diffusion solvers. Missing sides default to zero incoming intensity for
transport solvers and to zero flux for diffusion solvers.
"""

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from radtrans import core
from radtrans.errors import ConfigError

__all__ = ["SimulationConfig", "parse_config", "SOLVERS", "TRANSPORT_SOLVERS", "DIFFUSION_SOLVERS"]

TRANSPORT_SOLVERS = ("ap", "ap_nlopacity", "explicit_transport", "iterative_implicit")
DIFFUSION_SOLVERS = (
    "diffusion3",
    "diffusion3_nlopacity",
    "diffusion2stage",
    "implicit_diffusion",
    "implicit_diffusion_T7",
)
SOLVERS = TRANSPORT_SOLVERS + DIFFUSION_SOLVERS

_TOP_KEYS = {
    "solver", "nx", "nv", "epsilon", "cfl", "tmax", "dt", "domain",
    "constants", "opacity", "ic", "bc", "tolerances", "output", "scheme",
}
_REQUIRED = ("solver", "nx", "nv", "epsilon", "cfl", "tmax", "opacity", "ic")


@dataclass(frozen=True)
class SimulationConfig:
    solver: str
    nx: int
    nv: int
    epsilon: float
    cfl: float
    tmax: float
    opacity: object
    ic: object
    constants: core.PhysicalConstants
    grid: core.Grid1D
    bc: core.BoundaryCondition
    options: core.SolverOptions = core.DEFAULT_OPTIONS
    dt_fixed: float = None
    blowup_factor: float = 1e3
    snapshots: tuple = ()
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def dt(self):
        return self.dt_fixed if self.dt_fixed is not None else self.cfl * self.grid.dx

    def with_changes(self, **changes):
        """Re-parse with top-level keys replaced (e.g. nx, epsilon, cfl)."""
        raw = json.loads(json.dumps(self.raw))
        for k, v in changes.items():
            if v is None:
                raw.pop(k, None)
            else:
                raw[k] = v
        return parse_config(raw)


# --------------------------------------------------------------------------
# value helpers


def _num(d, key, where, default=None, positive=False, nonneg=False, integer=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}{key}", "missing required key")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}{key}", f"expected a number, got {type(v).__name__}")
    if integer:
        if int(v) != v:
            raise ConfigError(f"{where}{key}", "expected an integer")
        v = int(v)
    else:
        v = float(v)
    if not np.isfinite(v):
        raise ConfigError(f"{where}{key}", "must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{where}{key}", "must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{where}{key}", "must be nonnegative")
    return v


def _obj(d, key, where):
    v = d[key]
    if not isinstance(v, dict):
        raise ConfigError(f"{where}{key}", f"expected an object, got {type(v).__name__}")
    return v


def _check_keys(d, allowed, where):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{where}{k}", "unknown key")


# --------------------------------------------------------------------------
# sections


def _constants(d):
    if "constants" not in d:
        return core.PhysicalConstants(epsilon=_num(d, "epsilon", "", positive=True))
    c = _obj(d, "constants", "")
    _check_keys(c, {"a", "c", "cv", "dd"}, "constants.")
    return core.PhysicalConstants(
        a=_num(c, "a", "constants.", 1.0, positive=True),
        c=_num(c, "c", "constants.", 1.0, positive=True),
        C_v=_num(c, "cv", "constants.", 1.0, positive=True),
        epsilon=_num(d, "epsilon", "", positive=True),
        D_d=_num(c, "dd", "constants.", 3.0, positive=True),
    )


def _opacity(spec, where, nx):
    if not isinstance(spec, dict):
        raise ConfigError(where.rstrip("."), "expected an object with a 'type'")
    if "type" not in spec:
        raise ConfigError(f"{where}type", "missing required key")
    t = spec["type"]
    if t == "constant":
        _check_keys(spec, {"type", "value"}, where)
        return core.Constant(_num(spec, "value", where, nonneg=True))
    if t == "striped":
        _check_keys(spec, {"type", "sigma0", "background"}, where)
        return core.Striped(_num(spec, "sigma0", where, 0.2, nonneg=True), _num(spec, "background", where, 1.0, nonneg=True))
    if t == "vanishing":
        _check_keys(spec, {"type"}, where)
        return core.VanishingPoly()
    if t == "tabulated":
        _check_keys(spec, {"type", "values"}, where)
        vals = spec.get("values")
        if not isinstance(vals, list) or len(vals) != nx:
            raise ConfigError(f"{where}values", f"expected a list of {nx} numbers")
        try:
            return core.TabulatedByCell(tuple(float(v) for v in vals))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}values", str(exc)) from None
    if t == "temperature_dependent":
        _check_keys(spec, {"type", "base"}, where)
        if "base" not in spec:
            raise ConfigError(f"{where}base", "missing required key")
        base = _opacity(spec["base"], f"{where}base.", nx)
        if core.is_temperature_dependent(base):
            raise ConfigError(f"{where}base", "base opacity must not depend on T")
        return core.TemperatureDependent(base)
    raise ConfigError(f"{where}type", f"unknown opacity type {t!r}")


_IC_NAMES = {
    "compact_parabola": core.CompactParabola,
    "sine_quarter": core.SineQuarterPower,
    "flat_intensity": core.FlatIntensity,
    "tanh": core.TanhTemperature,
    "uniform": core.Uniform,
    "custom": core.Custom,
}


def _ic(spec, nx):
    if isinstance(spec, str):
        spec = {"type": spec}
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("ic.type", "missing required key")
    t = spec["type"]
    if t not in _IC_NAMES:
        raise ConfigError("ic.type", f"unknown initial condition {t!r}")
    if t in ("compact_parabola", "sine_quarter"):
        _check_keys(spec, {"type"}, "ic.")
        return _IC_NAMES[t]()
    if t == "flat_intensity":
        _check_keys(spec, {"type", "value", "T"}, "ic.")
        T = _num(spec, "T", "ic.", nonneg=True) if "T" in spec else None
        return core.FlatIntensity(_num(spec, "value", "ic.", 1e-16, nonneg=True), T)
    if t == "tanh":
        _check_keys(spec, {"type", "x0", "k", "T_hot"}, "ic.")
        return core.TanhTemperature(
            _num(spec, "x0", "ic.", 0.0024), _num(spec, "k", "ic.", 1000.0), _num(spec, "T_hot", "ic.", 1.0, nonneg=True)
        )
    if t == "uniform":
        _check_keys(spec, {"type", "T"}, "ic.")
        return core.Uniform(_num(spec, "T", "ic.", nonneg=True))
    _check_keys(spec, {"type", "T"}, "ic.")
    vals = spec.get("T")
    if not isinstance(vals, list) or len(vals) != nx:
        raise ConfigError("ic.T", f"expected a list of {nx} temperatures")
    return core.Custom(tuple(float(v) for v in vals))


def _side(spec, where, consts, nv):
    """Returns (incoming intensity or None, diffusion closure)."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"{where}type", "missing required key")
    t = spec["type"]
    override = None
    if "diffusion_T" in spec:
        override = core.Dirichlet(_num(spec, "diffusion_T", where, nonneg=True))
    if t == "incoming":
        _check_keys(spec, {"type", "intensity", "diffusion_T"}, where)
        b = _num(spec, "intensity", where, nonneg=True)
        return b, override or core.Dirichlet((b / consts.ac) ** 0.25)
    if t == "temperature":
        _check_keys(spec, {"type", "T", "diffusion_T"}, where)
        T = _num(spec, "T", where, nonneg=True)
        return consts.ac * T**4, override or core.Dirichlet(T)
    if t == "zero_flux":
        _check_keys(spec, {"type"}, where)
        return None, core.ZeroFlux()
    raise ConfigError(f"{where}type", f"unknown boundary type {t!r}")


def _bc(d, consts, nv, solver):
    default = {"type": "zero_flux"} if solver in DIFFUSION_SOLVERS else {"type": "incoming", "intensity": 0.0}
    sides = {"left": default, "right": default}
    if "bc" in d:
        b = _obj(d, "bc", "")
        _check_keys(b, {"left", "right", "temps"}, "bc.")
        if "temps" in b:
            temps = b["temps"]
            if not isinstance(temps, list) or len(temps) != 2:
                raise ConfigError("bc.temps", "expected [T_left, T_right]")
            sides["left"] = {"type": "temperature", "T": temps[0]}
            sides["right"] = {"type": "temperature", "T": temps[1]}
        for s in ("left", "right"):
            if s in b:
                sides[s] = b[s]
    bl, dl = _side(sides["left"], "bc.left.", consts, nv)
    br, dr = _side(sides["right"], "bc.right.", consts, nv)
    if solver in TRANSPORT_SOLVERS:
        for name, val in (("left", bl), ("right", br)):
            if val is None:
                raise ConfigError(f"bc.{name}.type", "zero_flux is only available for diffusion solvers")
    return core.BoundaryCondition(
        np.full(nv, 0.0 if bl is None else bl), np.full(nv, 0.0 if br is None else br), dl, dr
    )


def _options(d):
    if "tolerances" not in d:
        return core.DEFAULT_OPTIONS, 1e3
    t = _obj(d, "tolerances", "")
    _check_keys(t, {"newton", "newton_max_iter", "linear", "fixedpoint", "fixedpoint_max_iter", "sigma_floor", "blowup"},
                "tolerances.")
    base = core.DEFAULT_OPTIONS
    opts = core.SolverOptions(
        newton_tol=_num(t, "newton", "tolerances.", base.newton_tol, positive=True),
        newton_max_iter=_num(t, "newton_max_iter", "tolerances.", base.newton_max_iter, positive=True, integer=True),
        linear_tol=_num(t, "linear", "tolerances.", base.linear_tol, positive=True),
        fixedpoint_tol=_num(t, "fixedpoint", "tolerances.", base.fixedpoint_tol, positive=True),
        fixedpoint_max_iter=_num(t, "fixedpoint_max_iter", "tolerances.", base.fixedpoint_max_iter, positive=True,
                                 integer=True),
        sigma_floor=_num(t, "sigma_floor", "tolerances.", base.sigma_floor, nonneg=True),
    )
    return opts, _num(t, "blowup", "tolerances.", 1e3, positive=True)


def _scheme(d, opts):
    if "scheme" not in d:
        return opts
    sc = _obj(d, "scheme", "")
    _check_keys(sc, {"inflow_mobility"}, "scheme.")
    v = sc.get("inflow_mobility", True)
    if not isinstance(v, bool):
        raise ConfigError("scheme.inflow_mobility", "expected true or false")
    return replace(opts, inflow_mobility=v)


def _snapshots(d, tmax):
    if "output" not in d:
        return ()
    o = _obj(d, "output", "")
    _check_keys(o, {"snapshots"}, "output.")
    s = o.get("snapshots", [])
    if not isinstance(s, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in s):
        raise ConfigError("output.snapshots", "expected a list of times")
    s = sorted(float(v) for v in s)
    if any(v <= 0 or v > tmax for v in s):
        raise ConfigError("output.snapshots", "snapshot times must lie in (0, tmax]")
    return tuple(s)


# --------------------------------------------------------------------------


def _load(source):
    if isinstance(source, dict):
        return source
    text = source
    if isinstance(source, (str, os.PathLike)) and not str(source).lstrip().startswith("{"):
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("<file>", str(exc)) from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", str(exc)) from None
    if not isinstance(d, dict):
        raise ConfigError("<json>", "top level must be an object")
    return d


def parse_config(source):
    """Validate a config given as a dict, JSON text or a path to a JSON file."""
    d = _load(source)
    _check_keys(d, _TOP_KEYS, "")
    for k in _REQUIRED:
        if k not in d:
            raise ConfigError(k, "missing required key")
    solver = d["solver"]
    if solver not in SOLVERS:
        raise ConfigError("solver", f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
    nx = _num(d, "nx", "", integer=True)
    nv = _num(d, "nv", "", integer=True)
    if nx < 2:
        raise ConfigError("nx", "need at least 2 cells")
    if nv < 1:
        raise ConfigError("nv", "need at least 1 velocity")
    tmax = _num(d, "tmax", "", positive=True)
    cfl = _num(d, "cfl", "", positive=True)
    dt = _num(d, "dt", "", positive=True) if "dt" in d else None
    domain = d.get("domain", [0.0, 1.0])
    if not isinstance(domain, list) or len(domain) != 2 or not all(isinstance(v, (int, float)) for v in domain):
        raise ConfigError("domain", "expected [x_min, x_max]")
    if not domain[1] > domain[0]:
        raise ConfigError("domain", "x_max must exceed x_min")
    consts = _constants(d)
    grid = core.Grid1D(float(domain[0]), float(domain[1]), nx)
    opacity = _opacity(d["opacity"], "opacity.", nx)
    td = core.is_temperature_dependent(opacity)
    if solver in ("ap_nlopacity", "diffusion3_nlopacity", "implicit_diffusion_T7", "iterative_implicit") and not td:
        raise ConfigError("opacity.type", f"solver {solver!r} needs a temperature_dependent opacity")
    if solver in ("diffusion2stage", "implicit_diffusion") and td:
        raise ConfigError("opacity.type", f"solver {solver!r} needs a T-independent opacity")
    ic = _ic(d["ic"], nx)
    bc = _bc(d, consts, nv, solver)
    opts, blowup = _options(d)
    opts = _scheme(d, opts)
    snaps = _snapshots(d, tmax)
    return SimulationConfig(
        solver=solver, nx=nx, nv=nv, epsilon=consts.epsilon, cfl=cfl, tmax=tmax, opacity=opacity, ic=ic,
        constants=consts, grid=grid, bc=bc, options=opts, dt_fixed=dt, blowup_factor=blowup, snapshots=snaps,
        raw=json.loads(json.dumps(d)),
    )
