"""Time-integration driver, parameter sweeps and file output."""

import csv
import io
import json
import os
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

import radtrans
from radtrans import core, diffusion, reference, transport
from radtrans.config import DIFFUSION_SOLVERS, parse_config
from radtrans.errors import InvalidArgumentError, RadtransError, SolverError

__all__ = [
    "RunResult",
    "ConvergenceReport",
    "StabilityReport",
    "STABILITY_CRITERION",
    "run_simulation",
    "restrict",
    "restrict_to",
    "fit_order",
    "convergence_study",
    "stability_sweep",
    "compare_runs",
    "write_outputs",
    "load_fields",
    "version_string",
]

STABILITY_CRITERION = (
    "unstable if any field is non-finite, a solver error occurs, or max T exceeds "
    "blowup x max(initial T, boundary T)"
)


@dataclass
class Snapshot:
    t: float
    T: np.ndarray
    U: np.ndarray
    rho: np.ndarray


@dataclass
class RunResult:
    x: np.ndarray
    T: np.ndarray
    U: np.ndarray
    rho: np.ndarray
    t: float
    diagnostics: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    wall_time: float = 0.0
    config: object = None
    stable: bool = True
    failure: str = None

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    def field(self, name):
        if name not in ("T", "U", "rho"):
            raise InvalidArgumentError(f"unknown field {name!r}; use T, U or rho")
        return getattr(self, name)


# --------------------------------------------------------------------------
# solver dispatch


def _stepper(cfg):
    """Returns (init_state, step, observe) closures for the configured solver."""
    grid, consts, op, bc = cfg.grid, cfg.constants, cfg.opacity, cfg.bc
    td = core.is_temperature_dependent(op)
    name = cfg.solver
    if name == "ap" and td:
        name = "ap_nlopacity"
    if name == "diffusion3" and td:
        name = "diffusion3_nlopacity"

    if name in DIFFUSION_SOLVERS:
        fn = {
            "diffusion3": diffusion.diffusion3_step,
            "diffusion3_nlopacity": diffusion.diffusion3_nlopacity_step,
            "diffusion2stage": diffusion.diffusion2stage_step,
            "implicit_diffusion": diffusion.implicit_diffusion_step,
            "implicit_diffusion_T7": diffusion.implicit_diffusion_T7_step,
        }[name]

        def init():
            return core.init_diffusion_state(cfg.ic, grid, consts)

        def step(st, dt, opts):
            return fn(st, dt, grid, consts, op, bc, opts)

        def observe(st):
            return st.T, st.U, consts.ac * st.U

        return init, step, observe

    quad = core.build_quadrature(cfg.nv)

    if name == "explicit_transport":
        def init():
            return reference.init_angular_state(cfg.ic, grid, quad, consts)

        def step(st, dt, opts):
            new = reference.explicit_transport_step(st, dt, grid, quad, consts, op, bc, opts)
            diag = core.StepDiagnostics.for_state(new.T, (new.I_plus, new.I_minus, new.T), opts.blowup_bound)
            return new, diag

        def observe(st):
            return st.T, st.U, st.rho(quad)

        return init, step, observe

    def init():
        return core.init_transport_state(cfg.ic, grid, quad, consts)

    if name == "iterative_implicit":
        def step(st, dt, opts):
            new, incs = reference.iterative_implicit_step(
                st, dt, grid, quad, consts, op, bc, opts.fixedpoint_tol, opts.fixedpoint_max_iter, return_info=True
            )
            diag = core.StepDiagnostics.for_state(new.T, (new.E, new.O, new.T), opts.blowup_bound,
                                                  newton_iterations_max=len(incs))
            return new, diag
    else:
        fn = transport.ap_step_nlopacity if name == "ap_nlopacity" else transport.ap_step

        def step(st, dt, opts):
            return fn(st, dt, grid, quad, consts, op, bc, opts)

    def observe(st):
        return st.T, st.U, st.rho(quad)

    return init, step, observe


def _blowup_bound(cfg, T0):
    ref = max(float(np.max(T0)), cfg.bc.max_temperature(cfg.constants))
    return cfg.blowup_factor * ref if ref > 0 else np.inf


def run_simulation(config, snapshots=None, stop_on_unstable=False):
    """Integrate from t=0 to tmax with dt = cfl*dx (or the fixed dt).

    The last step, and any step crossing a snapshot time, is shortened to
    land on it exactly. Solver failures raise ``SolverError`` unless
    ``stop_on_unstable`` is set, in which case the run ends early and the
    result is marked unstable.
    """
    cfg = config if not isinstance(config, (str, dict, os.PathLike)) else parse_config(config)
    stops = sorted(set(cfg.snapshots if snapshots is None else snapshots))
    init, step, observe = _stepper(cfg)
    t_start = time.perf_counter()
    st = init()
    T0 = observe(st)[0]
    opts = replace(cfg.options, blowup_bound=_blowup_bound(cfg, T0))
    dt, tmax = cfg.dt, cfg.tmax
    diags, snaps = [], []
    t, n = 0.0, 0
    stable, failure = True, None
    targets = [s for s in stops if s < tmax] + [tmax]
    # a step shorter than this fraction of dt is merged into its predecessor
    tiny = 1e-9 * dt
    for target in targets:
        while target - t > tiny:
            h = dt if target - t > dt + tiny else target - t
            try:
                st, d = step(st, h, opts)
            except RadtransError as exc:
                if not stop_on_unstable:
                    raise SolverError(n + 1, t + h, exc) from exc
                stable, failure = False, f"step {n + 1}: {exc}"
                break
            n += 1
            t = target if abs(target - (t + h)) <= tiny else t + h
            diags.append((n, t, d))
            if not d.stable_flag:
                stable, failure = False, f"step {n}: unstable state (max T {d.max_T})"
                if stop_on_unstable:
                    break
        if failure is not None and stop_on_unstable:
            break
        if target in stops:
            T, U, rho = observe(st)
            snaps.append(Snapshot(target, T.copy(), U.copy(), rho.copy()))
    T, U, rho = observe(st)
    return RunResult(
        x=cfg.grid.centers, T=T, U=U, rho=rho, t=t, diagnostics=diags, snapshots=snaps,
        wall_time=time.perf_counter() - t_start, config=cfg, stable=stable, failure=failure,
    )


# --------------------------------------------------------------------------
# nested-grid comparison


def restrict(f):
    """Average each pair of fine cells onto the coarse cell they tile."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] % 2:
        raise InvalidArgumentError("restriction needs an even number of cells")
    return 0.5 * (f[0::2] + f[1::2])


def restrict_to(f, n_coarse):
    f = np.asarray(f, dtype=float)
    while f.shape[0] > n_coarse:
        f = restrict(f)
    if f.shape[0] != n_coarse:
        raise InvalidArgumentError(f"grids of {len(f)} and {n_coarse} cells are not nested by powers of 2")
    return f


def _domain(x):
    dx = x[1] - x[0]
    return x[0] - dx / 2, x[-1] + dx / 2


def compare_runs(a, b, field="T", norm="l1"):
    """dx-weighted l1 (or max) distance between two results on equal or nested grids."""
    if norm not in ("l1", "linf"):
        raise InvalidArgumentError(f"unknown norm {norm!r}; use l1 or linf")
    lo_a, hi_a = _domain(a.x)
    lo_b, hi_b = _domain(b.x)
    L = max(hi_a - lo_a, hi_b - lo_b)
    if abs(lo_a - lo_b) > 1e-9 * L or abs(hi_a - hi_b) > 1e-9 * L:
        raise InvalidArgumentError("results live on different domains")
    fa, fb = a.field(field), b.field(field)
    n = min(len(fa), len(fb))
    fa, fb = restrict_to(fa, n), restrict_to(fb, n)
    d = np.abs(fa - fb)
    if norm == "linf":
        return float(np.max(d))
    return float(np.sum(d) * (hi_a - lo_a) / n)


# --------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceReport:
    """rows[eps] = [(dx, err_rho, err_T), ...]; orders[eps] = (p_rho, p_T)."""

    rows: dict
    orders: dict
    tmax: float


def fit_order(dx, err):
    """Least-squares slope of log(err) against log(dx).

    The coarsest point is dropped when its error ratio deviates from the
    median ratio by more than 50%.
    """
    dx = np.asarray(dx, dtype=float)
    err = np.asarray(err, dtype=float)
    order = np.argsort(dx)[::-1]
    dx, err = dx[order], err[order]
    if len(dx) >= 3 and np.all(err > 0):
        ratios = err[:-1] / err[1:]
        med = np.median(ratios)
        if abs(ratios[0] - med) > 0.5 * med:
            dx, err = dx[1:], err[1:]
    if len(dx) < 2 or np.any(err <= 0):
        return float("nan")
    return float(np.polyfit(np.log(dx), np.log(err), 1)[0])


def _run_member(args):
    raw, = args
    res = run_simulation(parse_config(raw))
    return res.T, res.rho


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _nx_for(cfg, dx):
    nx = int(round(cfg.grid.length / dx))
    if abs(nx * dx - cfg.grid.length) > 1e-9 * cfg.grid.length:
        raise InvalidArgumentError(f"dx={dx} does not tile the domain")
    return nx


def convergence_study(base_config, dx_list, epsilons, workers=1):
    """Self-convergence: errors between consecutive grids (fine restricted onto coarse)."""
    cfg = base_config if not isinstance(base_config, (str, dict, os.PathLike)) else parse_config(base_config)
    dx_list = [float(d) for d in dx_list]
    if len(dx_list) < 2:
        raise InvalidArgumentError("need at least two grid spacings")
    for a, b in zip(dx_list, dx_list[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise InvalidArgumentError("each dx must halve the previous one")
    jobs = []
    for eps in epsilons:
        for dx in dx_list:
            raw = dict(cfg.raw, epsilon=float(eps), nx=_nx_for(cfg, dx))
            raw.pop("output", None)
            jobs.append((raw,))
    out = _map(_run_member, jobs, workers)
    rows, orders = {}, {}
    k = 0
    for eps in epsilons:
        sols = out[k:k + len(dx_list)]
        k += len(dx_list)
        r = []
        for i in range(len(dx_list) - 1):
            dx = dx_list[i]
            (Tc, rc), (Tf, rf) = sols[i], sols[i + 1]
            e_rho = float(np.sum(np.abs(rc - restrict(rf))) * dx)
            e_T = float(np.sum(np.abs(Tc - restrict(Tf))) * dx)
            r.append((dx, e_rho, e_T))
        rows[eps] = r
        dxs = [row[0] for row in r]
        orders[eps] = (fit_order(dxs, [row[1] for row in r]), fit_order(dxs, [row[2] for row in r]))
    return ConvergenceReport(rows, orders, cfg.tmax)


# --------------------------------------------------------------------------
# stability


@dataclass
class StabilityReport:
    """table[(eps, dx)] = largest stable C, or None when the smallest candidate fails."""

    table: dict
    candidates: tuple
    criterion: str = STABILITY_CRITERION
    runs: dict = field(default_factory=dict)


def _stable_run(args):
    raw, = args
    res = run_simulation(parse_config(raw), stop_on_unstable=True)
    return res.stable


def stability_sweep(base_config, epsilons, dx_list, C_candidates, workers=1):
    """Largest stable C = dt/dx per (eps, dx), found by bisection over the sorted candidates.

    Stability is assumed monotone in C. Every run goes to the configured tmax.
    """
    cfg = base_config if not isinstance(base_config, (str, dict, os.PathLike)) else parse_config(base_config)
    cands = tuple(float(c) for c in C_candidates)
    if list(cands) != sorted(cands) or not cands:
        raise InvalidArgumentError("C candidates must be nonempty and sorted ascending")
    cells = [(float(e), float(dx)) for e in epsilons for dx in dx_list]
    results = _map(_bisect_cell, [(cfg.raw, e, dx, cands) for e, dx in cells], workers)
    table, runs = {}, {}
    for (e, dx), (best, tried) in zip(cells, results):
        table[(e, dx)] = best
        runs[(e, dx)] = tried
    return StabilityReport(table, cands, STABILITY_CRITERION, runs)


def _bisect(probe, cands):
    tried = {}
    lo, hi = -1, len(cands)  # cands[lo] stable, cands[hi] unstable
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok = probe(cands[mid])
        tried[cands[mid]] = ok
        if ok:
            lo = mid
        else:
            hi = mid
    return (cands[lo] if lo >= 0 else None), tried


def _bisect_cell(args):
    raw, e, dx, cands = args
    cfg = parse_config(raw)

    def probe(C):
        r = dict(raw, epsilon=e, nx=_nx_for(cfg, dx), cfl=C)
        r.pop("dt", None)
        r.pop("output", None)
        return _stable_run((r,))

    return _bisect(probe, cands)


# --------------------------------------------------------------------------
# output


def version_string():
    """``git describe`` of the source tree when available, else the package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        )
        desc = out.stdout.strip()
        if desc:
            return f"v{radtrans.__version__}-g{desc}" if not desc.startswith("v") else desc
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{radtrans.__version__}"


def _fmt(v):
    return format(float(v), ".17g")


def _fields_csv(x, T, U, rho):
    buf = io.StringIO()
    buf.write("x,T,U,rho\n")
    for row in zip(x, T, U, rho):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _tag(t):
    return format(t, ".6g").replace("+", "")


def write_outputs(result, out_dir):
    """fields.csv, diagnostics.csv, meta.json and one fields_t<t>.csv per snapshot."""
    os.makedirs(out_dir, exist_ok=True)
    _write(os.path.join(out_dir, "fields.csv"), _fields_csv(result.x, result.T, result.U, result.rho))
    for s in result.snapshots:
        _write(os.path.join(out_dir, f"fields_t{_tag(s.t)}.csv"), _fields_csv(result.x, s.T, s.U, s.rho))
    buf = io.StringIO()
    buf.write("step,t,newton_max,energy_residual_max,minT,maxT,stable\n")
    for n, t, d in result.diagnostics:
        buf.write(",".join([str(n), _fmt(t), str(d.newton_iterations_max), _fmt(d.energy_residual_max),
                            _fmt(d.min_T), _fmt(d.max_T), "1" if d.stable_flag else "0"]) + "\n")
    _write(os.path.join(out_dir, "diagnostics.csv"), buf.getvalue())
    cfg = result.config
    meta = {
        "config": cfg.raw if cfg is not None else None,
        "version": version_string(),
        "wall_time_s": result.wall_time,
        "t_final": result.t,
        "steps": len(result.diagnostics),
        "stable": result.stable,
        "failure": result.failure,
        "stability_criterion": STABILITY_CRITERION,
        "blowup_factor": cfg.blowup_factor if cfg is not None else None,
        "backend": _backend(),
    }
    _write(os.path.join(out_dir, "meta.json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out_dir


def _backend():
    from radtrans import linalg
    return linalg.BACKEND


def load_fields(path):
    """Read fields.csv (or a directory holding one) back into a RunResult."""
    if os.path.isdir(path):
        path = os.path.join(path, "fields.csv")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", "T", "U", "rho"]:
        raise InvalidArgumentError(f"{path}: expected header x,T,U,rho")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    if data.shape[0] < 2:
        raise InvalidArgumentError(f"{path}: need at least two rows")
    return RunResult(x=data[:, 0], T=data[:, 1], U=data[:, 2], rho=data[:, 3], t=float("nan"))
