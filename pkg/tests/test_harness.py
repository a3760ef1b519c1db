import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radtrans import harness
from radtrans.config import parse_config
from radtrans.errors import ConfigError, InvalidArgumentError, SolverError

MINIMAL = {
    "solver": "ap", "nx": 100, "nv": 16, "epsilon": 1e-5, "cfl": 0.1, "tmax": 0.1,
    "opacity": {"type": "constant", "value": 1}, "ic": "compact_parabola",
}


def cfg(**kw):
    return dict(MINIMAL, **kw)


# ----------------------------------------------------------------------------
# configuration


def test_minimal_config_defaults():
    c = parse_config(MINIMAL)
    k = c.constants
    assert (k.a, k.c, k.C_v, k.D_d) == (1.0, 1.0, 1.0, 3.0)
    assert k.epsilon == 1e-5
    assert c.options.newton_tol == 1e-12 and c.options.sigma_floor == 1e-14
    assert c.dt == pytest.approx(0.1 * 0.01)


def test_marshak_units_constants_honoured():
    c = parse_config(cfg(constants={"a": 0.01372, "c": 29.98, "cv": 0.3}, domain=[0, 0.02],
                         opacity={"type": "temperature_dependent", "base": {"type": "constant", "value": 300}},
                         ic={"type": "tanh"}, bc={"left": {"type": "temperature", "T": 1.0}}))
    assert (c.constants.a, c.constants.c, c.constants.C_v) == (0.01372, 29.98, 0.3)
    np.testing.assert_allclose(c.bc.left_intensity, 0.01372 * 29.98)


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="foo"):
        parse_config(cfg(foo=1))


@pytest.mark.parametrize("bad, key", [
    ({"nx": "ten"}, "nx"),
    ({"opacity": {"type": "constant"}}, "value"),
    ({"tolerances": {"newtn": 1e-9}}, "newtn"),
    ({"solver": "magic"}, "solver"),
    ({"bc": {"left": {"type": "zero_flux"}}}, "bc.left"),
    ({"output": {"snapshots": [0.5]}}, "snapshots"),
])
def test_bad_values_name_their_key(bad, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(cfg(**bad))


def test_scheme_switch():
    assert parse_config(MINIMAL).options.inflow_mobility
    assert not parse_config(cfg(scheme={"inflow_mobility": False})).options.inflow_mobility
    with pytest.raises(ConfigError, match="inflow_mobility"):
        parse_config(cfg(scheme={"inflow_mobility": "no"}))


def test_missing_key_is_named():
    d = dict(MINIMAL)
    del d["tmax"]
    with pytest.raises(ConfigError, match="tmax"):
        parse_config(d)


def test_config_from_text_and_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(MINIMAL))
    assert parse_config(str(p)).nx == parse_config(json.dumps(MINIMAL)).nx == 100


def test_solver_opacity_mismatch_rejected():
    with pytest.raises(ConfigError):
        parse_config(cfg(solver="ap_nlopacity"))
    with pytest.raises(ConfigError):
        parse_config(cfg(solver="implicit_diffusion",
                         opacity={"type": "temperature_dependent", "base": {"type": "constant", "value": 1}}))


# ----------------------------------------------------------------------------
# driver


EQUILIBRIUM = cfg(nx=20, nv=4, epsilon=1e-2, cfl=0.5, tmax=2.5, ic={"type": "uniform", "T": 0.7},
                  bc={"temps": [0.7, 0.7]})


@pytest.mark.parametrize("solver", ["ap", "diffusion3", "implicit_diffusion", "diffusion2stage"])
def test_equilibrium_run_is_stationary(solver):
    res = harness.run_simulation(dict(EQUILIBRIUM, solver=solver))
    assert len(res.diagnostics) == 100
    assert res.t == 2.5
    assert np.max(np.abs(res.T - 0.7)) <= 1e-12
    assert res.stable


def test_last_step_lands_on_tmax():
    res = harness.run_simulation(dict(EQUILIBRIUM, tmax=0.123))
    assert res.t == 0.123
    steps = np.diff([0.0] + [t for _, t, _ in res.diagnostics])
    assert steps[-1] <= 0.025 + 1e-15 and np.all(steps[:-1] == pytest.approx(0.025))


def test_snapshots_are_recorded_at_requested_times():
    res = harness.run_simulation(dict(EQUILIBRIUM, tmax=0.2), snapshots=[0.05, 0.1])
    assert [s.t for s in res.snapshots] == [0.05, 0.1]


def test_solver_failure_reports_step():
    bad = cfg(solver="iterative_implicit", nx=20, nv=4, epsilon=1.0, cfl=0.1, tmax=0.01,
              opacity={"type": "temperature_dependent", "base": {"type": "constant", "value": 1}},
              ic={"type": "flat_intensity", "value": 1e-16}, bc={"left": {"type": "temperature", "T": 1.0}},
              tolerances={"fixedpoint_max_iter": 1})
    with pytest.raises(SolverError, match=r"at step \d+ \(t="):
        harness.run_simulation(bad)
    res = harness.run_simulation(bad, stop_on_unstable=True)
    assert not res.stable and res.failure.startswith("step ")


def test_ap_matches_implicit_diffusion_in_thick_limit():
    base = cfg(tmax=0.1, opacity={"type": "striped", "sigma0": 1e-3})
    a = harness.run_simulation(base)
    b = harness.run_simulation(dict(base, solver="diffusion3", bc={"left": {"type": "incoming", "intensity": 0},
                                                                   "right": {"type": "incoming", "intensity": 0}}))
    assert harness.compare_runs(a, b, "T") <= 1e-2


# ----------------------------------------------------------------------------
# restriction, comparison and order fit


def test_restriction_exact_on_constants_and_lines():
    x = (np.arange(64) + 0.5) / 64
    np.testing.assert_array_equal(harness.restrict(np.full(64, 3.5)), np.full(32, 3.5))
    xc = (np.arange(32) + 0.5) / 32
    np.testing.assert_allclose(harness.restrict(2 * x - 1), 2 * xc - 1, atol=1e-15)
    np.testing.assert_allclose(harness.restrict_to(2 * x - 1, 8), 2 * ((np.arange(8) + 0.5) / 8) - 1, atol=1e-15)


def test_restriction_rejects_incompatible_sizes():
    with pytest.raises(InvalidArgumentError):
        harness.restrict(np.ones(5))
    with pytest.raises(InvalidArgumentError):
        harness.restrict_to(np.ones(12), 5)


def fake_result(nx, f):
    x = (np.arange(nx) + 0.5) / nx
    v = f(x)
    return harness.RunResult(x=x, T=v, U=v**4, rho=v**4, t=0.0)


def test_compare_identical_is_zero():
    a = fake_result(40, np.sin)
    assert harness.compare_runs(a, a) == 0.0
    assert harness.compare_runs(a, a, "rho", "linf") == 0.0


def test_compare_nested_constant_is_zero():
    a = fake_result(25, lambda x: np.full_like(x, 0.3))
    b = fake_result(100, lambda x: np.full_like(x, 0.3))
    assert harness.compare_runs(a, b) == 0.0
    assert harness.compare_runs(b, a, "U", "linf") == 0.0


def test_compare_known_distance():
    a = fake_result(10, lambda x: np.zeros_like(x))
    b = fake_result(20, lambda x: np.full_like(x, 0.5))
    assert harness.compare_runs(a, b) == pytest.approx(0.5)


def test_compare_rejects_mismatch():
    with pytest.raises(InvalidArgumentError):
        harness.compare_runs(fake_result(10, np.sin), fake_result(30, np.sin))
    shifted = fake_result(10, np.sin)
    shifted.x = shifted.x + 1.0
    with pytest.raises(InvalidArgumentError):
        harness.compare_runs(fake_result(10, np.sin), shifted)
    with pytest.raises(InvalidArgumentError):
        harness.compare_runs(fake_result(10, np.sin), fake_result(10, np.sin), norm="l2")
    with pytest.raises(InvalidArgumentError):
        harness.compare_runs(fake_result(10, np.sin), fake_result(10, np.sin), field="E")


@settings(max_examples=50)
@given(st.floats(1e-3, 1e3), st.floats(0.5, 3.0), st.integers(3, 6))
def test_fit_order_recovers_power_law(K, p, n):
    dx = 0.04 / 2.0 ** np.arange(n)
    assert abs(harness.fit_order(dx, K * dx**p) - p) <= 1e-9


def test_fit_order_synthetic_first_order():
    dx = [1 / 25, 1 / 50, 1 / 100, 1 / 200]
    assert abs(harness.fit_order(dx, [3 * d for d in dx]) - 1.0) <= 0.01


def test_fit_order_drops_polluted_coarse_point():
    dx = np.array([1 / 25, 1 / 50, 1 / 100, 1 / 200])
    err = dx.copy()
    err[0] *= 10
    assert abs(harness.fit_order(dx, err) - 1.0) <= 1e-12


def test_fit_order_degenerate():
    assert np.isnan(harness.fit_order([0.1], [0.1]))
    assert np.isnan(harness.fit_order([0.1, 0.05], [0.0, 0.0]))


def test_convergence_study_diffusion3_first_order():
    # smooth, positive data; with dt = dx / 2 the first-order time error dominates
    base = cfg(solver="diffusion3", ic={"type": "tanh", "x0": 0.5, "k": 10}, epsilon=1.0, cfl=0.5, nx=25)
    rep = harness.convergence_study(base, [1 / 25, 1 / 50, 1 / 100, 1 / 200, 1 / 400], [1.0])
    p_rho, p_T = rep.orders[1.0]
    assert 0.8 <= p_T <= 1.2 and 0.8 <= p_rho <= 1.2
    assert [r[0] for r in rep.rows[1.0]] == pytest.approx([1 / 25, 1 / 50, 1 / 100, 1 / 200])


def test_convergence_study_validates_dx():
    with pytest.raises(InvalidArgumentError):
        harness.convergence_study(MINIMAL, [0.1, 0.04], [1.0])
    with pytest.raises(InvalidArgumentError):
        harness.convergence_study(MINIMAL, [0.1], [1.0])


def test_parallel_sweep_matches_serial():
    base = cfg(solver="diffusion3", ic="sine_quarter", epsilon=1.0, tmax=0.02, nx=25)
    a = harness.convergence_study(base, [1 / 25, 1 / 50, 1 / 100], [1.0, 0.5])
    b = harness.convergence_study(base, [1 / 25, 1 / 50, 1 / 100], [1.0, 0.5], workers=2)
    assert a.rows == b.rows


def test_stability_sweep_table():
    base = cfg(nv=8, epsilon=1e-3, tmax=0.05)
    rep = harness.stability_sweep(base, [1e-3], [1 / 50], [0.1, 0.3, 0.5, 0.8, 1, 2])
    assert rep.table[(1e-3, 1 / 50)] >= 0.5
    assert rep.criterion == harness.STABILITY_CRITERION
    with pytest.raises(InvalidArgumentError):
        harness.stability_sweep(base, [1e-3], [1 / 50], [0.5, 0.1])


def test_bisection_finds_threshold():
    cands = (0.1, 0.3, 0.5, 0.8, 1.0, 2.0)
    best, tried = harness._bisect(lambda c: c <= 0.8, cands)
    assert best == 0.8 and len(tried) <= 3
    assert harness._bisect(lambda c: False, cands)[0] is None
    assert harness._bisect(lambda c: True, cands)[0] == 2.0


# ----------------------------------------------------------------------------
# output files


def test_write_outputs_formats(tmp_path):
    res = harness.run_simulation(dict(EQUILIBRIUM, tmax=0.1), snapshots=[0.05])
    out = harness.write_outputs(res, str(tmp_path / "run"))
    fields = open(os.path.join(out, "fields.csv"), newline="").read()
    lines = fields.split("\n")
    assert lines[0] == "x,T,U,rho" and lines[-1] == ""
    assert len(lines) == 20 + 2
    assert "\r" not in fields
    diag = open(os.path.join(out, "diagnostics.csv")).read().splitlines()
    assert diag[0] == "step,t,newton_max,energy_residual_max,minT,maxT,stable"
    assert len(diag) == 1 + len(res.diagnostics)
    assert os.path.exists(os.path.join(out, "fields_t0.05.csv"))
    meta = json.load(open(os.path.join(out, "meta.json")))
    assert meta["config"]["solver"] == "ap" and meta["version"].startswith("v")
    assert meta["stability_criterion"] == harness.STABILITY_CRITERION
    assert meta["wall_time_s"] >= 0


def test_fields_round_trip_at_full_precision(tmp_path):
    res = harness.run_simulation(cfg(nx=20, nv=4, tmax=0.01))
    harness.write_outputs(res, str(tmp_path))
    back = harness.load_fields(str(tmp_path))
    for name in ("T", "U", "rho"):
        np.testing.assert_array_equal(back.field(name), res.field(name))
    np.testing.assert_array_equal(back.x, res.x)


def test_rerun_is_byte_identical(tmp_path):
    c = cfg(nx=30, nv=4, tmax=0.02)
    for d in ("a", "b"):
        harness.write_outputs(harness.run_simulation(c), str(tmp_path / d))
    for name in ("fields.csv", "diagnostics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_load_fields_rejects_bad_header(tmp_path):
    p = tmp_path / "fields.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(InvalidArgumentError):
        harness.load_fields(str(p))
