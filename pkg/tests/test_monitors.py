import math

import numpy as np
import pytest

from mcflab import model_spaces as ms
from mcflab import monitors as mon
from mcflab.errors import InapplicableError
from mcflab.flow_engine import FlowConfig, StopRules, run
from mcflab.initial_maps import build_initial_map, random_fourier_lift
from mcflab.pointwise_geometry import MapState, geometry_field, laplace_beltrami, ln_star_omega

T2 = ms.flat_torus()
S2 = ms.round_sphere()


def _record(state, **kw):
    s = mon.MonitorSeries(n=state.n, h_min=state.grid.min_spacing)
    mon.record(s, state, **kw)
    return s


def _flow(state, t_end, stride=10, **stop):
    rec = mon.Recorder(state.n, state.grid.min_spacing)
    fr = run(state, FlowConfig(t_end=t_end, output_stride=stride, stop_rules=StopRules(**stop)), rec)
    return fr, rec.series


def _series(values, **kw):
    n = len(values)
    base = dict(time=list(np.arange(n) * 0.1), min_omega=list(values), det_ratio_max=[1.0] * n,
                max_pair_product=[0.0] * n, min_s2_eig=[2.0] * n, max_A2=[0.0] * n,
                residual_linf=[math.nan] * n, sup_lambda=[0.0] * n, dt_max=0.1, h_min=0.1)
    base.update(kw)
    return mon.MonitorSeries(**base)


# ------------------------------------------------------------------ records


def test_constant_snapshot():
    st = build_initial_map("Constant", {}, T2, T2, ms.grid(T2, 16))
    s = _record(st)
    assert s.min_omega == [1.0] and s.max_pair_product == [0.0] and s.max_A2 == [0.0]
    assert math.isnan(s.residual_linf[0])


def test_boundary_of_theorem_one():
    st = build_initial_map("Linear", {"matrix": [[1, 0], [0, 1]]}, T2, T2, ms.grid(T2, 16))
    s = _record(st)
    assert s.det_ratio_max == [4.0] and s.min_omega == [0.5]


def test_cap_snapshot_matches_closed_form():
    g = ms.grid(S2, 128, equivariant=True)
    th = g.axes[0]
    s = _record(MapState(S2, S2, g, 0.5 * np.sin(th)))
    rho = 0.5 * np.sin(th)
    l1, l2 = 0.5 * np.cos(th), np.sin(rho) / np.sin(th)
    w = 1.0 / np.sqrt((1 + l1**2) * (1 + l2**2))
    assert s.min_omega[0] == pytest.approx(w.min(), abs=(math.pi / 128) ** 2)


def test_series_invariants_along_a_run():
    g = ms.grid(T2, 16)
    st = MapState(T2, T2, g, random_fourier_lift(g, 2, 3, 2, 0.8))
    _, s = _flow(st, 0.5)
    assert all(0 < w <= 1 for w in s.min_omega)
    assert min(s.max_pair_product) >= 0 and min(s.max_A2) >= 0
    assert s.dt_max > 0 and len(s.rows()) == len(s)


# ---------------------------------------------------------------- monotone


def test_monotone_stationary():
    st = build_initial_map("Constant", {}, T2, T2, ms.grid(T2, 16))
    _, s = _flow(st, 0.2)
    assert mon.check_monotone_min_omega(s).passed


def test_monotone_injected_decrease():
    s = _series([0.6, 0.7, 0.7, 0.65, 0.8, 0.5])
    f = mon.check_monotone_min_omega(s, tol=1e-12)
    assert not f.passed and f.first_failure_time == pytest.approx(0.3)


def test_monotone_convergent_sphere():
    g = ms.grid(S2, 32, equivariant=True)
    _, s = _flow(build_initial_map("Cap", {"a": 0.5}, S2, S2, g), 50.0, 200, sup_lambda_below=1e-3)
    assert mon.check_monotone_min_omega(s).passed
    assert s.min_omega[-1] > s.min_omega[0]
    # sup lambda_1 < 1e-3 forces *Omega above 1 - 2e-6 via the product formula
    assert s.sup_lambda[-1] < 1e-3 and s.min_omega[-1] > 1 - 2e-6


# -------------------------------------------------------- area decreasing


def test_area_decreasing_constant():
    st = build_initial_map("Constant", {}, T2, T2, ms.grid(T2, 16))
    assert mon.check_area_decreasing_preserved(_record(st)).passed


def _pair_scaled(target):
    g = ms.grid(T2, 16)
    base = random_fourier_lift(g, 2, 1, 2, [1.0, 0.1])
    lo, hi = 0.0, 4.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if geometry_field(MapState(T2, T2, g, mid * base)).max_pair.max() < target:
            lo = mid
        else:
            hi = mid
    return MapState(T2, T2, g, lo * base)


def test_area_decreasing_preserved_torus():
    _, s = _flow(_pair_scaled(0.5), 1.0, 50)
    assert s.max_pair_product[0] == pytest.approx(0.5, abs=1e-9)
    assert mon.check_area_decreasing_preserved(s).passed


def test_area_decreasing_out_of_regime():
    s = _series([0.3, 0.3], max_pair_product=[1.2, 1.1])
    f = mon.check_area_decreasing_preserved(s)
    assert not f.applicable and f.passed is None
    flags, _, _ = mon.evaluate_flags(s, 0.0, 0.0, min_omega_below=0.1)
    assert not flags["monotone_min_omega"]["applicable"]
    assert "graph_condition" not in flags


# ------------------------------------------------------------------- decay


def test_decay_constants():
    assert mon.decay_constant(2, 1.0, None, "a") == 0.25
    assert mon.decay_constant(2, 1.0, 0.5, "b") == 1.0 / 32


def test_decay_branch_selection():
    s = _series([0.9, 0.95], det_ratio_max=[3.5, 3.0])
    a = mon.check_decay(s, 1.0, 0.0)
    b = mon.check_decay(s, 1.0, 1.0)
    assert a.branch == "a" and a.c0 == 0.25
    assert b.branch == "b" and b.epsilon == 0.5 and b.c0 == 1.0 / 32
    with pytest.raises(InapplicableError):
        mon.check_decay(s, 0.0, 0.0)
    with pytest.raises(InapplicableError):
        mon.check_decay(_series([0.4], det_ratio_max=[5.0]), 1.0, 0.0)


def test_decay_trivial_for_constant_map():
    s = _series([1.0, 1.0, 1.0])
    d = mon.check_decay(s, 1.0, 0.0)
    assert not d.lower_envelope.any() and d.satisfied


def test_decay_envelope_monotone_and_failure():
    s = _series([0.7, 0.72, 0.6, 0.9], det_ratio_max=[2.0] * 4)
    d = mon.check_decay(s, 1.0, 0.0, tol=0.0)
    assert np.all(np.diff(d.lower_envelope) > 0)
    assert not d.satisfied and d.first_failure_time == pytest.approx(0.2)


# ---------------------------------------------------------------- residual


def test_residual_stationary():
    st = build_initial_map("Constant", {}, T2, T2, ms.grid(T2, 16))
    fr = run(st, FlowConfig(t_end=0.05, dt=0.01))
    assert mon.residual_evolution_equation(fr, 2) < 1e-10
    with pytest.raises(InapplicableError):
        mon.residual_evolution_equation(fr, 0)
    with pytest.raises(InapplicableError):
        mon.residual_evolution_equation(fr, len(fr.states) - 1)


def _wave(res):
    g = ms.grid(T2, res)
    return build_initial_map("LinearPlusWave", {"matrix": [[1, 0], [0, 1]], "amplitudes": [0.2, 0.1],
                                                "wavenumbers": [1, 1]}, T2, T2, g)


def _three_steps(res):
    fr = run(_wave(res), FlowConfig(t_end=1e9, output_stride=1, stop_rules=StopRules(max_steps=2)))
    return fr.states


def test_residual_refines_but_bare_laplacian_does_not():
    graph, bare = [], []
    for res in (32, 64):
        prev, cur, nxt = _three_steps(res)
        graph.append(mon.residual_linf(prev, cur, nxt))
        # same defect with the divergence-form Laplace-Beltrami of the graph metric
        gf = geometry_field(cur)
        u0, u1, u2 = ln_star_omega(prev), ln_star_omega(cur), ln_star_omega(nxt)
        ha, hb = cur.time - prev.time, nxt.time - cur.time
        dudt = (ha * ha * (u2 - u1) + hb * hb * (u1 - u0)) / (ha * hb * (ha + hb))
        bare.append(np.max(np.abs(dudt - laplace_beltrami(cur, u1) - gf.term_I - gf.term_II)))
    assert 3.2 <= graph[0] / graph[1] <= 4.8
    assert bare[1] > 10 * graph[1] and bare[0] / bare[1] < 2.0


def test_pole_band():
    g = ms.grid(S2, 64, equivariant=True)
    mask = mon.interior_mask(MapState(S2, S2, g, np.zeros(64)))
    th = g.axes[0]
    assert not mask[th < mon.POLE_MARGIN].any() and mask[(th > 0.2) & (th < 2.9)].all()
    assert mon.interior_mask(_wave(16)).all()


# -------------------------------------------------------------- flag bundle


def test_evaluate_flags_round_trip():
    g = ms.grid(S2, 32, equivariant=True)
    _, s = _flow(build_initial_map("Cap", {"a": 0.5}, S2, S2, g), 1.0, 100, min_omega_below=0.5)
    flags, tol, decay = mon.evaluate_flags(s, 1.0, 1.0, min_omega_below=0.5)
    assert all(f["passed"] for f in flags.values())
    assert decay["branch"] == "b" and tol["monotone"] == mon.default_tolerance(s)
    again, _, _ = mon.evaluate_flags(s, 1.0, 1.0, monotone_tol=tol["monotone"], area_tol=tol["area"],
                                     decay_tol=tol["decay"], min_omega_below=0.5)
    assert again == flags
