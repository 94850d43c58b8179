import math

import numpy as np
import pytest

from mcflab import model_spaces as ms
from mcflab.errors import ConfigError, StepError
from mcflab.flow_engine import FlowConfig, Scheme, Status, StopRules, auto_dt, run, step
from mcflab.initial_maps import build_initial_map
from mcflab.pointwise_geometry import MapState

T2 = ms.flat_torus()
S2 = ms.round_sphere()


def _steps(state, n, **kw):
    return run(state, FlowConfig(t_end=1e9, output_stride=1, stop_rules=StopRules(max_steps=n), **kw))


def _wave(res, amp=0.1):
    g = ms.grid(T2, res)
    return build_initial_map("LinearPlusWave", {"matrix": [[1, 0], [0, 1]], "amplitudes": [amp, 0.0],
                                                "wavenumbers": [1, 0]}, T2, T2, g)


def _cap(J, a=0.5):
    g = ms.grid(S2, J, equivariant=True)
    return build_initial_map("Cap", {"a": a}, S2, S2, g)


# -------------------------------------------------------------- fixed points


def test_constant_map_fixed_each_step():
    st = build_initial_map("Constant", {"value": [1.0, 2.0]}, T2, T2, ms.grid(T2, 16))
    fr = _steps(st, 50)
    for s in fr.states:
        assert np.max(np.abs(s.lift - st.lift)) <= 1e-14


def test_linear_map_fixed():
    st = build_initial_map("Linear", {"matrix": [[2, 1], [-1, 1]]}, T2, T2, ms.grid(T2, 16))
    fr = _steps(st, 1000)
    assert fr.steps == 1000 and np.array_equal(fr.final.lift, st.lift)


def test_zero_profile_fixed():
    g = ms.grid(S2, 32, equivariant=True)
    st = MapState(S2, S2, g, np.zeros(32))
    assert not _steps(st, 1000).final.lift.any()


def test_identity_profile_fixed():
    g = ms.grid(S2, 32, equivariant=True)
    st = build_initial_map("Identity", {}, S2, S2, g)
    fr = _steps(st, 1000)
    assert np.max(np.abs(fr.final.lift - st.lift)) / fr.final.time <= (math.pi / 32) ** 2


def test_constant_run_reaches_t_end():
    st = build_initial_map("Constant", {}, T2, T2, ms.grid(T2, 16))
    fr = run(st, FlowConfig(t_end=1.0, dt=0.01, output_stride=10))
    assert fr.status == Status.REACHED_T_END
    assert fr.final.time == 1.0 and not fr.final.lift.any()
    assert len(fr.states) == 11
    assert fr.times == pytest.approx([0.1 * k for k in range(11)], abs=1e-12)


# ----------------------------------------------------------------- dynamics


def test_wave_perturbation_decays_monotonically():
    fr = run(_wave(16), FlowConfig(t_end=1.0, output_stride=20))
    amp = [np.max(np.abs(s.lift)) for s in fr.states]
    assert all(b < a for a, b in zip(amp, amp[1:]))


def test_cap_sup_rho_decreasing():
    fr = run(_cap(32), FlowConfig(t_end=1.0, output_stride=20))
    sup = [np.max(np.abs(s.lift)) for s in fr.states]
    assert all(b < a for a, b in zip(sup, sup[1:]))


def test_cap_converges():
    fr = run(_cap(32), FlowConfig(t_end=50.0, output_stride=10**6, stop_rules=StopRules(sup_lambda_below=1e-3)))
    assert fr.status == Status.CONVERGED and fr.final.time < 50


def _sine_fit(theta, rho, modes=24):
    # the profile is odd about both poles, so a sine series interpolates it spectrally
    A = np.sin(np.outer(theta, np.arange(1, modes + 1)))
    return np.linalg.lstsq(A, rho, rcond=None)[0]


def test_equivariant_order_of_accuracy():
    t_end = 0.2
    cfg = FlowConfig(t_end=t_end, output_stride=10**9)
    ref = run(_cap(256), cfg).final  # 8x the finer level
    c = _sine_fit(ref.grid.axes[0], ref.lift)
    errs = []
    for J in (16, 32):
        s = run(_cap(J), cfg).final
        th = s.grid.axes[0]
        errs.append(np.max(np.abs(s.lift - np.sin(np.outer(th, np.arange(1, c.size + 1))) @ c)))
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_torus_order_of_accuracy():
    # forward Euler at dt ~ h^2 makes the time error the leading O(h^2) term
    cfg = FlowConfig(t_end=0.2, output_stride=10**9)
    ref = run(_wave(128), cfg).final.lift  # 8x the coarser level
    errs = [np.max(np.abs(run(_wave(N), cfg).final.lift - ref[:, ::128 // N, ::128 // N])) for N in (16, 32)]
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_schemes_agree():
    cfg = dict(t_end=0.3, dt=1e-3, output_stride=10**9)
    a = run(_wave(16, 0.3), FlowConfig(scheme="ForwardEuler", **cfg)).final.lift
    b = run(_wave(16, 0.3), FlowConfig(scheme=Scheme.RK4, **cfg)).final.lift
    assert np.max(np.abs(a - b)) < 1e-3


def test_auto_dt_scales_with_h_squared():
    a = auto_dt(_wave(16), 0.25)
    b = auto_dt(_wave(32), 0.25)
    assert b / a == pytest.approx(0.25, rel=0.05)


def test_fixed_dt_last_step_clipped():
    fr = run(_wave(16), FlowConfig(t_end=0.1, dt=0.03))
    assert fr.final.time == pytest.approx(0.1, abs=1e-15)
    assert fr.dt_min == pytest.approx(0.01)


# ------------------------------------------------------------- stop rules


def test_graph_condition_lost():
    fr = run(_wave(16, 1.0), FlowConfig(t_end=1.0, stop_rules=StopRules(min_omega_below=0.99)))
    assert fr.status == Status.GRAPH_CONDITION_LOST and fr.steps == 0


def test_step_limit():
    fr = _steps(_wave(16), 5)
    assert fr.status == Status.STEP_LIMIT and fr.steps == 5 and len(fr.states) == 6


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_step_error_on_blow_up():
    with pytest.raises(StepError) as info:
        run(_wave(16, 1.0), FlowConfig(t_end=1e4, dt=5.0))
    assert info.value.step_index is not None and info.value.point_index is not None


def test_step_error_on_nan_input():
    st = _wave(16)
    lift = st.lift.copy()
    lift[0, 3, 4] = np.nan
    with pytest.raises(StepError) as info:
        step(st.evolve(lift, 0.0), FlowConfig(t_end=1.0))
    assert info.value.point_index is not None


def test_config_validation():
    with pytest.raises(ConfigError):
        FlowConfig(t_end=1.0, dt=-1.0)
    with pytest.raises(ConfigError):
        FlowConfig(t_end=1.0, cfl_safety=2.0)
    with pytest.raises(ValueError):
        FlowConfig(t_end=1.0, scheme="Leapfrog")
