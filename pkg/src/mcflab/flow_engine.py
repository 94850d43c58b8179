"""Explicit time stepping of graphical mean curvature flow.

The map is evolved by the nonparametric equation

    d f^a / dt = gt^{ij} (d_ij f^a - Gamma(N1)^k_ij d_k f^a + Gamma(N2)^a_bc d_i f^b d_j f^c)

with ``gt = g + f^* h``.  The right-hand side is the trace over the induced
metric of the covariant Hessian of ``f``, which is how it is computed
(:func:`mcflab.kernels.graph_trace` on orthonormal-frame jets).  For the
equivariant sphere ansatz ``f(theta, phi) = (rho(theta), phi)`` the equation
reduces to

    rho_t = rho'' / (r1^2 + r2^2 rho'^2)
            + (sin t cos t rho' - sin rho cos rho) / (r1^2 sin^2 t + r2^2 sin^2 rho)

(``t`` the colatitude), stepped directly by :func:`equivariant_rhs`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import ConfigError, StepError
from .pointwise_geometry import MapState, _profile_jets, frame_jets

__all__ = [
    "Scheme",
    "Status",
    "StopRules",
    "FlowConfig",
    "FlowRun",
    "full_grid_rhs",
    "equivariant_rhs",
    "auto_dt",
    "step_full_grid",
    "step_equivariant",
    "step",
    "run",
    "graph_diagnostics",
]


class Scheme(str, Enum):
    FORWARD_EULER = "ForwardEuler"
    RK4 = "RK4"


class Status(str, Enum):
    REACHED_T_END = "ReachedTEnd"
    CONVERGED = "Converged"
    GRAPH_CONDITION_LOST = "GraphConditionLost"
    STEP_LIMIT = "StepLimit"


@dataclass
class StopRules:
    sup_lambda_below: float = None
    min_omega_below: float = None
    max_steps: int = 10_000_000


@dataclass
class FlowConfig:
    t_end: float
    dt: object = "auto"
    cfl_safety: float = 0.25
    scheme: Scheme = Scheme.FORWARD_EULER
    stop_rules: StopRules = field(default_factory=StopRules)
    output_stride: int = 1

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if isinstance(self.stop_rules, dict):
            self.stop_rules = StopRules(**self.stop_rules)
        if self.dt != "auto":
            self.dt = float(self.dt)
            if not self.dt > 0:
                raise ConfigError("dt must be positive or 'auto'", field="flow.dt")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError("cfl_safety must lie in (0, 1]", field="flow.cfl_safety")
        if not self.t_end >= 0:
            raise ConfigError("t_end must be nonnegative", field="flow.t_end")
        if int(self.output_stride) < 1:
            raise ConfigError("output_stride must be >= 1", field="flow.output_stride")
        self.output_stride = int(self.output_stride)


@dataclass
class FlowRun:
    states: list
    status: Status
    steps: int
    dt_max: float
    dt_min: float

    @property
    def final(self) -> MapState:
        return self.states[-1]

    @property
    def times(self) -> list:
        return [s.time for s in self.states]


# ----------------------------------------------------------------- right-hand sides


def full_grid_rhs(state: MapState, M=None, T=None):
    """Velocity of the lift, shape ``(m, *grid.shape)``; also returns the frame differential."""
    if M is None:
        M, T = frame_jets(state)
    w = kernels.graph_trace(M, T)  # orthonormal target components; flat target frames are the chart
    return w.T.reshape((state.m,) + state.grid.shape), M


def equivariant_rhs(state: MapState):
    rho, d1, d2 = _profile_jets(state)
    r1 = state.domain.radius
    r2 = state.target.radius
    theta = state.grid.axes[0]
    st, ct = np.sin(theta), np.cos(theta)
    sr, cr = np.sin(rho), np.cos(rho)
    rate = d2 / (r1 * r1 + r2 * r2 * d1 * d1) + (st * ct * d1 - sr * cr) / (r1 * r1 * st * st + r2 * r2 * sr * sr)
    M = np.zeros((theta.size, 2, 2))
    M[:, 0, 0] = r2 * d1 / r1
    M[:, 1, 1] = r2 * sr / (r1 * st)
    return rate, M, d1


def _rhs(state):
    if state.mode == "equivariant":
        rate, M, _ = equivariant_rhs(state)
        return rate, M
    return full_grid_rhs(state)


def _min_eig_2x2(a, b, c):
    """Least eigenvalue of ``[[a, b], [b, c]]``."""
    return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b * b)


def auto_dt(state: MapState, cfl_safety: float, M=None) -> float:
    """CFL step ``cfl * h_min^2 / (2 n max eig(gt^{-1}))``.

    On full grids ``gt`` is the induced metric in chart coordinates.  In the
    equivariant reduction the longitude direction is not a grid axis; it
    enters as a zero-order term with coefficient ``gt^{phi phi}``, which is
    counted as an axis of spacing ``dtheta / 2`` (the pole distance of the
    first staggered point).
    """
    n = state.n
    if state.mode == "equivariant":
        _, _, d1 = equivariant_rhs(state)
        r1, r2 = state.domain.radius, state.target.radius
        theta = state.grid.axes[0]
        dth = state.grid.spacing[0]
        g_tt = 1.0 / (r1 * r1 + r2 * r2 * d1 * d1)
        g_pp = 1.0 / (r1 * r1 * np.sin(theta) ** 2 + r2 * r2 * np.sin(state.lift) ** 2)
        worst = float(np.max(np.maximum(g_tt, g_pp * 0.25 * dth * dth)))
        return cfl_safety * dth * dth / (2.0 * n * worst)
    if M is None:
        M, _ = frame_jets(state)
    from .model_spaces import frame_scales

    s = frame_scales(state.domain, state.grid.points)
    G = np.eye(n)[None] + np.einsum("pca,pcb->pab", M, M)
    Gc = G * s[:, :, None] * s[:, None, :]
    if n == 1:
        least = Gc[:, 0, 0]
    elif n == 2:
        least = _min_eig_2x2(Gc[:, 0, 0], Gc[:, 0, 1], Gc[:, 1, 1])
    else:
        least = np.linalg.eigvalsh(Gc)[:, 0]
    worst = float(np.max(1.0 / least))
    return cfl_safety * state.grid.min_spacing**2 / (2.0 * n * worst)


# --------------------------------------------------------------------- steppers


def _check_finite(lift, step_index=None):
    """Raise :class:`StepError` at the first grid point holding a non-finite component.

    Full-grid lifts are ``(m, *grid.shape)``; equivariant profiles are ``(J,)``.
    """
    bad = ~np.isfinite(lift)
    if np.any(bad):
        per_point = bad if lift.ndim == 1 else bad.reshape(lift.shape[0], -1).any(axis=0)
        point = int(np.flatnonzero(per_point)[0])
        raise StepError(f"non-finite value at grid point {point}", point_index=point, step_index=step_index)


def _advance(state: MapState, dt: float, scheme: Scheme, k1=None):
    u0 = state.lift
    if k1 is None:
        k1, _ = _rhs(state)
    if scheme == Scheme.FORWARD_EULER:
        return state.evolve(u0 + dt * k1, state.time + dt)
    k2, _ = _rhs(state.evolve(u0 + 0.5 * dt * k1, state.time + 0.5 * dt))
    k3, _ = _rhs(state.evolve(u0 + 0.5 * dt * k2, state.time + 0.5 * dt))
    k4, _ = _rhs(state.evolve(u0 + dt * k3, state.time + dt))
    return state.evolve(u0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), state.time + dt)


def step_full_grid(state: MapState, config: FlowConfig, dt: float = None) -> MapState:
    if state.mode != "full":
        raise ConfigError("step_full_grid needs a full-grid state", field="mode")
    return step(state, config, dt)


def step_equivariant(state: MapState, config: FlowConfig, dt: float = None) -> MapState:
    if state.mode != "equivariant":
        raise ConfigError("step_equivariant needs an equivariant state", field="mode")
    return step(state, config, dt)


def step(state: MapState, config: FlowConfig, dt: float = None) -> MapState:
    k1, M = _rhs(state)
    if dt is None:
        dt = auto_dt(state, config.cfl_safety, M) if config.dt == "auto" else config.dt
    new = _advance(state, dt, config.scheme, k1)
    _check_finite(new.lift)
    return new


def graph_diagnostics(state: MapState, M=None):
    """``(sup lambda_1, min *Omega)`` over the grid from the differential alone."""
    if M is None:
        M, _ = frame_jets(state)
    sup_lam = float(np.max(kernels.top_singular_value(M)))
    min_omega = float(np.min(1.0 / np.sqrt(kernels.det_ratio(M))))
    return sup_lam, min_omega


# -------------------------------------------------------------------------- run


def run(initial: MapState, config: FlowConfig, recorder=None) -> FlowRun:
    """Integrate to ``config.t_end`` or until a stop rule fires.

    ``recorder.record(state, prev, nxt)`` is called once per output snapshot
    (every ``output_stride`` steps, plus the initial and final states) with
    the neighbouring step states when they exist, so that centred time
    differences can be taken.
    """
    rules = config.stop_rules
    t_end = float(config.t_end)
    fixed_dt = None if config.dt == "auto" else float(config.dt)
    stride = config.output_stride
    t_tol = 1e-12 * max(1.0, t_end)

    states = []
    pending = None  # (prev, snapshot) waiting for the following step
    prev = None
    cur = initial
    t0 = initial.time
    nstep = 0
    dt_max = 0.0
    dt_min = math.inf
    status = None

    def emit(snapshot, before, after):
        states.append(snapshot)
        if recorder is not None:
            recorder.record(snapshot, before, after)

    while True:
        k1, M = _rhs(cur)
        sup_lam, min_omega = graph_diagnostics(cur, M)
        is_output = nstep % stride == 0
        if pending is not None:
            emit(pending[1], pending[0], cur)
            pending = None
        if rules.min_omega_below is not None and min_omega <= rules.min_omega_below:
            status = Status.GRAPH_CONDITION_LOST
        elif rules.sup_lambda_below is not None and sup_lam < rules.sup_lambda_below:
            status = Status.CONVERGED
        elif cur.time >= t0 + t_end - t_tol:
            status = Status.REACHED_T_END
        elif nstep >= rules.max_steps:
            status = Status.STEP_LIMIT
        if status is not None:
            emit(cur, prev if (prev is not None and nstep > 0) else None, None)
            break
        if fixed_dt is not None:
            dt = min(fixed_dt, t0 + t_end - cur.time)
            t_next = min(t0 + (nstep + 1) * fixed_dt, t0 + t_end)
        else:
            dt = min(auto_dt(cur, config.cfl_safety, M), t0 + t_end - cur.time)
            t_next = cur.time + dt
        nxt = _advance(cur, dt, config.scheme, k1)
        try:
            _check_finite(nxt.lift)
        except StepError as exc:
            exc.step_index = nstep
            raise
        nxt.time = t_next
        dt_max = max(dt_max, dt)
        dt_min = min(dt_min, dt)
        if is_output:
            pending = (prev, cur)
        prev, cur = cur, nxt
        nstep += 1

    return FlowRun(states=states, status=status, steps=nstep, dt_max=dt_max, dt_min=dt_min if nstep else 0.0)
