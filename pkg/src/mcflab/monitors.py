"""Time series of grid-wide geometric quantities and the checks run on them.

A :class:`Recorder` is handed to :func:`mcflab.flow_engine.run`; it reduces
each output snapshot to one row of a :class:`MonitorSeries`.  The checks
(:func:`check_monotone_min_omega`, :func:`check_area_decreasing_preserved`,
:func:`check_decay`) only read the series, so they can be recomputed from a
saved ``series.csv``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InapplicableError
from .pointwise_geometry import MapState, geometry_field, graph_heat_operator, ln_star_omega

__all__ = [
    "COLUMNS",
    "MonitorSeries",
    "Flag",
    "DecayCheck",
    "Recorder",
    "record",
    "residual_field",
    "residual_evolution_equation",
    "residual_linf",
    "interior_mask",
    "POLE_MARGIN",
    "default_tolerance",
    "check_monotone_min_omega",
    "check_area_decreasing_preserved",
    "check_decay",
    "decay_constant",
    "curvature_hypotheses",
    "covered_regime",
    "evaluate_flags",
]

COLUMNS = (
    "time",
    "min_omega",
    "det_ratio_max",
    "max_pair_product",
    "min_s2_eig",
    "max_A2",
    "residual_linf",
)

POLE_MARGIN = 0.1


@dataclass
class MonitorSeries:
    """Columns of :data:`COLUMNS` plus the run metadata the checks need.

    ``residual_linf`` holds ``nan`` where no centred time difference exists
    (first and last snapshot).
    """

    time: list = field(default_factory=list)
    min_omega: list = field(default_factory=list)
    det_ratio_max: list = field(default_factory=list)
    max_pair_product: list = field(default_factory=list)
    min_s2_eig: list = field(default_factory=list)
    max_A2: list = field(default_factory=list)
    residual_linf: list = field(default_factory=list)
    sup_lambda: list = field(default_factory=list)
    n: int = 2
    dt_max: float = 0.0
    h_min: float = 0.0

    def __len__(self):
        return len(self.time)

    def column(self, name) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        cols = [getattr(self, c) for c in COLUMNS]
        return [tuple(c[i] for c in cols) for i in range(len(self))]


@dataclass
class Flag:
    applicable: bool
    passed: bool = None
    first_failure_time: float = None
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "passed": self.passed,
            "first_failure_time": self.first_failure_time,
            "note": self.note,
        }


@dataclass
class DecayCheck:
    c0: float
    branch: str
    epsilon: float
    lower_envelope: np.ndarray
    satisfied: bool
    first_failure_time: float = None


# ------------------------------------------------------------------ residual


def residual_field(prev: MapState, cur: MapState, nxt: MapState, gf=None) -> np.ndarray:
    """Pointwise defect of the evolution equation of ``ln *Omega`` at ``cur``.

    The left side is a centred (non-uniform) difference over three
    consecutive steps; the right side is the graph heat operator of
    ``ln *Omega`` plus ``term_I + term_II``.
    """
    gf = geometry_field(cur) if gf is None else gf
    u0, u1, u2 = ln_star_omega(prev), -np.log(gf.det_ratio) * 0.5, ln_star_omega(nxt)
    ha = cur.time - prev.time
    hb = nxt.time - cur.time
    dudt = (ha * ha * (u2 - u1) + hb * hb * (u1 - u0)) / (ha * hb * (ha + hb))
    rhs = graph_heat_operator(cur, u1, gf.M) + gf.term_I + gf.term_II
    return dudt - rhs


def interior_mask(state: MapState, pole_margin: float = POLE_MARGIN) -> np.ndarray:
    """Points (flat order) where the discrete operators are consistent.

    On sphere domains the first colatitude cells see an O(1) truncation error
    from the coordinate singularity, which leaves a grid-scale layer in the
    solution; points within ``pole_margin`` radians of a pole are excluded.
    The band is fixed in angle, so it covers ever more cells under refinement.
    """
    if state.domain.kind != "sphere":
        return np.ones(state.grid.size, dtype=bool)
    theta = state.grid.points[:, 0]
    return (theta >= pole_margin) & (theta <= np.pi - pole_margin)


def residual_linf(prev: MapState, cur: MapState, nxt: MapState, gf=None) -> float:
    r = residual_field(prev, cur, nxt, gf)
    return float(np.max(np.abs(r[interior_mask(cur)])))


def residual_evolution_equation(run, index: int) -> float:
    """``max |residual|`` over the interior at snapshot ``index`` of a run saved with ``output_stride = 1``."""
    states = run.states
    if index <= 0 or index >= len(states) - 1:
        raise InapplicableError("the residual needs a snapshot with both neighbours")
    return residual_linf(states[index - 1], states[index], states[index + 1])


# ----------------------------------------------------------------- recording


class Recorder:
    """Collects one :class:`MonitorSeries` row per snapshot handed over by the engine."""

    def __init__(self, n: int, h_min: float, residual: bool = True):
        self.series = MonitorSeries(n=n, h_min=h_min)
        self.residual = residual

    def record(self, state: MapState, prev: MapState = None, nxt: MapState = None):
        record(self.series, state, prev, nxt, residual=self.residual)


def record(series: MonitorSeries, state: MapState, prev=None, nxt=None, residual=True):
    gf = geometry_field(state)
    s = series
    s.time.append(float(state.time))
    s.min_omega.append(float(np.min(gf.star_omega)))
    s.det_ratio_max.append(float(np.max(gf.det_ratio)))
    s.max_pair_product.append(float(np.max(gf.max_pair)))
    s.min_s2_eig.append(float(np.min(gf.s2_min)))
    s.max_A2.append(float(np.max(gf.A2)))
    s.sup_lambda.append(float(np.max(gf.lam[:, 0])))
    if residual and prev is not None and nxt is not None:
        s.residual_linf.append(residual_linf(prev, state, nxt, gf))
    else:
        s.residual_linf.append(math.nan)
    if prev is not None:
        s.dt_max = max(s.dt_max, state.time - prev.time)
    if nxt is not None:
        s.dt_max = max(s.dt_max, nxt.time - state.time)


# -------------------------------------------------------------------- checks


def default_tolerance(series: MonitorSeries) -> float:
    """Discretisation budget ``10 dt h^2`` for comparisons between snapshots."""
    return 10.0 * series.dt_max * series.h_min**2


def _first_time(series, mask):
    idx = np.flatnonzero(mask)
    return float(series.time[idx[0]]) if idx.size else None


def check_monotone_min_omega(series: MonitorSeries, tol: float = None) -> Flag:
    """``min *Omega`` never decreases by more than ``tol`` between snapshots."""
    tol = default_tolerance(series) if tol is None else tol
    w = series.column("min_omega")
    if w.size < 2:
        return Flag(True, True)
    drop = w[1:] < w[:-1] - tol
    t = _first_time(MonitorSeries(time=series.time[1:]), drop)
    return Flag(True, not drop.any(), t)


def check_area_decreasing_preserved(series: MonitorSeries, tol: float = 1e-12) -> Flag:
    """Applicable when the initial map is strictly area-decreasing (max pair product < 1)."""
    pair = series.column("max_pair_product")
    if pair.size == 0 or not pair[0] < 1.0:
        return Flag(False, note="initial max pair product >= 1")
    s2 = series.column("min_s2_eig")
    bad = (pair >= 1.0) | (s2 <= -tol)
    return Flag(True, not bad.any(), _first_time(series, bad))


def decay_constant(n: int, k1: float, epsilon: float, branch: str) -> float:
    """Rate ``c0`` of the lower envelope ``ln *Omega >= ln *Omega(0) exp(-2 c0 t)``."""
    if branch == "a":
        return k1 * (n - 1) / 4.0
    return epsilon * k1 * (n - 1) / 16.0


def check_decay(
    series: MonitorSeries, k1: float, k2: float, epsilon: float = None, branch: str = "auto", tol: float = None
) -> DecayCheck:
    """Compare ``ln min *Omega`` with the envelope ``ln min *Omega(0) exp(-2 c0 t)``.

    Needs ``k1 > 0`` and an initial ``det_ratio_max < 4``; ``epsilon``
    defaults to ``4 - det_ratio_max(0)``.  Branch ``a`` covers ``k2 <= 0``,
    branch ``b`` covers ``0 < k2 <= k1``.
    """
    if not k1 > 0:
        raise InapplicableError("decay needs a positively curved domain")
    d0 = series.det_ratio_max[0]
    if not d0 < 4.0:
        raise InapplicableError("decay needs det_ratio_max(0) < 4")
    if branch == "auto":
        if k2 <= 0:
            branch = "a"
        elif k2 <= k1:
            branch = "b"
        else:
            raise InapplicableError("decay needs k2 <= k1")
    epsilon = 4.0 - d0 if epsilon is None else epsilon
    tol = default_tolerance(series) if tol is None else tol
    c0 = decay_constant(series.n, k1, epsilon, branch)
    t = series.column("time") - series.time[0]
    f0 = math.log(series.min_omega[0])
    envelope = f0 * np.exp(-2.0 * c0 * t)
    lnw = np.log(series.column("min_omega"))
    bad = lnw < envelope - tol
    return DecayCheck(c0, branch, epsilon, envelope, not bad.any(), _first_time(series, bad))


def curvature_hypotheses(k1: float, k2: float) -> bool:
    """``k1 >= 0`` and either ``k2 <= 0`` or ``k1 >= k2 > 0``."""
    return k1 >= 0 and (k2 <= 0 or k1 >= k2 > 0)


def covered_regime(series: MonitorSeries, k1: float, k2: float) -> bool:
    """Curvature hypotheses plus an initially area-decreasing map.

    ``det_ratio < 4`` forces every pair product below 1, and the key
    inequality for ``min *Omega`` needs only the pair bound, so one gate
    serves both theorems.
    """
    return curvature_hypotheses(k1, k2) and len(series) > 0 and series.max_pair_product[0] < 1.0


def evaluate_flags(series: MonitorSeries, k1: float, k2: float, monotone_tol=None, area_tol=1e-12,
                   decay_tol=None, decay_branch="auto", min_omega_below=None):
    """All monitor flags plus the tolerances actually used.

    Returns ``(flags, tolerances, decay)`` where ``flags`` maps names to
    :meth:`Flag.as_dict` records and ``decay`` is ``{"c0", "branch",
    "epsilon"}`` or ``None``.  Passing the returned tolerances back in
    reproduces the flags from the series alone.
    """
    covered = covered_regime(series, k1, k2)
    monotone_tol = default_tolerance(series) if monotone_tol is None else float(monotone_tol)
    decay_tol = monotone_tol if decay_tol is None else float(decay_tol)
    flags = {}
    if covered:
        flags["monotone_min_omega"] = check_monotone_min_omega(series, monotone_tol)
    else:
        flags["monotone_min_omega"] = Flag(False, note="outside the covered regime")
    if curvature_hypotheses(k1, k2):
        flags["area_decreasing_preserved"] = check_area_decreasing_preserved(series, area_tol)
    else:
        flags["area_decreasing_preserved"] = Flag(False, note="outside the covered regime")
    decay = None
    try:
        if not curvature_hypotheses(k1, k2):
            raise InapplicableError("outside the covered regime")
        dc = check_decay(series, k1, k2, branch=decay_branch, tol=decay_tol)
        flags["decay"] = Flag(True, dc.satisfied, dc.first_failure_time)
        decay = {"c0": dc.c0, "branch": dc.branch, "epsilon": dc.epsilon}
    except InapplicableError as exc:
        flags["decay"] = Flag(False, note=str(exc))
    if min_omega_below is not None and covered:
        w = series.column("min_omega")
        bad = w <= min_omega_below
        flags["graph_condition"] = Flag(True, not bad.any(), _first_time(series, bad))
    tolerances = {"monotone": monotone_tol, "area": float(area_tol), "decay": decay_tol}
    return {k: v.as_dict() for k, v in flags.items()}, tolerances, decay
