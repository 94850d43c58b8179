"""Run configuration files.

Configs are JSON objects with the sections below; :func:`canonical` fills
every default so that ``parse(dumps(canonical(c))) == c`` exactly.

.. code-block:: json

    {
      "domain":  {"kind": "torus", "periods": [6.283185307179586, 6.283185307179586], "resolution": [32, 32]},
      "target":  {"kind": "torus", "periods": [6.283185307179586, 6.283185307179586]},
      "mode": "FullGrid",
      "initial_map": {"family": "RandomFourier", "params": {"seed": 1, "max_mode": 2, "amplitude": 0.3}},
      "flow": {"dt": "auto", "cfl_safety": 0.25, "scheme": "ForwardEuler", "t_end": 1.0,
               "stop_rules": {"sup_lambda_below": null, "min_omega_below": null, "max_steps": 10000000},
               "output_stride": 10},
      "monitors": {"monotone_tol": null, "area_tol": 1e-12, "decay_tol": null, "decay_branch": "auto", "residual": true},
      "output": {"directory": "out", "stride": 10, "formats": ["csv", "json"]},
      "rescale": null,
      "residual": {"levels": 3, "t_end": 0.05}
    }

``rescale`` is ``{"mode": "cor51", "L": 2.0}`` (domain metric times ``2L``) or
``{"mode": "cor52", "k1": 4.0, "k2": 1.0}`` (domain metric times ``k1``, target
times ``k2``), applied to the built initial map by :func:`apply_rescale`.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .flow_engine import FlowConfig, StopRules
from .initial_maps import FAMILIES, build_initial_map
from .model_spaces import ManifoldModel, circle, flat_torus, grid, round_sphere
from .pointwise_geometry import MapState

__all__ = [
    "SCHEMA",
    "MetricScaling",
    "RunConfigFile",
    "parse",
    "load",
    "canonical",
    "dumps",
    "normalize_metrics",
    "apply_rescale",
    "model_from",
    "build_state",
    "flow_config",
]

SCHEMA = "mcflab.run-config/1"
MODES = ("FullGrid", "Equivariant")
SECTIONS = ("domain", "target", "mode", "initial_map", "flow", "monitors", "output", "rescale", "residual")

_FLOW_DEFAULTS = {
    "dt": "auto",
    "cfl_safety": 0.25,
    "scheme": "ForwardEuler",
    "t_end": 1.0,
    "stop_rules": {"sup_lambda_below": None, "min_omega_below": None, "max_steps": 10_000_000},
    "output_stride": 1,
}
_MONITOR_DEFAULTS = {
    "monotone_tol": None,
    "area_tol": 1e-12,
    "decay_tol": None,
    "decay_branch": "auto",
    "residual": True,
}
_OUTPUT_DEFAULTS = {"directory": "out", "stride": None, "formats": ["csv", "json"]}
_RESIDUAL_DEFAULTS = {"levels": 3, "t_end": 0.05}


@dataclass
class RunConfigFile:
    """Validated, canonical config tree plus the source text for diagnostics."""

    tree: dict
    text: str = ""

    def __getitem__(self, key):
        return self.tree[key]

    def __eq__(self, other):
        return isinstance(other, RunConfigFile) and self.tree == other.tree


@dataclass(frozen=True)
class MetricScaling:
    """Length factors applied to the two models and the induced change of singular values."""

    domain_length: float
    target_length: float

    @property
    def lambda_factor(self) -> float:
        return self.target_length / self.domain_length

    @property
    def pair_factor(self) -> float:
        return self.lambda_factor**2

    @property
    def domain_metric(self) -> float:
        return self.domain_length**2

    @property
    def target_metric(self) -> float:
        return self.target_length**2


def _line_of(text: str, key: str):
    """1-based line of the first occurrence of ``"key"`` in the source, if any."""
    if not text or key is None:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _fail(message, field, text):
    leaf = field.split(".")[-1] if field else None
    raise ConfigError(message, field=field, line=_line_of(text, leaf))


def _merge(defaults: dict, given, field, text):
    if given is None:
        return copy.deepcopy(defaults)
    if not isinstance(given, dict):
        _fail(f"{field} must be an object", field, text)
    unknown = set(given) - set(defaults)
    if unknown:
        k = sorted(unknown)[0]
        _fail(f"unknown key {k!r}", f"{field}.{k}", text)
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(defaults.get(k), dict) and v is not None:
            out[k] = _merge(defaults[k], v, f"{field}.{k}", text)
        else:
            out[k] = v
    return out


def _number(value, field, text, positive=False, integer=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        _fail(f"{field} must be a finite number", field, text)
    if integer and value != int(value):
        _fail(f"{field} must be an integer", field, text)
    if positive and not value > 0:
        _fail(f"{field} must be positive", field, text)
    return int(value) if integer else float(value)


def _model_section(sec, field, text, with_resolution):
    if not isinstance(sec, dict):
        _fail(f"{field} must be an object", field, text)
    allowed = {"kind", "radius", "periods"} | ({"resolution"} if with_resolution else set())
    unknown = set(sec) - allowed
    if unknown:
        k = sorted(unknown)[0]
        _fail(f"unknown key {k!r}", f"{field}.{k}", text)
    kind = sec.get("kind")
    out = {"kind": kind}
    if kind in ("circle", "sphere"):
        out["radius"] = _number(sec.get("radius", 1.0), f"{field}.radius", text, positive=True)
    elif kind == "torus":
        periods = sec.get("periods", [2 * math.pi, 2 * math.pi])
        if not isinstance(periods, list) or not periods:
            _fail("periods must be a non-empty list", f"{field}.periods", text)
        out["periods"] = [_number(p, f"{field}.periods", text, positive=True) for p in periods]
    else:
        _fail(f"unknown manifold kind {kind!r}", f"{field}.kind", text)
    if with_resolution:
        res = sec.get("resolution")
        if res is None:
            _fail("resolution is required", f"{field}.resolution", text)
        res = res if isinstance(res, list) else [res]
        out["resolution"] = [_number(r, f"{field}.resolution", text, integer=True) for r in res]
    return out


def model_from(sec: dict) -> ManifoldModel:
    if sec["kind"] == "circle":
        return circle(sec["radius"])
    if sec["kind"] == "sphere":
        return round_sphere(sec["radius"])
    return flat_torus(sec["periods"])


def _validate(tree: dict, text: str) -> dict:
    if not isinstance(tree, dict):
        raise ConfigError("config must be a JSON object", line=1)
    unknown = set(tree) - set(SECTIONS) - {"schema"}
    if unknown:
        k = sorted(unknown)[0]
        _fail(f"unknown section {k!r}", k, text)
    for req in ("domain", "target", "initial_map"):
        if req not in tree:
            raise ConfigError(f"missing section {req!r}", field=req)
    out = {"schema": SCHEMA}
    out["domain"] = _model_section(tree["domain"], "domain", text, True)
    out["target"] = _model_section(tree["target"], "target", text, False)
    mode = tree.get("mode", "FullGrid")
    if mode not in MODES:
        _fail(f"mode must be one of {MODES}", "mode", text)
    out["mode"] = mode

    im = tree["initial_map"]
    if not isinstance(im, dict) or im.get("family") not in FAMILIES:
        _fail(f"initial_map.family must be one of {FAMILIES}", "initial_map.family", text)
    params = im.get("params", {}) or {}
    if not isinstance(params, dict):
        _fail("initial_map.params must be an object", "initial_map.params", text)
    out["initial_map"] = {"family": im["family"], "params": copy.deepcopy(params)}

    flow = _merge(_FLOW_DEFAULTS, tree.get("flow"), "flow", text)
    if flow["dt"] != "auto":
        flow["dt"] = _number(flow["dt"], "flow.dt", text, positive=True)
    flow["cfl_safety"] = _number(flow["cfl_safety"], "flow.cfl_safety", text, positive=True)
    if flow["cfl_safety"] > 1:
        _fail("cfl_safety must lie in (0, 1]", "flow.cfl_safety", text)
    if flow["scheme"] not in ("ForwardEuler", "RK4"):
        _fail("scheme must be ForwardEuler or RK4", "flow.scheme", text)
    flow["t_end"] = _number(flow["t_end"], "flow.t_end", text)
    if flow["t_end"] < 0:
        _fail("t_end must be nonnegative", "flow.t_end", text)
    sr = flow["stop_rules"]
    sr["sup_lambda_below"] = _number(sr["sup_lambda_below"], "flow.stop_rules.sup_lambda_below", text,
                                     positive=True, allow_none=True)
    sr["min_omega_below"] = _number(sr["min_omega_below"], "flow.stop_rules.min_omega_below", text,
                                    allow_none=True)
    sr["max_steps"] = _number(sr["max_steps"], "flow.stop_rules.max_steps", text, positive=True, integer=True)
    flow["output_stride"] = _number(flow["output_stride"], "flow.output_stride", text, positive=True, integer=True)

    output = _merge(_OUTPUT_DEFAULTS, tree.get("output"), "output", text)
    if output["stride"] is not None:
        stride = _number(output["stride"], "output.stride", text, positive=True, integer=True)
        given_flow = tree.get("flow") or {}
        if "output_stride" in given_flow and given_flow["output_stride"] != stride:
            _fail("output.stride and flow.output_stride disagree", "output.stride", text)
        flow["output_stride"] = stride
    output["stride"] = flow["output_stride"]
    if not isinstance(output["directory"], str) or not output["directory"]:
        _fail("output.directory must be a non-empty string", "output.directory", text)
    if not isinstance(output["formats"], list) or set(output["formats"]) - {"csv", "json"}:
        _fail("output.formats must list 'csv' and/or 'json'", "output.formats", text)
    out["flow"] = flow
    out["output"] = output

    mon = _merge(_MONITOR_DEFAULTS, tree.get("monitors"), "monitors", text)
    for key in ("monotone_tol", "decay_tol"):
        mon[key] = _number(mon[key], f"monitors.{key}", text, allow_none=True)
    mon["area_tol"] = _number(mon["area_tol"], "monitors.area_tol", text)
    if mon["decay_branch"] not in ("auto", "a", "b"):
        _fail("decay_branch must be auto, a or b", "monitors.decay_branch", text)
    if not isinstance(mon["residual"], bool):
        _fail("monitors.residual must be true or false", "monitors.residual", text)
    out["monitors"] = mon

    rescale = tree.get("rescale")
    if rescale is not None:
        if not isinstance(rescale, dict) or rescale.get("mode") not in ("cor51", "cor52"):
            _fail("rescale.mode must be cor51 or cor52", "rescale.mode", text)
        if rescale["mode"] == "cor51":
            rescale = {"mode": "cor51", "L": _number(rescale.get("L"), "rescale.L", text, positive=True)}
        else:
            rescale = {
                "mode": "cor52",
                "k1": _number(rescale.get("k1"), "rescale.k1", text, positive=True),
                "k2": _number(rescale.get("k2"), "rescale.k2", text, positive=True),
            }
    out["rescale"] = rescale

    res = _merge(_RESIDUAL_DEFAULTS, tree.get("residual"), "residual", text)
    res["levels"] = _number(res["levels"], "residual.levels", text, integer=True)
    res["t_end"] = _number(res["t_end"], "residual.t_end", text, positive=True)
    out["residual"] = res

    # semantic checks that need the models
    try:
        domain = model_from(out["domain"])
        target = model_from(out["target"])
        grid(domain, out["domain"]["resolution"] if len(out["domain"]["resolution"]) > 1
             else out["domain"]["resolution"][0], equivariant=(mode == "Equivariant"))
    except ConfigError as exc:
        field = f"domain.{exc.field}" if exc.field else "domain"
        _fail(exc.message, field, text)
    if mode == "Equivariant" and target.kind != "sphere":
        _fail("equivariant mode needs a sphere target", "mode", text)
    if mode == "FullGrid" and target.kind == "sphere":
        _fail("sphere targets need equivariant mode", "mode", text)
    return out


def parse(text: str) -> RunConfigFile:
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return RunConfigFile(_validate(tree, text), text)


def load(path) -> RunConfigFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse(text)


def canonical(cfg: RunConfigFile) -> dict:
    return copy.deepcopy(cfg.tree)


def dumps(cfg) -> str:
    tree = cfg.tree if isinstance(cfg, RunConfigFile) else cfg
    return json.dumps(tree, sort_keys=True, indent=2) + "\n"


# --------------------------------------------------------------- rescaling


def normalize_metrics(mode: str, L: float = None, k1: float = None, k2: float = None) -> MetricScaling:
    """Metric rescalings of the two corollaries.

    ``cor51``: domain metric times ``2L``, so singular values scale by
    ``1 / sqrt(2L)``.  ``cor52``: domain metric times ``k1`` and target
    metric times ``k2``, so pair products scale by ``k2 / k1``.
    """
    if mode == "cor51":
        if L is None or not L > 0:
            raise ConfigError("L must be positive", field="rescale.L")
        return MetricScaling(math.sqrt(2.0 * L), 1.0)
    if mode == "cor52":
        if k1 is None or k2 is None or not (k1 > 0 and k2 > 0):
            raise ConfigError("k1 and k2 must be positive", field="rescale.k1")
        return MetricScaling(math.sqrt(k1), math.sqrt(k2))
    raise ConfigError(f"unknown rescale mode {mode!r}", field="rescale.mode")


def apply_rescale(state: MapState, scaling: MetricScaling) -> MapState:
    """The same map between the rescaled models.

    Chart coordinates of tori and circles are lengths and scale with the
    metric; sphere charts are angles and stay put (the radius scales).
    """
    domain = state.domain.scaled(scaling.domain_length)
    target = state.target.scaled(scaling.target_length)
    g = grid(domain, state.grid.shape if len(state.grid.shape) > 1 else state.grid.shape[0],
             equivariant=state.grid.equivariant)
    lift = state.lift
    if target.kind != "sphere":
        lift = lift * scaling.target_length
    if state.mode == "equivariant":
        return MapState(domain, target, g, lift, time=state.time, pole_values=state.pole_values)
    return MapState(domain, target, g, lift, winding=state.winding, time=state.time)


# ------------------------------------------------------------------ builders


def build_state(cfg: RunConfigFile, resolution=None) -> MapState:
    tree = cfg.tree
    domain = model_from(tree["domain"])
    target = model_from(tree["target"])
    res = tree["domain"]["resolution"] if resolution is None else resolution
    res = res if np.isscalar(res) else (res[0] if len(res) == 1 else tuple(res))
    g = grid(domain, res, equivariant=tree["mode"] == "Equivariant")
    state = build_initial_map(tree["initial_map"]["family"], tree["initial_map"]["params"], domain, target, g)
    rs = tree.get("rescale")
    if rs:
        state = apply_rescale(state, normalize_metrics(rs["mode"], L=rs.get("L"), k1=rs.get("k1"), k2=rs.get("k2")))
    return state


def flow_config(cfg: RunConfigFile, **overrides) -> FlowConfig:
    f = copy.deepcopy(cfg.tree["flow"])
    f.update(overrides)
    f["stop_rules"] = StopRules(**f["stop_rules"])
    return FlowConfig(**f)
