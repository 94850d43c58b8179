"""Initial-map families for flow runs.

Families and their ``params``:

``Constant``        ``value`` (target chart tuple; default origin)
``Linear``          ``matrix`` (integer ``m x n`` winding numbers on torus targets)
``LinearPlusWave``  ``matrix``, ``amplitudes`` (``m``), ``wavenumbers`` (``n`` integers)
``Cap``             ``a``: equivariant profile ``rho = a sin(theta)``
``Identity``        equivariant ``rho = theta`` (pole values 0 and pi), or the identity winding on equal tori
``RandomFourier``   ``seed``, ``max_mode``, ``amplitude`` (scalar or one per target component), optional ``matrix``

Torus coordinates enter through the angles ``2 pi x_i / P_i`` so a family
describes the same map after the domain is rescaled.  On the sphere,
``RandomFourier`` uses polynomials in the ambient coordinates
``(sin t cos p, sin t sin p, cos t)`` of degree ``<= max_mode``, which are
smooth across the poles.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .model_spaces import ManifoldModel, StructuredGrid
from .pointwise_geometry import MapState

__all__ = ["FAMILIES", "build_initial_map", "random_fourier_lift", "mode_list"]

FAMILIES = ("Constant", "Linear", "LinearPlusWave", "Cap", "Identity", "RandomFourier")


def _angles(grid: StructuredGrid):
    mesh = np.meshgrid(*grid.axes, indexing="ij")
    if grid.model.kind == "sphere":
        return mesh
    return [2.0 * math.pi * x / p for x, p in zip(mesh, grid.model.chart_periods)]


def _matrix(params, m, n, key="matrix"):
    if key not in params or params[key] is None:
        return np.zeros((m, n), dtype=np.int64)
    A = np.asarray(params[key], dtype=float)
    if A.shape != (m, n):
        raise ConfigError(f"{key} must be {m}x{n}", field=f"initial_map.params.{key}")
    if np.any(A != np.round(A)):
        raise ConfigError("Linear matrix entries must be integers on torus targets", field=f"initial_map.params.{key}")
    return A.astype(np.int64)


def _amplitudes(params, m):
    amp = np.atleast_1d(np.asarray(params.get("amplitude", params.get("amplitudes", 0.0)), dtype=float))
    if amp.size == 1:
        amp = np.full(m, float(amp[0]))
    if amp.shape != (m,):
        raise ConfigError(f"need 1 or {m} amplitudes", field="initial_map.params.amplitude")
    return amp


def mode_list(n: int, max_mode: int):
    """Nonzero integer wave vectors with sup-norm ``<= max_mode``, one of each ``+-k`` pair."""
    rng = range(-max_mode, max_mode + 1)
    out = []
    for k in np.ndindex(*(len(rng),) * n):
        vec = tuple(c - max_mode for c in k)
        if any(vec) and vec > tuple(-c for c in vec):
            out.append(vec)
    return out


def random_fourier_lift(grid: StructuredGrid, m: int, seed: int, max_mode: int, amplitude) -> np.ndarray:
    """Smooth random periodic lift ``(m, *grid.shape)``; each component has sup-norm ``amplitude``."""
    if max_mode < 1:
        raise ConfigError("max_mode must be >= 1", field="initial_map.params.max_mode")
    rng = np.random.default_rng(seed)
    amp = np.broadcast_to(np.asarray(amplitude, dtype=float), (m,))
    ang = _angles(grid)
    model = grid.model
    out = np.zeros((m,) + grid.shape)
    if grid.equivariant:
        theta = grid.axes[0]
        for a in range(m):
            for k in range(1, max_mode + 1):
                out[a] += rng.standard_normal() / k**2 * np.sin(k * theta)
    elif model.kind == "sphere":
        t, p = ang
        xyz = (np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t))
        monos = [(i, j, k) for i in range(max_mode + 1) for j in range(max_mode + 1 - i)
                 for k in range(max_mode + 1 - i - j) if i + j + k > 0]
        for a in range(m):
            for i, j, k in monos:
                c = rng.standard_normal() / (i + j + k) ** 2
                out[a] += c * xyz[0] ** i * xyz[1] ** j * xyz[2] ** k
    else:
        n = model.dim
        for a in range(m):
            for vec in mode_list(n, max_mode):
                phase = sum(v * x for v, x in zip(vec, ang))
                norm = 1.0 + sum(v * v for v in vec)
                c, s = rng.standard_normal(2) / norm
                out[a] += c * np.cos(phase) + s * np.sin(phase)
    for a in range(m):
        top = np.max(np.abs(out[a]))
        if top > 0:
            out[a] *= amp[a] / top
    return out


def build_initial_map(family: str, params: dict, domain: ManifoldModel, target: ManifoldModel,
                      grid: StructuredGrid) -> MapState:
    params = dict(params or {})
    if family not in FAMILIES:
        raise ConfigError(f"unknown initial map family {family!r}", field="initial_map.family")
    n, m = domain.dim, target.dim
    if grid.equivariant:
        theta = grid.axes[0]
        if family == "Constant":
            return MapState(domain, target, grid, np.zeros_like(theta))
        if family == "Cap":
            return MapState(domain, target, grid, float(params.get("a", 0.5)) * np.sin(theta))
        if family == "Identity":
            return MapState(domain, target, grid, theta.copy(), pole_values=(0.0, math.pi))
        if family == "RandomFourier":
            lift = random_fourier_lift(grid, 1, int(params.get("seed", 0)), int(params.get("max_mode", 3)),
                                       _amplitudes(params, 1))
            return MapState(domain, target, grid, lift[0])
        raise ConfigError(f"family {family} is not available in equivariant mode", field="initial_map.family")

    if family in ("Cap",):
        raise ConfigError("Cap is an equivariant family", field="initial_map.family")
    zero = np.zeros((m,) + grid.shape)
    if family == "Constant":
        value = np.asarray(params.get("value", np.zeros(m)), dtype=float)
        if value.shape != (m,):
            raise ConfigError(f"value must have {m} entries", field="initial_map.params.value")
        return MapState(domain, target, grid, zero + value.reshape((m,) + (1,) * len(grid.shape)))
    winding_ok = domain.kind != "sphere"
    if family == "Identity":
        if domain != target or not winding_ok:
            raise ConfigError("Identity needs equal tori (or equivariant spheres)", field="initial_map.family")
        return MapState(domain, target, grid, zero, winding=np.eye(n, dtype=np.int64))
    W = _matrix(params, m, n)
    if np.any(W) and not winding_ok:
        raise ConfigError("maps from the sphere carry no winding", field="initial_map.params.matrix")
    if family == "Linear":
        return MapState(domain, target, grid, zero, winding=W)
    if family == "LinearPlusWave":
        amp = _amplitudes({"amplitude": params.get("amplitudes", 0.0)}, m)
        k = np.asarray(params.get("wavenumbers", [1] + [0] * (n - 1)), dtype=float)
        if k.shape != (n,) or np.any(k != np.round(k)):
            raise ConfigError(f"wavenumbers must be {n} integers", field="initial_map.params.wavenumbers")
        ang = _angles(grid)
        phase = sum(kk * x for kk, x in zip(k, ang))
        lift = amp.reshape((m,) + (1,) * len(grid.shape)) * np.sin(phase)[None]
        return MapState(domain, target, grid, lift, winding=W)
    lift = random_fourier_lift(grid, m, int(params.get("seed", 0)), int(params.get("max_mode", 3)),
                               _amplitudes(params, m))
    return MapState(domain, target, grid, lift, winding=W)
