"""Constant-curvature model manifolds: circle, flat torus and round 2-sphere.

All three carry diagonal metrics in their charts, so the orthonormal frame
of the chart basis is a per-axis rescaling (:func:`frame_scales`).  The
torus chart uses coordinates in ``[0, period)`` with metric ``delta_ij``; the
circle is the one-dimensional torus of period ``2*pi*r``.  The sphere chart is
colatitude/longitude ``(theta, phi)`` with metric ``r^2 (dtheta^2 + sin^2
theta dphi^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "ManifoldModel",
    "ChartPoint",
    "MetricData",
    "StructuredGrid",
    "circle",
    "flat_torus",
    "round_sphere",
    "chart_point",
    "metric_at",
    "metric_field",
    "frame_scales",
    "sectional_curvature",
    "grid",
    "MIN_RESOLUTION",
]

MIN_RESOLUTION = 8

KINDS = ("circle", "torus", "sphere")


@dataclass(frozen=True)
class ManifoldModel:
    kind: str
    dim: int
    radius: float = 1.0
    periods: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown manifold kind {self.kind!r}", field="kind")
        if self.dim < 1:
            raise ConfigError("dimension must be >= 1", field="dim")
        if self.kind == "circle":
            if self.dim != 1:
                raise ConfigError("a circle has dimension 1", field="dim")
            if not self.radius > 0:
                raise ConfigError("radius must be positive", field="radius")
        elif self.kind == "sphere":
            if self.dim != 2:
                raise ConfigError("only the round 2-sphere is supported", field="dim")
            if not self.radius > 0:
                raise ConfigError("radius must be positive", field="radius")
        else:
            if len(self.periods) != self.dim:
                raise ConfigError("torus needs one period per dimension", field="periods")
            if not all(p > 0 for p in self.periods):
                raise ConfigError("torus periods must be strictly positive", field="periods")
            if self.dim > 2:
                raise ConfigError("manifolds of dimension > 2 are not supported", field="dim")

    @property
    def curvature(self) -> float:
        return 1.0 / self.radius**2 if self.kind == "sphere" else 0.0

    @property
    def is_flat(self) -> bool:
        return self.kind != "sphere"

    @property
    def chart_periods(self) -> tuple:
        """Period of each chart coordinate (``None`` for the colatitude axis)."""
        if self.kind == "circle":
            return (2.0 * math.pi * self.radius,)
        if self.kind == "torus":
            return tuple(float(p) for p in self.periods)
        return (None, 2.0 * math.pi)

    def scaled(self, factor: float) -> "ManifoldModel":
        """The same manifold with its metric multiplied by ``factor**2``."""
        if self.kind == "torus":
            return ManifoldModel("torus", self.dim, periods=tuple(p * factor for p in self.periods))
        return ManifoldModel(self.kind, self.dim, radius=self.radius * factor)

    def describe(self) -> dict:
        if self.kind == "torus":
            return {"kind": "torus", "periods": list(self.periods)}
        return {"kind": self.kind, "radius": self.radius}


def circle(radius: float = 1.0) -> ManifoldModel:
    return ManifoldModel("circle", 1, radius=float(radius))


def flat_torus(periods=(2 * math.pi, 2 * math.pi)) -> ManifoldModel:
    periods = tuple(float(p) for p in periods)
    return ManifoldModel("torus", len(periods), periods=periods)


def round_sphere(radius: float = 1.0) -> ManifoldModel:
    return ManifoldModel("sphere", 2, radius=float(radius))


@dataclass(frozen=True)
class ChartPoint:
    coords: tuple


def chart_point(model: ManifoldModel, coords) -> ChartPoint:
    """Validate ``coords`` against the chart of ``model``; periodic axes are reduced."""
    coords = tuple(float(c) for c in np.atleast_1d(coords))
    if len(coords) != model.dim:
        raise DomainError(f"expected {model.dim} coordinates, got {len(coords)}")
    if not all(math.isfinite(c) for c in coords):
        raise DomainError("non-finite chart coordinate")
    if model.kind == "sphere":
        theta, phi = coords
        if not 0.0 < theta < math.pi:
            raise DomainError(f"colatitude {theta} outside (0, pi)")
        return ChartPoint((theta, phi % (2.0 * math.pi)))
    return ChartPoint(tuple(c % p for c, p in zip(coords, model.chart_periods)))


@dataclass(frozen=True)
class MetricData:
    g: np.ndarray
    gamma: np.ndarray  # gamma[k, i, j] = Gamma^k_ij


def metric_at(model: ManifoldModel, p) -> MetricData:
    if not isinstance(p, ChartPoint):
        p = chart_point(model, p)
    g, gamma = metric_field(model, np.asarray(p.coords, dtype=float)[None, :])
    return MetricData(g[0], gamma[0])


def metric_field(model: ManifoldModel, coords: np.ndarray):
    """Metric ``(P, n, n)`` and Christoffel symbols ``(P, n, n, n)`` at chart points ``(P, n)``."""
    coords = np.asarray(coords, dtype=float).reshape(-1, model.dim)
    n = model.dim
    npts = coords.shape[0]
    g = np.zeros((npts, n, n))
    gamma = np.zeros((npts, n, n, n))
    if model.kind != "sphere":
        g[:] = np.eye(n)
        return g, gamma
    theta = coords[:, 0]
    if np.any((theta <= 0.0) | (theta >= math.pi)):
        raise DomainError("colatitude outside (0, pi)")
    s, c = np.sin(theta), np.cos(theta)
    r2 = model.radius**2
    g[:, 0, 0] = r2
    g[:, 1, 1] = r2 * s * s
    gamma[:, 0, 1, 1] = -s * c
    gamma[:, 1, 0, 1] = c / s
    gamma[:, 1, 1, 0] = c / s
    return g, gamma


def frame_scales(model: ManifoldModel, coords: np.ndarray) -> np.ndarray:
    """Square roots of the diagonal metric, ``(P, n)``: ``e_i = d_i / scale_i`` is orthonormal."""
    coords = np.asarray(coords, dtype=float).reshape(-1, model.dim)
    if model.kind != "sphere":
        return np.ones_like(coords)
    out = np.empty_like(coords)
    out[:, 0] = model.radius
    out[:, 1] = model.radius * np.sin(coords[:, 0])
    return out


def sectional_curvature(model: ManifoldModel) -> float:
    return model.curvature


@dataclass(frozen=True)
class StructuredGrid:
    """Tensor-product chart grid.  ``axes`` hold the 1-D coordinates per grid axis."""

    model: ManifoldModel
    axes: tuple
    spacing: tuple
    axis_kinds: tuple  # "periodic" | "colatitude"
    equivariant: bool = False
    points: np.ndarray = field(repr=False, default=None)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def min_spacing(self) -> float:
        return float(min(self.spacing))

    def chart_points(self) -> list:
        return [ChartPoint(tuple(float(c) for c in row)) for row in self.points]


def _resolution_tuple(model: ManifoldModel, resolution, equivariant: bool) -> tuple:
    naxes = 1 if equivariant else model.dim
    if np.isscalar(resolution):
        res = (int(resolution),) * naxes
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != naxes:
        raise ConfigError(f"expected {naxes} resolution entries, got {len(res)}", field="resolution")
    for r in res:
        if r < MIN_RESOLUTION:
            raise ConfigError(
                f"resolution {r} below the minimum of {MIN_RESOLUTION} per axis", field="resolution"
            )
    return res


def grid(model: ManifoldModel, resolution, equivariant: bool = False) -> StructuredGrid:
    """Uniform periodic grid, or a colatitude grid staggered off the poles for spheres."""
    if equivariant and model.kind != "sphere":
        raise ConfigError("equivariant grids need a sphere", field="mode")
    res = _resolution_tuple(model, resolution, equivariant)
    if model.kind == "sphere":
        J = res[0]
        dtheta = math.pi / J
        theta = (np.arange(J) + 0.5) * dtheta
        if equivariant:
            pts = np.stack([theta, np.zeros_like(theta)], axis=1)
            return StructuredGrid(model, (theta,), (dtheta,), ("colatitude",), True, pts)
        K = res[1]
        if K % 2:
            raise ConfigError("longitude resolution must be even (pole-crossing stencils)", field="resolution")
        dphi = 2.0 * math.pi / K
        phi = np.arange(K) * dphi
        T, P = np.meshgrid(theta, phi, indexing="ij")
        pts = np.stack([T.ravel(), P.ravel()], axis=1)
        return StructuredGrid(model, (theta, phi), (dtheta, dphi), ("colatitude", "periodic"), False, pts)
    axes = []
    spacing = []
    for r, period in zip(res, model.chart_periods):
        h = period / r
        axes.append(np.arange(r) * h)
        spacing.append(h)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return StructuredGrid(model, tuple(axes), tuple(spacing), ("periodic",) * model.dim, False, pts)
