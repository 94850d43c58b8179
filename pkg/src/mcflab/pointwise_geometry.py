"""Differential geometry of a graph, evaluated point by point on the grid.

The map ``f`` is represented on a :class:`~mcflab.model_spaces.StructuredGrid`
of its domain.  From finite-difference jets we build, at every grid point,
the differential ``M`` and the covariant Hessian ``T`` of ``f`` in
orthonormal frames of both factors; everything else (singular values,
``*Omega``, the S tensor, the second fundamental form of the graph in the
adapted frames, and the terms I and II of the ``ln *Omega`` equation) is a
function of ``(M, T)`` and the two constant curvatures.

The second fundamental form of a graph ``F = (id, f)`` is the normal part of
``(0, nabla df)``: the identity factor has vanishing Hessian and the
tangential Christoffel correction of the domain is tangent to the graph.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError
from .model_spaces import ManifoldModel, MetricData, StructuredGrid, frame_scales, metric_field
from .stencils import d1_padded, d1_periodic, d2_padded, d2_periodic, pad_profile, pad_sphere_scalar

__all__ = [
    "MapState",
    "SingularData",
    "PointwiseGeometry",
    "GeometryField",
    "differential",
    "singular_decompose",
    "star_omega",
    "s_tensor",
    "second_fundamental_form",
    "evolution_terms",
    "term_I",
    "term_II",
    "frame_jets",
    "geometry_field",
    "geometry_at",
    "ln_star_omega",
    "graph_heat_operator",
    "laplace_beltrami",
]


@dataclass
class MapState:
    """A map ``f: domain -> target`` sampled on ``grid`` at ``time``.

    Full-grid states keep ``lift`` with shape ``(m, *grid.shape)``: the
    continuous branch of ``f`` minus the linear part fixed by the integer
    ``winding`` matrix (torus to torus maps only).  Equivariant states keep
    the profile ``rho(theta)`` with shape ``(J,)``; the map is
    ``(theta, phi) -> (rho(theta), phi)`` and ``pole_values`` are ``rho(0)``
    and ``rho(pi)`` used by the reflection closure.
    """

    domain: ManifoldModel
    target: ManifoldModel
    grid: StructuredGrid
    lift: np.ndarray
    winding: np.ndarray = None
    time: float = 0.0
    pole_values: tuple = (0.0, 0.0)
    _slope: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.lift = np.asarray(self.lift, dtype=float)
        if self.grid.model != self.domain:
            raise ConfigError("grid was built for a different domain", field="domain")
        if self.grid.equivariant:
            if self.domain.kind != "sphere" or self.target.kind != "sphere":
                raise ConfigError("equivariant mode requires sphere -> sphere", field="mode")
            if self.lift.shape != self.grid.shape:
                raise ConfigError(f"profile shape {self.lift.shape} != grid {self.grid.shape}", field="values")
            if self.winding is not None:
                raise ConfigError("winding is only defined for torus targets", field="winding")
            return
        if self.target.kind == "sphere":
            raise ConfigError("sphere targets are only supported in equivariant mode", field="target")
        expected = (self.target.dim,) + self.grid.shape
        if self.lift.shape != expected:
            raise ConfigError(f"lift shape {self.lift.shape} != {expected}", field="values")
        n, m = self.domain.dim, self.target.dim
        if self.winding is None:
            self.winding = np.zeros((m, n), dtype=np.int64)
        self.winding = np.asarray(self.winding)
        if self.winding.shape != (m, n):
            raise ConfigError(f"winding must be {m}x{n}", field="winding")
        if np.any(self.winding != np.round(self.winding)):
            raise ConfigError("winding entries must be integers", field="winding")
        self.winding = self.winding.astype(np.int64)
        if self.domain.kind == "sphere" and np.any(self.winding):
            raise ConfigError("maps from the sphere carry no winding", field="winding")
        slope = np.zeros((m, n))
        if self.domain.kind != "sphere":
            Lt = self.target.chart_periods
            Pd = self.domain.chart_periods
            for a in range(m):
                for i in range(n):
                    slope[a, i] = self.winding[a, i] * Lt[a] / Pd[i]
        self._slope = slope

    @property
    def mode(self) -> str:
        return "equivariant" if self.grid.equivariant else "full"

    @property
    def n(self) -> int:
        return self.domain.dim

    @property
    def m(self) -> int:
        return self.target.dim

    @property
    def slope(self) -> np.ndarray:
        return self._slope

    def lifted(self) -> np.ndarray:
        """Continuous branch of ``f`` in target chart coordinates."""
        if self.mode == "equivariant":
            return self.lift.copy()
        out = self.lift.copy()
        if np.any(self._slope):
            mesh = np.meshgrid(*self.grid.axes, indexing="ij")
            for a in range(self.m):
                for i in range(self.n):
                    out[a] += self._slope[a, i] * mesh[i]
        return out

    @property
    def values(self) -> np.ndarray:
        """One target chart tuple per grid point, torus targets reduced mod period."""
        if self.mode == "equivariant":
            return self.lift.reshape(-1, 1).copy()
        vals = self.lifted().reshape(self.m, -1).T.copy()
        for a, L in enumerate(self.target.chart_periods):
            vals[:, a] = np.mod(vals[:, a], L)
        return vals

    def evolve(self, lift, time) -> "MapState":
        return replace(self, lift=np.asarray(lift, dtype=float), time=float(time))


# ------------------------------------------------------------------ jets


def _full_jets(state: MapState):
    """Chart first and second derivatives of the lift: ``(m, n, *s)``, ``(m, n, n, *s)``."""
    u = state.lift
    grid = state.grid
    m, n = state.m, state.n
    shape = grid.shape
    J = np.empty((m, n) + shape)
    Hs = np.empty((m, n, n) + shape)
    if state.domain.kind == "sphere":
        dth, dph = grid.spacing
        up = pad_sphere_scalar(u, 1, 2)
        J[:, 0] = d1_padded(up, dth, 1)
        J[:, 1] = d1_periodic(u, dph, 2)
        Hs[:, 0, 0] = d2_padded(up, dth, 1)
        Hs[:, 1, 1] = d2_periodic(u, dph, 2)
        mixed = d1_padded(pad_sphere_scalar(J[:, 1], 1, 2), dth, 1)
        Hs[:, 0, 1] = mixed
        Hs[:, 1, 0] = mixed
    else:
        for i in range(n):
            J[:, i] = d1_periodic(u, grid.spacing[i], i + 1)
            Hs[:, i, i] = d2_periodic(u, grid.spacing[i], i + 1)
        for i in range(n):
            for j in range(i + 1, n):
                mixed = d1_periodic(J[:, i], grid.spacing[j], j + 1)
                Hs[:, i, j] = mixed
                Hs[:, j, i] = mixed
    J += state.slope.reshape((m, n) + (1,) * len(shape))
    return J, Hs


def _profile_jets(state: MapState):
    north = (-1.0, state.pole_values[0])
    south = (-1.0, state.pole_values[1])
    up = pad_profile(state.lift, north, south)
    dth = state.grid.spacing[0]
    return state.lift, d1_padded(up, dth, 0), d2_padded(up, dth, 0)


def _equivariant_frames(state: MapState, rho, d1, d2):
    r1 = state.domain.radius
    r2 = state.target.radius
    theta = state.grid.axes[0]
    st, ct = np.sin(theta), np.cos(theta)
    sr, cr = np.sin(rho), np.cos(rho)
    P = theta.size
    M = np.zeros((P, 2, 2))
    M[:, 0, 0] = r2 * d1 / r1
    M[:, 1, 1] = r2 * sr / (r1 * st)
    T = np.zeros((P, 2, 2, 2))
    T[:, 0, 0, 0] = r2 * d2 / r1**2
    T[:, 0, 1, 1] = r2 * (st * ct * d1 - sr * cr) / (r1**2 * st * st)
    mixed = r2 * (cr * d1 - sr * ct / st) / (r1**2 * st)
    T[:, 1, 0, 1] = mixed
    T[:, 1, 1, 0] = mixed
    return M, T


def frame_jets(state: MapState):
    """Differential ``M (P, m, n)`` and covariant Hessian ``T (P, m, n, n)`` in orthonormal frames."""
    if state.mode == "equivariant":
        return _equivariant_frames(state, *_profile_jets(state))
    m, n = state.m, state.n
    J, Hs = _full_jets(state)
    P = state.grid.size
    J = J.reshape(m, n, P).transpose(2, 0, 1)
    Hs = Hs.reshape(m, n, n, P).transpose(3, 0, 1, 2)
    if state.domain.kind == "sphere":
        _, gam = metric_field(state.domain, state.grid.points)
        Hs = Hs - np.einsum("pkij,pck->pcij", gam, J)
    s = frame_scales(state.domain, state.grid.points)
    M = J / s[:, None, :]
    T = Hs / (s[:, None, :, None] * s[:, None, None, :])
    return np.ascontiguousarray(M), np.ascontiguousarray(T)


def differential(state: MapState, point_index=None):
    """Chart differential ``df[i, alpha] = d_i f^alpha`` (``n x m``), at one point or all."""
    if state.mode == "equivariant":
        _, d1, _ = _profile_jets(state)
        D = np.zeros((d1.size, 2, 2))
        D[:, 0, 0] = d1
        D[:, 1, 1] = 1.0
    else:
        J, _ = _full_jets(state)
        D = J.reshape(state.m, state.n, -1).transpose(2, 1, 0)
    return D if point_index is None else D[point_index]


# ------------------------------------------------------ single-point algebra


@dataclass
class SingularData:
    lam: np.ndarray
    domain_frame: np.ndarray  # columns a_i, chart components
    target_frame: np.ndarray  # columns a_{n+q}, chart components
    rank: int


def _as_matrix(x):
    return x.g if isinstance(x, MetricData) else np.asarray(x, dtype=float)


def singular_decompose(df, g, h) -> SingularData:
    """SVD of the differential between orthonormal frames of ``g`` and ``h``.

    ``df`` is the ``n x m`` chart matrix ``d_i f^alpha``.  Singular values are
    sorted descending and zero-padded to length ``n``; the first component
    above ``1e-12`` of each domain vector is made positive.
    """
    df = np.atleast_2d(np.asarray(df, dtype=float))
    G = _as_matrix(g)
    Hm = _as_matrix(h)
    n, m = df.shape
    if np.any(np.linalg.eigvalsh(G) <= 0) or np.any(np.linalg.eigvalsh(Hm) <= 0):
        raise DomainError("metrics must be positive definite")
    Lg = np.linalg.cholesky(G)
    Lh = np.linalg.cholesky(Hm)
    Eg = np.linalg.inv(Lg).T  # columns: g-orthonormal basis in chart components
    Eh = np.linalg.inv(Lh).T
    M = Lh.T @ df.T @ Eg
    U, S, Vh = np.linalg.svd(M[None], full_matrices=True)
    U, V = kernels._sign_fix_numpy(U, S, Vh)
    lam = np.zeros(n)
    k = S.shape[1]
    lam[:k] = np.where(S[0] < kernels.RANK_TOL, 0.0, S[0])
    return SingularData(lam, Eg @ V[0], Eh @ U[0], int(np.count_nonzero(lam)))


def star_omega(lam):
    """``(*Omega, det_ratio)`` with ``det_ratio = prod(1 + lambda_i^2)``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("singular values are nonnegative")
    det = np.prod(1.0 + lam * lam, axis=-1)
    return 1.0 / np.sqrt(det), det


def s_tensor(lam):
    """Diagonals of the blocks B and D of S in adapted frames, and the least pairwise sum.

    The pairwise sums ``B_i + B_j`` are the eigenvalues of ``S^[2]`` on
    tangent 2-vectors; for ``n = 1`` there are no pairs and ``+inf`` is returned.
    """
    lam = np.asarray(lam, dtype=float)
    l2 = lam * lam
    B = (1.0 - l2) / (1.0 + l2)
    D = -2.0 * lam / (1.0 + l2)
    n = lam.shape[-1]
    if n < 2:
        return B, D, np.full(lam.shape[:-1], np.inf)
    iu, ju = np.triu_indices(n, 1)
    s2 = (B[..., iu] + B[..., ju]).min(axis=-1)
    return B, D, s2


def term_I(lam, sff):
    """Second fundamental form terms of the ``ln *Omega`` equation.

    ``lam``: ``(..., n)``; ``sff[..., q, i, j] = h^{n+q}_{ij}`` with shape
    ``(..., m, n, n)``.
    """
    lam = np.asarray(lam, dtype=float)
    sff = np.asarray(sff, dtype=float)
    n = lam.shape[-1]
    m = sff.shape[-3]
    k = min(n, m)
    A2 = np.sum(sff * sff, axis=(-3, -2, -1))
    out = A2.copy()
    for i in range(k):
        out = out + lam[..., i] ** 2 * np.sum(sff[..., i, i, :] ** 2, axis=-1)
        for j in range(i + 1, k):
            out = out + 2.0 * lam[..., i] * lam[..., j] * np.sum(sff[..., j, i, :] * sff[..., i, j, :], axis=-1)
    return out


def term_II(lam, k_dom, k_tar):
    """Curvature terms of the ``ln *Omega`` equation for constant sectional curvatures."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    l2 = lam * lam
    out = np.zeros(lam.shape[:-1])
    for i in range(n):
        for k in range(n):
            if k == i:
                continue
            out = out + (l2[..., i] * k_dom - l2[..., i] * l2[..., k] * k_tar) / (
                (1.0 + l2[..., i]) * (1.0 + l2[..., k])
            )
    return out


def evolution_terms(pg, k_dom, k_tar):
    """``(term_I, term_II)`` for a populated :class:`PointwiseGeometry`."""
    return term_I(pg.singular.lam, pg.sff), term_II(pg.singular.lam, k_dom, k_tar)


# ---------------------------------------------------------------- grid fields


@dataclass
class GeometryField:
    """Per-point geometry over a whole grid; arrays are indexed by flat point index."""

    lam: np.ndarray
    star_omega: np.ndarray
    det_ratio: np.ndarray
    B: np.ndarray
    D: np.ndarray
    s2_min: np.ndarray
    max_pair: np.ndarray
    sff: np.ndarray
    A2: np.ndarray
    H: np.ndarray
    term_I: np.ndarray
    term_II: np.ndarray
    V: np.ndarray
    U: np.ndarray
    M: np.ndarray
    T: np.ndarray


def geometry_field(state: MapState, k_dom=None, k_tar=None) -> GeometryField:
    k_dom = state.domain.curvature if k_dom is None else k_dom
    k_tar = state.target.curvature if k_tar is None else k_tar
    M, T = frame_jets(state)
    out = kernels.geometry(M, T, k_dom, k_tar)
    return GeometryField(M=M, T=T, **out)


@dataclass
class PointwiseGeometry:
    singular: SingularData
    star_omega: float
    det_ratio: float
    s_block_B: np.ndarray
    s_block_D: np.ndarray
    s2_min_eig: float
    sff: np.ndarray
    A2: float
    mean_curvature: np.ndarray
    term_I: float
    term_II: float


def _target_scales(state: MapState) -> np.ndarray:
    if state.mode == "equivariant":
        r2 = state.target.radius
        rho = state.lift
        return np.stack([np.full_like(rho, r2), r2 * np.sin(rho)], axis=1)
    return np.ones((state.grid.size, state.m))


def geometry_at(state: MapState, point_index: int, gf: GeometryField = None) -> PointwiseGeometry:
    """Geometry at one grid point; frames are returned in chart components."""
    gf = geometry_field(state) if gf is None else gf
    p = point_index
    s_dom = frame_scales(state.domain, state.grid.points[p:p + 1])[0]
    s_tar = _target_scales(state)[p]
    with np.errstate(divide="ignore", invalid="ignore"):
        target_frame = gf.U[p] / s_tar[:, None]
    sd = SingularData(
        lam=gf.lam[p].copy(),
        domain_frame=gf.V[p] / s_dom[:, None],
        target_frame=target_frame,
        rank=int(np.count_nonzero(gf.lam[p])),
    )
    r = sd.rank
    return PointwiseGeometry(
        singular=sd,
        star_omega=float(gf.star_omega[p]),
        det_ratio=float(gf.det_ratio[p]),
        s_block_B=gf.B[p, :r].copy(),
        s_block_D=gf.D[p, :r].copy(),
        s2_min_eig=float(gf.s2_min[p]),
        sff=gf.sff[p].copy(),
        A2=float(gf.A2[p]),
        mean_curvature=gf.H[p].copy(),
        term_I=float(gf.term_I[p]),
        term_II=float(gf.term_II[p]),
    )


def second_fundamental_form(state: MapState, point_index=None):
    """``(sff, A2, H)`` at one point or over the grid."""
    gf = geometry_field(state)
    if point_index is None:
        return gf.sff, gf.A2, gf.H
    return gf.sff[point_index], float(gf.A2[point_index]), gf.H[point_index]


def ln_star_omega(state: MapState) -> np.ndarray:
    """``ln *Omega`` over the grid (flat point order), from the differential alone."""
    M, _ = frame_jets(state)
    return -0.5 * np.log(kernels.det_ratio(M))


# ------------------------------------------------------ scalar operators


def _scalar_covariant_hessian(state: MapState, u):
    """Orthonormal-frame Hessian ``(P, 1, n, n)`` of a scalar field given in flat point order."""
    grid = state.grid
    P = grid.size
    n = state.n
    if state.mode == "equivariant":
        r1 = state.domain.radius
        theta = grid.axes[0]
        up = pad_profile(u, (1.0, 0.0), (1.0, 0.0))
        d1 = d1_padded(up, grid.spacing[0], 0)
        d2 = d2_padded(up, grid.spacing[0], 0)
        out = np.zeros((P, 1, 2, 2))
        out[:, 0, 0, 0] = d2 / r1**2
        out[:, 0, 1, 1] = np.cos(theta) * d1 / (r1**2 * np.sin(theta))
        return out
    uf = u.reshape(grid.shape)
    du = np.empty((n,) + grid.shape)
    d2u = np.empty((n, n) + grid.shape)
    if state.domain.kind == "sphere":
        dth, dph = grid.spacing
        up = pad_sphere_scalar(uf, 0, 1)
        du[0] = d1_padded(up, dth, 0)
        du[1] = d1_periodic(uf, dph, 1)
        d2u[0, 0] = d2_padded(up, dth, 0)
        d2u[1, 1] = d2_periodic(uf, dph, 1)
        d2u[0, 1] = d2u[1, 0] = d1_padded(pad_sphere_scalar(du[1], 0, 1), dth, 0)
    else:
        for i in range(n):
            du[i] = d1_periodic(uf, grid.spacing[i], i)
            d2u[i, i] = d2_periodic(uf, grid.spacing[i], i)
        for i in range(n):
            for j in range(i + 1, n):
                d2u[i, j] = d2u[j, i] = d1_periodic(du[i], grid.spacing[j], j)
    du = du.reshape(n, P).T
    d2u = d2u.reshape(n, n, P).transpose(2, 0, 1)
    if state.domain.kind == "sphere":
        _, gam = metric_field(state.domain, grid.points)
        d2u = d2u - np.einsum("pkij,pk->pij", gam, du)
    s = frame_scales(state.domain, grid.points)
    return (d2u / (s[:, :, None] * s[:, None, :]))[:, None]


def graph_heat_operator(state: MapState, u, M=None) -> np.ndarray:
    """``gt^{ij} (d_ij u - Gamma(N1)^k_ij d_k u)`` for a scalar ``u`` on the grid.

    ``gt = g + f^* h`` is the induced metric.  This is the Laplace-Beltrami
    operator of the graph plus the transport along the tangential velocity
    that keeps the flow parametrised over the domain, i.e. the heat operator
    seen by a quantity sampled at fixed domain points.
    """
    if M is None:
        M, _ = frame_jets(state)
    Tu = _scalar_covariant_hessian(state, np.asarray(u, dtype=float).ravel())
    return kernels.graph_trace(M, Tu)[:, 0]


def laplace_beltrami(state: MapState, u) -> np.ndarray:
    """Divergence-form Laplace-Beltrami operator of the induced metric (flat-domain grids).

    ``(1/sqrt det gt) d_i (sqrt det gt  gt^{ij} d_j u)`` with the periodic
    4th-order stencils of the stepper.
    """
    if state.mode != "full" or state.domain.kind == "sphere":
        raise DomainError("divergence-form Laplacian is implemented for flat periodic domains only")
    grid = state.grid
    n, m = state.n, state.m
    J, _ = _full_jets(state)
    Jf = J.reshape(m, n, -1)
    gt = np.eye(n)[:, :, None] + np.einsum("aip,ajp->ijp", Jf, Jf)
    gt_inv = np.linalg.inv(gt.transpose(2, 0, 1)).transpose(1, 2, 0)
    sq = np.sqrt(np.linalg.det(gt.transpose(2, 0, 1)))
    uf = np.asarray(u, dtype=float).reshape(grid.shape)
    du = np.stack([d1_periodic(uf, grid.spacing[i], i).ravel() for i in range(n)])
    flux = sq[None] * np.einsum("ijp,jp->ip", gt_inv, du)
    div = np.zeros(grid.size)
    for i in range(n):
        div += d1_periodic(flux[i].reshape(grid.shape), grid.spacing[i], i).ravel()
    return div / sq
