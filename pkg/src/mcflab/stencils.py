"""Finite-difference stencils on periodic and staggered-colatitude axes.

Periodic axes use 4th-order centred differences.  The colatitude axis uses
2nd-order centred differences on an array padded with one ghost layer per
pole; how the ghosts are filled depends on what the field is (see
:func:`pad_sphere_scalar` and :func:`pad_profile`).
"""
import numpy as np

__all__ = [
    "d1_periodic",
    "d2_periodic",
    "d1_padded",
    "d2_padded",
    "pad_sphere_scalar",
    "pad_profile",
]


def d1_periodic(u, h, axis):
    """4th-order centred first derivative along a periodic axis."""
    p1 = np.roll(u, -1, axis)
    m1 = np.roll(u, 1, axis)
    p2 = np.roll(u, -2, axis)
    m2 = np.roll(u, 2, axis)
    return (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)


def d2_periodic(u, h, axis):
    """4th-order centred second derivative along a periodic axis."""
    p1 = np.roll(u, -1, axis)
    m1 = np.roll(u, 1, axis)
    p2 = np.roll(u, -2, axis)
    m2 = np.roll(u, 2, axis)
    return (16.0 * (p1 + m1) - (p2 + m2) - 30.0 * u) / (12.0 * h * h)


def _shift(a, axis, start, stop):
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    return a[tuple(idx)]


def d1_padded(up, h, axis):
    """2nd-order centred first derivative of a ghost-padded array (interior returned)."""
    n = up.shape[axis]
    return (_shift(up, axis, 2, n) - _shift(up, axis, 0, n - 2)) / (2.0 * h)


def d2_padded(up, h, axis):
    n = up.shape[axis]
    return (_shift(up, axis, 2, n) - 2.0 * _shift(up, axis, 1, n - 1) + _shift(up, axis, 0, n - 2)) / (h * h)


def pad_sphere_scalar(u, theta_axis, phi_axis):
    """Ghost rows across the poles for a scalar field on the sphere grid.

    A point at colatitude ``-theta`` and longitude ``phi`` is the point
    ``(theta, phi + pi)``, so the ghost row is the edge row rotated by half
    a turn in longitude.  The longitude count must be even.
    """
    K = u.shape[phi_axis]
    first = np.roll(_shift(u, theta_axis, 0, 1), K // 2, axis=phi_axis)
    last = np.roll(_shift(u, theta_axis, -1, None), K // 2, axis=phi_axis)
    return np.concatenate([first, u, last], axis=theta_axis)


def pad_profile(u, north=(-1.0, 0.0), south=(-1.0, 0.0)):
    """Pad a 1-D colatitude profile with reflected ghosts.

    Each pole rule is ``(parity, pole_value)``: the ghost is
    ``pole_value + parity * (u_edge - pole_value)``.  Odd reflection about
    ``rho = 0`` is ``(-1, 0)``; a scalar function of colatitude alone is even,
    ``(+1, 0)``.
    """
    pn, cn = north
    ps, cs = south
    g0 = cn + pn * (u[..., :1] - cn)
    g1 = cs + ps * (u[..., -1:] - cs)
    return np.concatenate([g0, u, g1], axis=-1)
