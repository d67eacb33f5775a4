"""Dense 3D grids: trilinear sampling, warping, resampling and field composition.

Array conventions used throughout the package:

* spatial axes are ``(x, y, z)``, i.e. ``vol[x, y, z]``;
* multi-channel volumes (features) carry channels last, ``(X, Y, Z, C)``;
* displacement fields are ``(X, Y, Z, 3)`` with component 0 along x, in
  voxel units of the field's own grid. The identity grid is never stored.

All boundary handling is replicate-clamp: coordinates outside ``[0, n - 1]``
are clamped to the nearest edge voxel.
"""

import math

import numpy as np

from .errors import ShapeError


def as_channels(vol):
    """Return ``vol`` as an ``(X, Y, Z, C)`` float array (adds C=1 for scalars)."""
    vol = np.asarray(vol)
    if vol.ndim == 3:
        vol = vol[..., None]
    if vol.ndim != 4:
        raise ShapeError(f"expected a 3D or 4D array, got shape {vol.shape}")
    return vol


def check_field(u, dims=None):
    u = np.asarray(u)
    if u.ndim != 4 or u.shape[-1] != 3:
        raise ShapeError(f"displacement field must have shape (X, Y, Z, 3), got {u.shape}")
    if dims is not None and tuple(u.shape[:3]) != tuple(dims):
        raise ShapeError(f"field dims {u.shape[:3]} do not match volume dims {tuple(dims)}")
    return u


def identity_grid(dims):
    """Voxel coordinates of every lattice node, shape ``dims + (3,)``."""
    axes = [np.arange(n, dtype=np.float64) for n in dims]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _axis_bracket(p, n):
    # lower index, upper index and fractional weight along one axis, clamped
    p = np.clip(p, 0.0, n - 1)
    if n == 1:
        i0 = np.zeros(p.shape, dtype=np.intp)
        return i0, i0, np.zeros(p.shape)
    i0 = np.minimum(np.floor(p).astype(np.intp), n - 2)
    return i0, i0 + 1, p - i0


def sample(vol, points):
    """Trilinearly interpolate ``vol`` at voxel coordinates ``points``.

    Parameters
    ----------
    vol : ndarray, shape (X, Y, Z) or (X, Y, Z, C)
    points : array_like, shape (..., 3)
        Coordinates in voxel units; out-of-range values are clamped.

    Returns
    -------
    ndarray of shape ``points.shape[:-1]`` (scalar volume) or
    ``points.shape[:-1] + (C,)``.
    """
    vol = np.asarray(vol)
    points = np.asarray(points, dtype=np.float64)
    x0, x1, tx = _axis_bracket(points[..., 0], vol.shape[0])
    y0, y1, ty = _axis_bracket(points[..., 1], vol.shape[1])
    z0, z1, tz = _axis_bracket(points[..., 2], vol.shape[2])
    if vol.ndim == 4:
        tx, ty, tz = tx[..., None], ty[..., None], tz[..., None]
    sx, sy, sz = 1.0 - tx, 1.0 - ty, 1.0 - tz
    out = (vol[x0, y0, z0] * (sx * sy * sz)
           + vol[x1, y0, z0] * (tx * sy * sz)
           + vol[x0, y1, z0] * (sx * ty * sz)
           + vol[x1, y1, z0] * (tx * ty * sz)
           + vol[x0, y0, z1] * (sx * sy * tz)
           + vol[x1, y0, z1] * (tx * sy * tz)
           + vol[x0, y1, z1] * (sx * ty * tz)
           + vol[x1, y1, z1] * (tx * ty * tz))
    return out


def trilinear_sample(vol, point):
    """Interpolate a single point; returns one value per channel."""
    return sample(as_channels(vol), np.asarray(point, dtype=np.float64))


def warp(m, u):
    """Resample ``m`` at ``x + u(x)`` for every voxel ``x``."""
    m = np.asarray(m)
    u = check_field(u, m.shape[:3])
    return sample(m, identity_grid(m.shape[:3]) + u)


def warp_nearest(m, u):
    """Nearest-neighbour warp, for categorical volumes such as label maps."""
    m = np.asarray(m)
    u = check_field(u, m.shape[:3])
    pts = np.rint(identity_grid(m.shape[:3]) + u).astype(np.intp)
    idx = [np.clip(pts[..., a], 0, m.shape[a] - 1) for a in range(3)]
    return m[idx[0], idx[1], idx[2]]


def downsample2(f):
    """Halve every axis by trilinear decimation, no pre-blur.

    Output voxel ``j`` reads input coordinate ``2 j + 0.5`` and the output has
    ``ceil(n / 2)`` voxels per axis.
    """
    f = np.asarray(f)
    if min(f.shape[:3]) < 2:
        raise ShapeError(f"cannot downsample an axis shorter than 2 voxels: {f.shape[:3]}")
    dims = tuple(math.ceil(n / 2) for n in f.shape[:3])
    pts = 2.0 * identity_grid(dims) + 0.5
    return sample(f, pts)


def downsample_spacing(spacing):
    return tuple(2.0 * s for s in spacing)


def upsample_field2(u, target):
    """Upsample a displacement field onto a grid roughly twice as fine.

    Each component is interpolated at the coarse coordinate ``(i - 0.5) / 2``
    (the inverse of :func:`downsample2`'s sampling rule) and the vectors are
    doubled, since displacements are measured in voxels of their own grid.
    """
    u = check_field(u)
    target = tuple(int(t) for t in target)
    for n, t in zip(u.shape[:3], target):
        if not 2 * n - 2 <= t <= 2 * n:
            raise ShapeError(f"target dims {target} not reachable by 2x upsampling of {u.shape[:3]}")
    pts = (identity_grid(target) - 0.5) / 2.0
    return 2.0 * sample(u, pts)


def compose(u_res, u_prev):
    """Single field equivalent to warping by ``u_prev`` and then by ``u_res``.

    ``out(x) = u_res(x) + u_prev(x + u_res(x))`` so that
    ``warp(warp(m, u_prev), u_res) ~= warp(m, compose(u_res, u_prev))``.
    """
    u_res = check_field(u_res)
    u_prev = check_field(u_prev, u_res.shape[:3])
    return u_res + sample(u_prev, identity_grid(u_res.shape[:3]) + u_res)
