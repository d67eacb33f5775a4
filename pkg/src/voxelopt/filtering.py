"""Separable Gaussian smoothing with an optional per-voxel width.

A sigma argument is either a non-negative scalar (isotropic filtering) or an
array over the spatial grid (voxel-adaptive filtering). Adaptivity is on the
receiving side: the kernel used to compute ``out(x)`` is chosen by
``sigma(x)``, so a voxel with ``sigma(x) == 0`` keeps its value no matter what
its neighbours hold.

Kernels are truncated at ``ceil(3 sigma)`` and renormalized at every voxel;
samples beyond the volume are clamped to the edge. Widths below
:data:`SIGMA_FLOOR` degenerate to the identity.

With a spatially varying sigma the three 1D passes are an approximation of a
true 3D adaptive kernel; with a constant sigma they are exact.
"""

import math

import numpy as np

from ._parallel import map_chunks
from .errors import ShapeError
from .volume import check_field

SIGMA_FLOOR = 1e-3


def _check_sigma(sigma, dims):
    if np.isscalar(sigma) or np.ndim(sigma) == 0:
        s = float(sigma)
        if not math.isfinite(s) or s < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {s}")
        return s
    s = np.asarray(sigma, dtype=np.float64)
    if s.shape != tuple(dims):
        raise ShapeError(f"sigma map dims {s.shape} do not match volume dims {tuple(dims)}")
    if not np.all(np.isfinite(s)) or np.any(s < 0):
        raise ValueError("sigma map must be finite and >= 0")
    return s


def _clamped_shift(arr, t, axis):
    n = arr.shape[axis]
    idx = np.clip(np.arange(n) + t, 0, n - 1)
    return np.take(arr, idx, axis=axis)


def gaussian_1d_pass(arr, sigma, axis):
    """Smooth ``arr`` along one spatial axis.

    Parameters
    ----------
    arr : ndarray, shape (..., X, Y, Z)
        Leading axes (components, cost channels) are filtered independently.
    sigma : float or ndarray of shape (X, Y, Z)
        Gaussian width in voxels; an array makes the pass voxel-adaptive.
    axis : {0, 1, 2}
        Spatial axis (x, y, z) to filter along.
    """
    arr = np.asarray(arr, dtype=np.float64)
    dims = arr.shape[-3:]
    sigma = _check_sigma(sigma, dims)
    ax = arr.ndim - 3 + axis

    if isinstance(sigma, float):
        if sigma < SIGMA_FLOOR:
            return arr.copy()
        radius = math.ceil(3.0 * sigma)
        taps = np.arange(-radius, radius + 1)
        weights = np.exp(-taps.astype(np.float64) ** 2 / (2.0 * sigma**2))
        weights /= weights.sum()
        out = np.zeros_like(arr)
        for t, w in zip(taps, weights):
            out += w * _clamped_shift(arr, int(t), ax)
        return out

    active = sigma >= SIGMA_FLOOR
    safe = np.where(active, sigma, 1.0)
    radius = np.where(active, np.ceil(3.0 * safe), 0.0)
    rmax = int(radius.max()) if radius.size else 0
    if rmax == 0:
        return arr.copy()
    acc = np.zeros_like(arr)
    wsum = np.zeros(dims)
    for t in range(-rmax, rmax + 1):
        if t == 0:
            w = np.ones(dims)
        else:
            w = np.where(active & (abs(t) <= radius), np.exp(-(t * t) / (2.0 * safe**2)), 0.0)
        acc += w * _clamped_shift(arr, t, ax)
        wsum += w
    return acc / wsum


def smooth3d(arr, sigma):
    """Apply the x, y and z passes in sequence to an ``(..., X, Y, Z)`` array."""
    for axis in range(3):
        arr = gaussian_1d_pass(arr, sigma, axis)
    return arr


def filter_field(v, sigma):
    """Smooth each component of a displacement field ``(X, Y, Z, 3)``."""
    v = check_field(v)
    comps = np.moveaxis(np.asarray(v, dtype=np.float64), -1, 0)
    return np.moveaxis(smooth3d(comps, sigma), 0, -1)


def filter_cost(cost, sigma, workers=None):
    """Smooth every offset channel of a cost volume spatially.

    ``cost`` is a :class:`~voxelopt.costvol.CostVolume`; a new one is returned.
    Channels are independent, so they are split across worker threads.
    """
    sigma = _check_sigma(sigma, cost.dims)
    chunks = np.array_split(np.arange(cost.costs.shape[0]), max(1, min(8, cost.costs.shape[0])))
    parts = map_chunks(lambda idx: smooth3d(cost.costs[idx], sigma), chunks, workers)
    return cost.replace(np.concatenate(parts, axis=0))
