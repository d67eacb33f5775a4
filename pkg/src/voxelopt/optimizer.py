"""Single-level coordinate descent on the relaxed discrete energy.

The energy couples a discrete per-voxel field ``v`` (restricted to lattice
offsets) with a smooth field ``u`` through ``||v - u||^2 / (2 theta)``.
Each iteration solves the ``v`` problem exactly by an argmin over the offset
lattice and approximates the ``u`` problem by (adaptive) Gaussian smoothing
of ``v``. Decreasing ``theta`` tightens the coupling until ``v ~= u``.
"""

from dataclasses import dataclass

import numpy as np

from .config import LevelSolverConfig
from .costvol import build_cost, lattice_offsets
from .entropy import entropy_map, sigma_map
from .errors import ShapeError
from .filtering import filter_cost, filter_field
from .volume import check_field


def _search_order(k):
    # candidates sorted by |o|^2, then lattice order; strict "<" keeps the first hit
    offsets = lattice_offsets(k)
    return np.argsort((offsets**2).sum(axis=1), kind="stable")


def v_objective(cost, u, v, theta):
    """Per-voxel value of ``C(x, v(x)) + ||v(x) - u(x)||^2 / (2 theta)``."""
    k = cost.k
    n = 2 * k + 1
    vi = np.rint(v).astype(np.intp) + k
    idx = (vi[..., 2] * n + vi[..., 1]) * n + vi[..., 0]
    c = np.take_along_axis(cost.costs, idx[None], axis=0)[0]
    return c + ((v - u) ** 2).sum(axis=-1) / (2.0 * theta)


def v_step(cost, u, theta):
    """Exact discrete minimiser of the coupled cost at every voxel.

    Returns an integer-valued field (stored as float) with components in
    ``[-k, k]``. Ties go to the offset with the smallest norm, then to the
    earliest offset in lattice order.
    """
    u = check_field(u, cost.dims)
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    offsets = lattice_offsets(cost.k)
    inv = 1.0 / (2.0 * theta)
    ux, uy, uz = (np.ascontiguousarray(u[..., a], dtype=np.float64) for a in range(3))
    best = np.full(cost.dims, np.inf)
    arg = np.zeros(cost.dims, dtype=np.intp)
    for i in _search_order(cost.k):
        ox, oy, oz = offsets[i]
        obj = cost.costs[i] + ((ox - ux) ** 2 + (oy - uy) ** 2 + (oz - uz) ** 2) * inv
        better = obj < best
        best[better] = obj[better]
        arg[better] = i
    return offsets[arg].astype(np.float64)


def u_step(v, sigma, adaptive=True, isotropic_sigma=None):
    """Smooth the discrete field; ``sigma`` is the per-voxel map when ``adaptive``."""
    if adaptive:
        return filter_field(v, sigma)
    if isotropic_sigma is None:
        raise ValueError("isotropic_sigma is required when adaptive is off")
    return filter_field(v, float(isotropic_sigma))


@dataclass
class LevelOutput:
    field: np.ndarray
    entropy: np.ndarray
    sigma: np.ndarray


def solve_level_with_maps(f, m_warped, cfg=LevelSolverConfig(), workers=None):
    """Like :func:`solve_level`, also returning the entropy and sigma maps."""
    f = np.asarray(f)
    m_warped = np.asarray(m_warped)
    if f.shape != m_warped.shape:
        raise ShapeError(f"fixed {f.shape} and warped moving {m_warped.shape} differ")
    cost = build_cost(f, m_warped, cfg.k)
    entropy = entropy_map(cost, cfg.beta)
    sigma = sigma_map(entropy, cfg.alpha)
    smoothing = sigma if cfg.adaptive else cfg.isotropic_sigma
    if cfg.prefilter:
        cost = filter_cost(cost, smoothing, workers)
    u = np.zeros(cost.dims + (3,))
    for theta in cfg.thetas:
        v = v_step(cost, u, theta)
        u = filter_field(v, smoothing)
    return LevelOutput(u, entropy, sigma)


def solve_level(f, m_warped, cfg=LevelSolverConfig(), workers=None):
    """Residual displacement aligning ``m_warped`` to ``f`` on one grid.

    Builds the cost volume, derives the entropy-driven sigma map, optionally
    pre-filters the costs with it, then alternates the ``v`` and ``u`` steps
    over the theta schedule starting from ``u = 0``.
    """
    return solve_level_with_maps(f, m_warped, cfg, workers).field
