"""Coarse-to-fine registration driver."""

import time
from dataclasses import dataclass, field

import numpy as np

from .config import RegistrationConfig
from .diffeo import scaling_squaring
from .errors import ShapeError
from .optimizer import solve_level_with_maps
from .volume import as_channels, compose, downsample2, upsample_field2, warp

MIN_LEVEL_SIZE = 3


def build_pyramid(feat, levels):
    """``[feat, down(feat), down(down(feat)), ...]``, fine to coarse, ``levels`` long."""
    feat = np.asarray(feat)
    if int(levels) != levels or levels < 1:
        raise ValueError(f"levels must be a positive integer, got {levels}")
    pyr = [feat]
    for _ in range(int(levels) - 1):
        if min(pyr[-1].shape[:3]) < 2 * MIN_LEVEL_SIZE - 1:
            raise ShapeError(
                f"{levels} levels are too many for a {feat.shape[:3]} grid: "
                f"the coarsest level would have an axis below {MIN_LEVEL_SIZE} voxels")
        pyr.append(downsample2(pyr[-1]))
    if min(pyr[-1].shape[:3]) < MIN_LEVEL_SIZE:
        raise ShapeError(f"grid {feat.shape[:3]} is below {MIN_LEVEL_SIZE} voxels on some axis")
    return pyr


@dataclass
class LevelRecord:
    dims: tuple
    velocity: np.ndarray
    entropy: np.ndarray
    sigma: np.ndarray


@dataclass
class RegistrationResult:
    field: np.ndarray
    levels: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)


def register(f, m, cfg=RegistrationConfig(), keep_levels=False, workers=None):
    """Displacement field ``u`` with ``warp(m, u) ~= f``.

    Features are pyramided once. From the coarsest grid up, the accumulated
    field is upsampled, the moving features are warped by it, a residual is
    solved on the level, exponentiated as a stationary velocity, and composed
    after the accumulated field.
    """
    f = as_channels(f).astype(np.float64, copy=False)
    m = as_channels(m).astype(np.float64, copy=False)
    if f.shape != m.shape:
        raise ShapeError(f"fixed features {f.shape} and moving features {m.shape} differ")
    timings = {"pyramid": 0.0, "solve": 0.0, "exponentiate": 0.0, "warp_compose": 0.0}
    t0 = time.perf_counter()
    fpyr = build_pyramid(f, cfg.levels)
    mpyr = build_pyramid(m, cfg.levels)
    timings["pyramid"] += time.perf_counter() - t0

    records = []
    acc = None
    for fl, ml in zip(reversed(fpyr), reversed(mpyr)):
        dims = fl.shape[:3]
        t0 = time.perf_counter()
        if acc is None:
            acc = np.zeros(dims + (3,))
            mw = ml
        else:
            acc = upsample_field2(acc, dims)
            mw = warp(ml, acc)
        t1 = time.perf_counter()
        out = solve_level_with_maps(fl, mw, cfg.level, workers)
        t2 = time.perf_counter()
        phi = scaling_squaring(out.field, cfg.integration_steps)
        t3 = time.perf_counter()
        acc = compose(phi, acc)
        t4 = time.perf_counter()
        timings["warp_compose"] += (t1 - t0) + (t4 - t3)
        timings["solve"] += t2 - t1
        timings["exponentiate"] += t3 - t2
        if keep_levels:
            records.append(LevelRecord(tuple(dims), out.field, out.entropy, out.sigma))
    timings["total"] = sum(timings.values())
    return RegistrationResult(acc, records[::-1], timings)
