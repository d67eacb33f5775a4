"""Synthetic registration pairs with known ground-truth fields.

Every pair satisfies ``fixed(x) = moving(x + truth(x))``, the convention of
:func:`voxelopt.pyramid.register`. Both images are cut from one larger
texture so the fixed image needs no boundary extrapolation.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .diffeo import scaling_squaring
from .volume import identity_grid, sample

TEXTURE_SCALES = (1.0, 2.0, 4.0, 8.0)


def texture(dims, rng, scales=TEXTURE_SCALES):
    """Multi-scale smoothed noise in ``[0, 1]``; structure at every pyramid level."""
    out = np.zeros(dims)
    for s in scales:
        layer = gaussian_filter(rng.standard_normal(dims), s, mode="reflect")
        out += layer / layer.std()
    return (out - out.min()) / (out.max() - out.min())


def smooth_velocity(dims, rng, sigma=8.0):
    v = np.stack([gaussian_filter(rng.standard_normal(dims), sigma, mode="reflect")
                  for _ in range(3)], axis=-1)
    return v / np.abs(v).max()


def smooth_displacement(dims, magnitude, rng, sigma=8.0, steps=7):
    """Diffeomorphic displacement (exponentiated velocity) with max component ``magnitude``."""
    v = smooth_velocity(dims, rng, sigma) * magnitude
    u = scaling_squaring(v, steps)
    for _ in range(3):
        v *= magnitude / np.abs(u).max()
        u = scaling_squaring(v, steps)
    return u


@dataclass
class SyntheticPair:
    fixed: np.ndarray
    moving: np.ndarray
    truth: np.ndarray
    fixed_labels: np.ndarray
    moving_labels: np.ndarray
    seed: int
    kind: str
    magnitude: float


LABEL_LEVELS = (0.35, 0.5, 0.65)


def _labels(img):
    return np.digitize(img, LABEL_LEVELS).astype(np.int16)


def make_pair(dims=(64, 64, 64), kind="translation", magnitude=8.0, seed=0,
              axis=0, sigma=8.0):
    """Build a fixed/moving pair related by a known field.

    ``kind="translation"`` shifts by ``magnitude`` voxels along ``axis``;
    ``kind="smooth"`` uses a random diffeomorphic field whose largest
    component is ``magnitude`` voxels.
    """
    dims = tuple(int(n) for n in dims)
    rng = np.random.default_rng(seed)
    margin = int(math.ceil(abs(magnitude))) + 2
    big = tuple(n + 2 * margin for n in dims)
    tex = texture(big, rng)
    if kind == "translation":
        truth = np.zeros(dims + (3,))
        truth[..., axis] = magnitude
    elif kind == "smooth":
        truth = smooth_displacement(dims, magnitude, rng, sigma)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    pts = identity_grid(dims) + margin
    crop = (slice(margin, margin + dims[0]), slice(margin, margin + dims[1]),
            slice(margin, margin + dims[2]))
    moving = tex[crop].copy()
    fixed = sample(tex, pts + truth)
    big_labels = _labels(tex)
    near = np.rint(pts + truth).astype(np.intp)
    fixed_labels = big_labels[near[..., 0], near[..., 1], near[..., 2]]
    return SyntheticPair(fixed, moving, truth, fixed_labels, big_labels[crop].copy(),
                         seed, kind, float(magnitude))


def endpoint_error(u, truth, margin=0):
    """Mean Euclidean distance between two fields, ignoring ``margin`` voxels at each face."""
    diff = np.linalg.norm(np.asarray(u) - np.asarray(truth), axis=-1)
    if margin:
        diff = diff[margin:-margin, margin:-margin, margin:-margin]
    return float(diff.mean())
