"""Overlap, surface-distance and smoothness metrics for evaluating registrations."""

import math

import numpy as np
from scipy.ndimage import binary_erosion, distance_transform_edt

from .diffeo import jacobian_stats
from .errors import ShapeError
from .volume import warp_nearest

__all__ = ["dice", "hd95", "jacobian_stats", "surface_voxels", "warp_labels"]


def warp_labels(labels, u):
    """Nearest-neighbour resampling of a label map at ``x + u(x)``."""
    return warp_nearest(labels, u)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"label maps differ in shape: {a.shape} vs {b.shape}")


def dice(a, b, labels=None):
    """Per-label Dice coefficients and their mean.

    Labels default to every non-zero value present in either map. A label
    missing from both maps scores NaN and is left out of the mean; one missing
    from only one map scores 0.

    Returns
    -------
    scores : dict
        label -> Dice value
    mean : float
        NaN when no label could be scored.
    """
    a, b = np.asarray(a), np.asarray(b)
    _same_shape(a, b)
    if labels is None:
        labels = sorted((set(np.unique(a).tolist()) | set(np.unique(b).tolist())) - {0})
    scores = {}
    for lab in labels:
        ma, mb = a == lab, b == lab
        total = int(ma.sum()) + int(mb.sum())
        scores[int(lab)] = 2.0 * np.logical_and(ma, mb).sum() / total if total else math.nan
    valid = [s for s in scores.values() if not math.isnan(s)]
    return scores, float(np.mean(valid)) if valid else math.nan


_FACES = np.zeros((3, 3, 3), dtype=bool)
_FACES[1, 1, :] = _FACES[1, :, 1] = _FACES[:, 1, 1] = True


def surface_voxels(mask):
    """Foreground voxels with at least one background face neighbour.

    Neighbours outside the grid count as background.
    """
    mask = np.asarray(mask, dtype=bool)
    inner = binary_erosion(mask, structure=_FACES, border_value=0)
    return mask & ~inner


def _directed(src, dst, spacing):
    # distance from every src surface voxel to the nearest dst surface voxel
    dist = distance_transform_edt(~dst, sampling=spacing)
    return dist[src]


def hd95(a, b, spacing=(1.0, 1.0, 1.0)):
    """Symmetric 95th-percentile surface distance in mm.

    Computes the 95th percentile (linear interpolation) of the distances from
    each mask's surface to the other's, in both directions, and returns the
    larger of the two.
    """
    a, b = np.asarray(a, dtype=bool), np.asarray(b, dtype=bool)
    _same_shape(a, b)
    if not a.any() or not b.any():
        raise ValueError("hd95 is undefined for an empty mask")
    sa, sb = surface_voxels(a), surface_voxels(b)
    spacing = tuple(float(s) for s in spacing)
    return float(max(np.percentile(_directed(sa, sb, spacing), 95),
                     np.percentile(_directed(sb, sa, spacing), 95)))
