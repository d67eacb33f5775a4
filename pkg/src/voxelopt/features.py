"""Feature maps fed to the cost layer.

Three sources are supported: normalized raw intensities, MIND self-similarity
descriptors computed here, and feature maps produced elsewhere (for example
pre-softmax logits of a segmentation network) loaded from disk. All return
``(X, Y, Z, C)`` float arrays.
"""

import numpy as np

from .errors import ShapeError
from .volume import as_channels

MIND_OFFSETS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))
VARIANCE_FLOOR = 1e-6


def raw_feature(vol, window=(-800.0, 500.0)):
    """Clip to ``window`` (skipped when ``None``) and min-max scale to ``[0, 1]``.

    A constant volume maps to zeros.
    """
    vol = np.asarray(vol, dtype=np.float64)
    if vol.ndim != 3:
        raise ShapeError(f"raw features need a scalar 3D volume, got shape {vol.shape}")
    if window is not None:
        vol = np.clip(vol, window[0], window[1])
    lo, hi = vol.min(), vol.max()
    if hi <= lo:
        return np.zeros(vol.shape + (1,))
    return ((vol - lo) / (hi - lo))[..., None]


def _patch_weights(sigma):
    t = np.array([-1.0, 0.0, 1.0])
    w = np.exp(-t**2 / (2.0 * sigma**2))
    return w / w.sum()


def mind_extract(vol, sigma=0.5):
    """Six-channel MIND descriptor over the face neighbours.

    For each neighbour offset ``r`` the patch distance ``D(x, r)`` is the
    Gaussian-weighted (3x3x3 support) sum of squared differences between the
    patches centred at ``x`` and ``x + r``. Channels are
    ``exp(-D / V)`` with ``V`` the mean of the six distances (floored at
    1e-6), then divided by their per-voxel maximum.
    """
    vol = np.asarray(vol, dtype=np.float64)
    if vol.ndim != 3:
        raise ShapeError(f"MIND needs a scalar 3D volume, got shape {vol.shape}")
    if min(vol.shape) < 3:
        raise ShapeError(f"MIND needs at least 3 voxels per axis, got {vol.shape}")
    X, Y, Z = vol.shape
    w = _patch_weights(sigma)
    # edge padding by 2 reproduces clamped reads for patch taps and neighbour shifts
    p = np.pad(vol, 2, mode="edge")
    dist = np.empty((X, Y, Z, len(MIND_OFFSETS)))
    for c, (rx, ry, rz) in enumerate(MIND_OFFSETS):
        centre = p[1:X + 3, 1:Y + 3, 1:Z + 3]
        moved = p[1 + rx:X + 3 + rx, 1 + ry:Y + 3 + ry, 1 + rz:Z + 3 + rz]
        g = (centre - moved) ** 2
        g = w[0] * g[:-2] + w[1] * g[1:-1] + w[2] * g[2:]
        g = w[0] * g[:, :-2] + w[1] * g[:, 1:-1] + w[2] * g[:, 2:]
        g = w[0] * g[:, :, :-2] + w[1] * g[:, :, 1:-1] + w[2] * g[:, :, 2:]
        dist[..., c] = g
    var = np.maximum(dist.mean(axis=-1, keepdims=True), VARIANCE_FLOOR)
    desc = np.exp(-dist / var)
    return desc / desc.max(axis=-1, keepdims=True)


def zscore_channels(feat, eps=1e-8):
    feat = as_channels(feat).astype(np.float64)
    mean = feat.mean(axis=(0, 1, 2), keepdims=True)
    std = feat.std(axis=(0, 1, 2), keepdims=True)
    return (feat - mean) / np.maximum(std, eps)


def load_external(path, dims=None, zscore=False):
    """Read a feature container written by another tool.

    Values are used as stored unless ``zscore`` asks for per-channel
    standardization. ``dims`` (the paired image grid) is checked when given.
    """
    from .io.featfile import read_feat

    feat = read_feat(path).data
    if dims is not None and tuple(feat.shape[:3]) != tuple(dims):
        raise ShapeError(f"{path}: feature grid {feat.shape[:3]} does not match image grid {tuple(dims)}")
    return zscore_channels(feat) if zscore else feat


def extract(vol, cfg):
    """Feature map for ``vol`` according to ``cfg.feature_mode`` (raw or mind)."""
    if cfg.feature_mode == "raw":
        return raw_feature(vol, cfg.intensity_window)
    if cfg.feature_mode == "mind":
        return mind_extract(vol, cfg.mind_sigma)
    raise ValueError("external features are loaded from files, not extracted")
