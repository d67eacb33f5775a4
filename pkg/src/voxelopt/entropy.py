"""Displacement entropy of a local cost volume and the smoothing width it implies.

Low entropy marks voxels whose cost volume has a sharp minimum (a confident
displacement); those get a narrow kernel and keep their own estimate. Flat
cost profiles give high entropy and wide kernels, so such voxels pull their
displacement from the neighbourhood. Logarithms are natural throughout.
"""

import numpy as np
from scipy.special import entr

from .costvol import CostVolume


def softmax_prob(cost, beta):
    """Per-voxel softmax of ``-C / beta`` over the offset axis.

    Returns an array of shape ``(K, X, Y, Z)`` whose offset axis sums to one.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    c = cost.costs if isinstance(cost, CostVolume) else np.asarray(cost, dtype=np.float64)
    z = np.exp(-(c - c.min(axis=0, keepdims=True)) / beta)
    return z / z.sum(axis=0, keepdims=True)


def displacement_entropy(prob):
    """Shannon entropy ``sum_o -P log P`` along axis 0, with ``0 log 0 = 0``."""
    return entr(np.asarray(prob, dtype=np.float64)).sum(axis=0)


def entropy_map(cost, beta):
    """Entropy of the 27-neighbour probabilities, whatever the kernel size of ``cost``."""
    return displacement_entropy(softmax_prob(cost.unit(), beta))


def sigma_map(entropy, alpha):
    """``alpha * log(E / max(E) + 1)``; all zeros when the entropy is zero everywhere.

    The result lies in ``[0, alpha * log 2]`` and grows with ``E``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    entropy = np.asarray(entropy, dtype=np.float64)
    top = entropy.max() if entropy.size else 0.0
    if top <= 0:
        return np.zeros_like(entropy)
    return alpha * np.log1p(entropy / top)
