"""Local cost volumes over a cubic lattice of integer offsets."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ShapeError
from .volume import as_channels


@lru_cache(maxsize=None)
def _lattice(k):
    r = range(-k, k + 1)
    offs = [(ox, oy, oz) for oz in r for oy in r for ox in r]
    arr = np.array(offs, dtype=np.intp)
    arr.setflags(write=False)
    return arr


def lattice_offsets(k):
    """All ``(2k+1)**3`` offsets ``(ox, oy, oz)`` with ``|o_i| <= k``.

    Enumeration is z-major, then y, then x, each running from ``-k`` to ``k``;
    this order is shared by every cost and probability volume.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"kernel size k must be a positive integer, got {k}")
    return _lattice(int(k))


def lattice_index(offset, k):
    ox, oy, oz = (int(c) for c in offset)
    n = 2 * k + 1
    return ((oz + k) * n + (oy + k)) * n + (ox + k)


def unit_subset(k):
    """Indices of the 27 offsets with ``|o_i| <= 1`` inside the ``k`` lattice."""
    return np.array([lattice_index(o, k) for o in lattice_offsets(1)], dtype=np.intp)


@dataclass(frozen=True)
class CostVolume:
    """Matching costs ``costs[i, x, y, z]`` for offset ``lattice_offsets(k)[i]``.

    Offset-major storage keeps each offset channel contiguous, which is what
    the spatial filters and the per-offset argmin sweep want.
    """

    costs: np.ndarray
    k: int

    def __post_init__(self):
        if self.costs.ndim != 4 or self.costs.shape[0] != (2 * self.k + 1) ** 3:
            raise ShapeError(
                f"cost array of shape {self.costs.shape} does not fit kernel size k={self.k}")

    @property
    def dims(self):
        return self.costs.shape[1:]

    @property
    def offsets(self):
        return lattice_offsets(self.k)

    def at(self, offset):
        return self.costs[lattice_index(offset, self.k)]

    def unit(self):
        """The k=1 sub-volume (27 central offsets), in k=1 lattice order."""
        if self.k == 1:
            return self
        return CostVolume(self.costs[unit_subset(self.k)], 1)

    def replace(self, costs):
        return CostVolume(costs, self.k)


def build_cost(f, m, k=1):
    """L1 cost volume between fixed features ``f`` and moving features ``m``.

    ``C(x, o) = mean_c |f(x, c) - m(x + o, c)|`` with ``x + o`` clamped to the
    grid. Averaging over channels keeps cost magnitudes comparable between
    feature types with different channel counts.
    """
    f = as_channels(f).astype(np.float64, copy=False)
    m = as_channels(m).astype(np.float64, copy=False)
    if f.shape != m.shape:
        raise ShapeError(f"fixed features {f.shape} and moving features {m.shape} differ")
    offsets = lattice_offsets(k)
    X, Y, Z = f.shape[:3]
    mp = np.pad(m, ((k, k), (k, k), (k, k), (0, 0)), mode="edge")
    costs = np.empty((len(offsets), X, Y, Z))
    for i, (ox, oy, oz) in enumerate(offsets):
        shifted = mp[k + ox:k + ox + X, k + oy:k + oy + Y, k + oz:k + oz + Z]
        np.mean(np.abs(f - shifted), axis=-1, out=costs[i])
    return CostVolume(costs, int(k))
