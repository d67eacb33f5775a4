"""Exponentiation of stationary velocity fields and Jacobian diagnostics."""

import numpy as np

from .errors import ShapeError
from .volume import check_field, compose

LOGDET_FLOOR = 1e-6


def scaling_squaring(velocity, steps=7):
    """Displacement of the time-1 flow of a stationary velocity field.

    The velocity is scaled by ``2**-steps`` and the resulting small
    displacement is composed with itself ``steps`` times.
    """
    velocity = check_field(velocity)
    if int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps}")
    phi = np.asarray(velocity, dtype=np.float64) / 2.0**steps
    for _ in range(int(steps)):
        phi = compose(phi, phi)
    return phi


def jacobian_determinant(u):
    """Determinant of ``d(x + u(x))/dx`` on interior voxels, by central differences.

    Returns an array of shape ``(X - 2, Y - 2, Z - 2)``.
    """
    u = check_field(u)
    if min(u.shape[:3]) < 3:
        raise ShapeError(f"Jacobian needs at least 3 voxels per axis, got {u.shape[:3]}")
    u = np.asarray(u, dtype=np.float64)
    jac = np.empty(tuple(n - 2 for n in u.shape[:3]) + (3, 3))
    for b in range(3):
        fwd = [slice(1, -1)] * 3
        bwd = [slice(1, -1)] * 3
        fwd[b] = slice(2, None)
        bwd[b] = slice(None, -2)
        # column b: derivative of every component along axis b
        jac[..., :, b] = (u[tuple(fwd)] - u[tuple(bwd)]) / 2.0
    jac += np.eye(3)
    return np.linalg.det(jac)


def jacobian_stats(u):
    """``(sdlogj, fold_fraction)`` of a displacement field.

    ``fold_fraction`` is the share of interior voxels with a non-positive
    determinant; ``sdlogj`` is the (population) standard deviation of
    ``log(max(det, 1e-6))`` so that folds cannot make it infinite.
    """
    det = jacobian_determinant(u)
    fold = float(np.mean(det <= 0))
    sdlogj = float(np.std(np.log(np.maximum(det, LOGDET_FLOOR))))
    return sdlogj, fold
