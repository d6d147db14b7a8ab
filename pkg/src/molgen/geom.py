"""Rigid-body geometry helpers: CoM removal, Kabsch rotations, RMSD.

All rotations returned here are proper (det = +1); reflections are never
used, so mirror images of chiral structures keep a strictly positive RMSD.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "remove_com",
    "kabsch_rotation",
    "kabsch_rmsd",
    "random_rotation",
]

# relative singular-value threshold below which the optimal rotation is
# considered underdetermined (collinear or coincident point sets)
_DEGENERATE_RTOL = 1e-12


def remove_com(coords: np.ndarray) -> np.ndarray:
    """Translate so the column means vanish (center of geometry at origin)."""
    coords = np.asarray(coords, dtype=np.float64)
    return coords - coords.mean(axis=0, keepdims=True)


def kabsch_rotation(moving: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, bool]:
    """Proper rotation R minimizing ||moving @ R.T - target||^2.

    Both inputs must already be centered. Returns (R, degenerate); when the
    covariance is rank-deficient enough that the minimizer is not unique
    (collinear points), R falls back to the identity and degenerate is True.
    """
    moving = np.asarray(moving, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if moving.shape != target.shape or moving.ndim != 2 or moving.shape[1] != 3:
        raise ValueError("kabsch_rotation expects two equal N x 3 arrays")
    h = moving.T @ target
    u, s, vt = np.linalg.svd(h)
    if s[0] <= 0.0 or s[1] <= _DEGENERATE_RTOL * s[0]:
        return np.eye(3), True
    d = np.sign(np.linalg.det(vt.T @ u.T))
    flip = np.diag([1.0, 1.0, d])
    r = vt.T @ flip @ u.T
    return r, False


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random proper rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def kabsch_rmsd(a: np.ndarray, b: np.ndarray) -> float:
    """RMSD after optimal proper rotation + translation superposition."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise ValueError("kabsch_rmsd expects two equal N x 3 arrays")
    if a.shape[0] < 1:
        raise ValueError("need at least one point")
    ac = remove_com(a)
    bc = remove_com(b)
    r, _ = kabsch_rotation(ac, bc)
    diff = ac @ r.T - bc
    return float(np.sqrt((diff * diff).sum() / a.shape[0]))
