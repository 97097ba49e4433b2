"""Optimal rotation between two shape fields (weighted Kabsch-Umeyama)."""
from __future__ import annotations

import itertools
import warnings

import numpy as np

from .grid import check_shared, quadrature_weights
from .shape import ShapeField


class DegenerateCovarianceWarning(RuntimeWarning):
    """The optimal rotation is not unique; the SVD order decided the result."""


def is_rotation(R: np.ndarray, tol: float = 1e-10) -> bool:
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0)
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def cross_covariance(q_target: ShapeField, q_source: ShapeField) -> np.ndarray:
    check_shared(q_target.partition, q_source.partition)
    w = quadrature_weights(q_target.partition)
    return np.einsum("ij,ija,ijb->ab", w, q_target.q, q_source.q)


def optimal_rotation(q_target: ShapeField, q_source: ShapeField) -> np.ndarray:
    """Rotation R minimizing ``|| R q_source - q_target ||``.

    Parameters
    ----------
    q_target, q_source : ShapeField
        Fields on a shared partition.

    Returns
    -------
    np.ndarray
        3 x 3 special orthogonal matrix.

    Warns
    -----
    DegenerateCovarianceWarning
        When the two smallest singular values coincide and the reflection
        correction is active, so several rotations are optimal.
    """
    C = cross_covariance(q_target, q_source)
    U, S, Vt = np.linalg.svd(C)
    d = 1.0 if np.linalg.det(U @ Vt) >= 0 else -1.0
    if d < 0 and abs(S[1] - S[2]) <= 1e-12:
        warnings.warn(
            "cross-covariance is rank deficient; optimal rotation is ambiguous",
            DegenerateCovarianceWarning,
            stacklevel=2,
        )
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def axis_permutation_rotations() -> list[np.ndarray]:
    """The 24 signed permutation matrices with determinant +1, identity first."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            P = np.zeros((3, 3))
            P[range(3), perm] = signs
            if np.linalg.det(P) > 0:
                out.append(P)
    return out
