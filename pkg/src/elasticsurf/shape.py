"""Square-root normal fields, the reparametrization action, and L2 geometry."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    GridPartition,
    SurfaceSample,
    bilinear_sample,
    check_shared,
    finite_difference_partials,
    quadrature_weights,
)

NORMAL_EPS = 1e-14
ORIENTATION_TOL = 1e-6


class OrientationError(ValueError):
    """A reparametrization has a clearly negative Jacobian determinant."""


@dataclass(frozen=True, eq=False)
class ShapeField:
    partition: GridPartition
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (*self.partition.shape, 3):
            raise ValueError(f"shape field has shape {q.shape}, expected {(*self.partition.shape, 3)}")
        if not np.all(np.isfinite(q)):
            raise ValueError("shape field contains non-finite values")
        object.__setattr__(self, "q", q)

    def rotated(self, R: np.ndarray) -> "ShapeField":
        return ShapeField(self.partition, self.q @ np.asarray(R).T)


@dataclass(frozen=True, eq=False)
class DiffeoField:
    """A sampled map h: D -> D; ``h[i, j]`` is the image of node ``(r_i, t_j)``."""

    partition: GridPartition
    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.shape != (*self.partition.shape, 2):
            raise ValueError(f"diffeomorphism has shape {h.shape}, expected {(*self.partition.shape, 2)}")
        if not np.all(np.isfinite(h)):
            raise ValueError("diffeomorphism contains non-finite values")
        object.__setattr__(self, "h", h)

    @classmethod
    def identity(cls, p: GridPartition) -> "DiffeoField":
        return cls(p, p.mesh())

    def is_identity(self) -> bool:
        return np.array_equal(self.h, self.partition.mesh())

    def jacobian_matrix(self) -> np.ndarray:
        """Finite-difference Jacobian, shape ``(M, N, 2, 2)`` as ``[component, variable]``."""
        d_r, d_t = finite_difference_partials(self.h, self.partition)
        return np.stack([d_r, d_t], axis=-1)

    def jacobian_det(self) -> np.ndarray:
        d_r, d_t = finite_difference_partials(self.h, self.partition)
        return d_r[..., 0] * d_t[..., 1] - d_t[..., 0] * d_r[..., 1]

    def boundary_violation(self) -> float:
        """Largest deviation from the edge conditions of the reparametrization group."""
        r0, r1 = self.partition.r_knots[[0, -1]]
        t0, t1 = self.partition.t_knots[[0, -1]]
        h = self.h
        return float(
            max(
                np.max(np.abs(h[0, :, 0] - r0)),
                np.max(np.abs(h[-1, :, 0] - r1)),
                np.max(np.abs(h[:, 0, 1] - t0)),
                np.max(np.abs(h[:, -1, 1] - t1)),
            )
        )


def compute_shape_field(s: SurfaceSample) -> ShapeField:
    """q = n / sqrt(|n|) with n the cross product of the surface partials."""
    c_r, c_t = finite_difference_partials(s.points, s.partition)
    n = np.cross(c_r, c_t)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    q = np.zeros_like(n)
    ok = norm[..., 0] >= NORMAL_EPS
    q[ok] = n[ok] / np.sqrt(norm[ok])
    return ShapeField(s.partition, q)


def group_action(q: ShapeField, h: DiffeoField) -> ShapeField:
    """Shape field of the reparametrized surface: ``(q o h) * sqrt(det Dh)``."""
    check_shared(q.partition, h.partition)
    if h.is_identity():
        return ShapeField(q.partition, q.q.copy())
    J = h.jacobian_det()
    if np.any(J < -ORIENTATION_TOL):
        i, j = np.unravel_index(np.argmin(J), J.shape)
        raise OrientationError(f"orientation violated: Jacobian {J[i, j]:.3g} at node ({i}, {j})")
    warped = bilinear_sample(q.q, q.partition, h.h[..., 0], h.h[..., 1])
    return ShapeField(q.partition, warped * np.sqrt(np.maximum(J, 0.0))[..., None])


def l2_inner(a: ShapeField, b: ShapeField) -> float:
    check_shared(a.partition, b.partition)
    w = quadrature_weights(a.partition)
    return float(np.sum(w * np.einsum("ijk,ijk->ij", a.q, b.q)))


def l2_norm_sq(a: ShapeField) -> float:
    return l2_inner(a, a)


def l2_distance(a: ShapeField, b: ShapeField) -> float:
    check_shared(a.partition, b.partition)
    d = ShapeField(a.partition, a.q - b.q)
    return float(np.sqrt(max(l2_norm_sq(d), 0.0)))


def registration_energy(q1: ShapeField, q2: ShapeField, R: np.ndarray, h: DiffeoField) -> float:
    """E(h, R) = || R q1 - (q2, h) ||^2."""
    check_shared(q1.partition, q2.partition)
    d = q1.q @ np.asarray(R).T - group_action(q2, h).q
    return l2_norm_sq(ShapeField(q1.partition, d))
