"""One gradient-descent iteration over the reparametrization group.

The energy minimized at an iteration is

    H(h) = || q1_rot - (q2_tilde o h) sqrt(det Dh) ||^2

with ``q2_tilde`` the second field already reparametrized by the accumulated
map. Its first variation at the identity along a tangent field ``v`` is

    -2 < q1_rot - q2_tilde , Dq2_tilde v + 0.5 div(v) q2_tilde >

integrated over D; the gradient is the sum of these derivatives times the
basis elements, since the basis is L2-orthonormal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import SampledBasis, tangent_boundary_violation
from .grid import (
    GridPartition,
    bilinear_sample,
    check_shared,
    finite_difference_partials,
    quadrature_weights,
)
from .shape import DiffeoField, ShapeField, group_action, l2_norm_sq



class StepSafetyError(RuntimeError):
    """A computed map lost positivity of its Jacobian minors."""


@dataclass(frozen=True, eq=False)
class TangentField:
    partition: GridPartition
    v: np.ndarray
    coefficients: Optional[np.ndarray] = None
    basis: Optional[SampledBasis] = None

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (*self.partition.shape, 2):
            raise ValueError(f"tangent field has shape {v.shape}")
        object.__setattr__(self, "v", v)

    @classmethod
    def from_coefficients(cls, basis: SampledBasis, coefficients) -> "TangentField":
        c = np.asarray(coefficients, dtype=float)
        return cls(basis.partition, basis.combine(c), c, basis)

    def divergence(self) -> np.ndarray:
        if self.basis is not None:
            return self.basis.combine_divergence(self.coefficients)
        d_r, d_t = finite_difference_partials(self.v, self.partition)
        return d_r[..., 0] + d_t[..., 1]

    def boundary_violation(self) -> float:
        return tangent_boundary_violation(self.v)


@dataclass(frozen=True, eq=False)
class GradientField:
    coefficients: np.ndarray
    sampled: np.ndarray
    grad_norm: float
    partition: GridPartition

    def jacobian(self) -> np.ndarray:
        """Finite-difference Jacobian ``A``, shape ``(M, N, 2, 2)``."""
        d_r, d_t = finite_difference_partials(self.sampled, self.partition)
        return np.stack([d_r, d_t], axis=-1)


@dataclass
class StepReport:
    delta: float
    delta_min: float
    delta_hat_min: float
    grad_norm: float
    energy_before: float
    energy_after: float
    halvings: int = 0
    accepted: bool = True
    step_min_jacobian: float = math.nan
    step_min_minor: float = math.nan
    min_jacobian: float = math.nan
    min_minor: float = math.nan
    composition_rejections: int = 0


def _residual_projections(q1_rot: ShapeField, q2_tilde: ShapeField):
    d = q1_rot.q - q2_tilde.q
    dq_r, dq_t = finite_difference_partials(q2_tilde.q, q2_tilde.partition)
    a_r = np.einsum("ijk,ijk->ij", d, dq_r)
    a_t = np.einsum("ijk,ijk->ij", d, dq_t)
    b = np.einsum("ijk,ijk->ij", d, q2_tilde.q)
    return a_r, a_t, b


def directional_derivative(q1_rot: ShapeField, q2_tilde: ShapeField, v: TangentField) -> float:
    check_shared(q1_rot.partition, q2_tilde.partition)
    check_shared(q1_rot.partition, v.partition)
    a_r, a_t, b = _residual_projections(q1_rot, q2_tilde)
    w = quadrature_weights(q1_rot.partition)
    integrand = v.v[..., 0] * a_r + v.v[..., 1] * a_t + 0.5 * v.divergence() * b
    return float(-2.0 * np.sum(w * integrand))


def assemble_gradient(q1_rot: ShapeField, q2_tilde: ShapeField, basis: SampledBasis) -> GradientField:
    check_shared(q1_rot.partition, q2_tilde.partition)
    check_shared(q1_rot.partition, basis.partition)
    a_r, a_t, b = _residual_projections(q1_rot, q2_tilde)
    w = quadrature_weights(q1_rot.partition)
    wa = np.stack([w * a_r, w * a_t], axis=-1)
    coeffs = -2.0 * (
        np.einsum("nijk,ijk->n", basis.values, wa)
        + 0.5 * np.einsum("nij,ij->n", basis.divergences, w * b)
    )
    return GradientField(
        coefficients=coeffs,
        sampled=basis.combine(coeffs),
        grad_norm=float(np.sqrt(np.sum(coeffs**2))),
        partition=basis.partition,
    )


def _first_root(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Smallest positive root of ``1 + b x + a x^2`` (inf when there is none).

    With ``q = -(b + sign(b) sqrt(b^2 - 4a)) / 2`` the roots are ``1/q`` and
    ``q/a``, neither of which suffers cancellation.
    """
    disc = b * b - 4.0 * a
    real = disc >= 0
    q = -0.5 * (b + np.where(b >= 0, 1.0, -1.0) * np.sqrt(np.where(real, disc, 0.0)))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r1 = np.where(q != 0, 1.0 / q, np.inf)
        r2 = np.where(a != 0, q / a, np.inf)
    r1 = np.where(r1 > 0, r1, np.inf)
    r2 = np.where(r2 > 0, r2, np.inf)
    return np.where(real, np.minimum(r1, r2), np.inf)


def step_bounds(A: np.ndarray) -> tuple[float, float]:
    """``(delta_min, delta_hat_min)`` for Jacobians ``A`` of shape ``(..., 2, 2)``.

    ``delta_min`` keeps ``det(I - delta A) = 1 - tr(A) delta + det(A) delta^2``
    positive at every node; ``delta_hat_min`` keeps the diagonal minors
    ``1 - delta a11`` and ``1 - delta a22`` positive.
    """
    A = np.asarray(A, dtype=float)
    a11, a12, a21, a22 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    # rescale each node by a power of two (exact) so tiny entries cannot
    # underflow the quadratic and huge ones cannot overflow it
    big = np.max(np.abs(A), axis=(-2, -1))
    nz = big > 0
    _, expo = np.frexp(big)
    scale = np.where((big < 1) | (big > 2.0**500), np.ldexp(1.0, expo), 1.0)
    # extended precision keeps products of subnormal entries exact where available
    B = (A[nz] / scale[nz, None, None]).astype(np.longdouble)
    det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    tr = B[:, 0, 0] + B[:, 1, 1]
    delta = np.full(scale.shape, np.inf)
    # roots beyond the float range overflow to inf, which is the right answer
    with np.errstate(divide="ignore", over="ignore"):
        delta[nz] = (_first_root(det, -tr) / scale[nz]).astype(float)
        inv11 = np.where(a11 > 0, 1.0 / np.where(a11 > 0, a11, 1.0), np.inf)
        inv22 = np.where(a22 > 0, 1.0 / np.where(a22 > 0, a22, 1.0), np.inf)
    delta_hat = np.minimum(inv11, inv22)
    return float(np.min(delta)), float(np.min(delta_hat))


def max_safe_step(g: GradientField) -> tuple[float, float]:
    return step_bounds(g.jacobian())


def _check_positive(h: DiffeoField, what: str) -> tuple[float, float]:
    """Verify det Dh > 0 and both diagonal minors > 0 at every node."""
    Jm = h.jacobian_matrix()
    det = Jm[..., 0, 0] * Jm[..., 1, 1] - Jm[..., 0, 1] * Jm[..., 1, 0]
    minor = np.minimum(Jm[..., 0, 0], Jm[..., 1, 1])
    bad = np.minimum(det, minor)
    if np.min(bad) <= 0:
        i, j = np.unravel_index(np.argmin(bad), bad.shape)
        raise StepSafetyError(
            f"{what}: Jacobian det {det[i, j]:.3g}, minor {minor[i, j]:.3g} at node ({i}, {j})"
        )
    return float(np.min(det)), float(np.min(minor))


def apply_step(g: GradientField, delta: float) -> DiffeoField:
    """``h = id - delta * grad``; verified to keep positive Jacobian minors."""
    h = DiffeoField(g.partition, g.partition.mesh() - delta * g.sampled)
    if delta != 0:
        _check_positive(h, "step safety violated")
    return h


def compose(h_outer: DiffeoField, h_inner: DiffeoField) -> DiffeoField:
    """``h_outer o h_inner`` sampled on the grid by bilinear interpolation."""
    check_shared(h_outer.partition, h_inner.partition)
    if h_outer.is_identity():
        return DiffeoField(h_inner.partition, h_inner.h.copy())
    if h_inner.is_identity():
        return DiffeoField(h_outer.partition, h_outer.h.copy())
    p = h_outer.partition
    out = bilinear_sample(h_outer.h, p, h_inner.h[..., 0], h_inner.h[..., 1])
    r0, r1 = p.r_knots[[0, -1]]
    t0, t1 = p.t_knots[[0, -1]]
    out[0, :, 0], out[-1, :, 0] = r0, r1
    out[:, 0, 1], out[:, -1, 1] = t0, t1
    h = DiffeoField(p, out)
    _check_positive(h, "composition lost orientation")
    return h


def take_step(
    q1_rot: ShapeField,
    q2: ShapeField,
    h: DiffeoField,
    q2_tilde: ShapeField,
    energy: float,
    basis: SampledBasis,
    safety: float = 0.9,
    max_halvings: int = 30,
    grad: Optional[GradientField] = None,
):
    """Attempt one descent step from the accumulated map ``h``.

    The trial step starts at ``safety * min(delta_min, delta_hat_min)`` and is
    halved until the composed map keeps a positive Jacobian determinant and
    positive diagonal minors and the energy decreases. Returns
    ``(h_new, q2_tilde_new, report)``; on rejection ``h`` and ``q2_tilde`` come back unchanged and
    ``report.accepted`` is False.
    """
    if grad is None:
        grad = assemble_gradient(q1_rot, q2_tilde, basis)
    delta_min, delta_hat_min = max_safe_step(grad)
    bound = min(delta_min, delta_hat_min)
    if math.isinf(bound):
        # no Jacobian constraint: cap the displacement at half the domain
        peak = float(np.max(np.abs(grad.sampled)))
        bound = 0.5 / peak if peak > 0 else 0.0
    delta = safety * bound
    report = StepReport(delta, delta_min, delta_hat_min, grad.grad_norm, energy, energy, accepted=False)
    if delta <= 0:
        return h, q2_tilde, report
    for halving in range(max_halvings + 1):
        h_step = apply_step(grad, delta)
        step_det, step_minor = _check_positive(h_step, "step safety violated")
        try:
            h_new = compose(h, h_step)
        except StepSafetyError:
            # the accumulated map can lose a minor under heavy distortion; shrink the step
            report.composition_rejections += 1
            report.halvings = halving
            delta *= 0.5
            continue
        q2_new = group_action(q2, h_new)
        e_new = l2_norm_sq(ShapeField(q2.partition, q1_rot.q - q2_new.q))
        report.delta, report.halvings, report.energy_after = delta, halving, e_new
        if e_new < energy:
            report.accepted = True
            report.step_min_jacobian, report.step_min_minor = step_det, step_minor
            Jm = h_new.jacobian_matrix()
            report.min_jacobian = float(np.min(Jm[..., 0, 0] * Jm[..., 1, 1] - Jm[..., 0, 1] * Jm[..., 1, 0]))
            report.min_minor = float(np.min(np.minimum(Jm[..., 0, 0], Jm[..., 1, 1])))
            return h_new, q2_new, report
        delta *= 0.5
    return h, q2_tilde, report
