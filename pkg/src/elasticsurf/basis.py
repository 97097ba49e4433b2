"""Truncated trigonometric orthonormal basis of tangent fields at the identity.

Each element is a vector field on D with one nonzero coordinate. For the
r-slot the nonzero scalar is one of

    SIN     sqrt(2) sin(pi k r)
    SINCOS  2 sin(pi k r) cos(2 pi l t)
    SINSIN  2 sin(pi k r) sin(2 pi l t)

and the t-slot uses the same scalars with r and t exchanged. The r-slot
fields vanish on the edges r = 0, 1 and the t-slot fields on t = 0, 1.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import GridPartition


class Slot(enum.Enum):
    R = "r"
    T = "t"


class Family(enum.Enum):
    SIN = "sin"
    SINCOS = "sincos"
    SINSIN = "sinsin"


@dataclass(frozen=True)
class BasisElement:
    slot: Slot
    family: Family
    k: int
    l: int = 0

    def __post_init__(self):
        if self.k < 1 or (self.family is not Family.SIN and self.l < 1):
            raise ValueError(f"invalid basis indices k={self.k}, l={self.l}")


def basis_size(KL: int) -> int:
    return 2 * (KL + 2 * KL * KL)


def build_basis(KL: int) -> list[BasisElement]:
    """Elements in a fixed order: r-slot block then t-slot block; within a
    block SIN (k), SINCOS (k-major, l-minor), SINSIN."""
    if KL < 1:
        raise ValueError("KL must be at least 1")
    out = []
    for slot in (Slot.R, Slot.T):
        out += [BasisElement(slot, Family.SIN, k) for k in range(1, KL + 1)]
        for fam in (Family.SINCOS, Family.SINSIN):
            out += [
                BasisElement(slot, fam, k, l)
                for k in range(1, KL + 1)
                for l in range(1, KL + 1)
            ]
    return out


def _sinpi(x):
    """sin(pi x), exactly zero at integer x."""
    x = np.asarray(x, dtype=float)
    out = np.sin(np.pi * x)
    return np.where(x == np.round(x), 0.0, out)


def _scalar(e: BasisElement, u, w):
    """Scalar value and its derivative along ``u``; ``u`` is the slot's own
    variable, ``w`` the other one."""
    k, l = e.k, e.l
    s = _sinpi(k * u)
    ds = np.pi * k * np.cos(np.pi * k * u)
    if e.family is Family.SIN:
        g = np.sqrt(2.0) * np.ones_like(w)
    elif e.family is Family.SINCOS:
        g = 2.0 * np.cos(2.0 * np.pi * l * w)
    else:
        g = 2.0 * _sinpi(2.0 * l * w)
    return s * g, ds * g


def _split(e: BasisElement, r, t):
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    r, t = np.broadcast_arrays(r, t)
    return (r, t) if e.slot is Slot.R else (t, r)


def evaluate(e: BasisElement, r, t) -> np.ndarray:
    """Field value at ``(r, t)``; result has a trailing axis of length 2."""
    u, w = _split(e, r, t)
    val, _ = _scalar(e, u, w)
    zero = np.zeros_like(val)
    pair = (val, zero) if e.slot is Slot.R else (zero, val)
    return np.stack(pair, axis=-1)


def divergence(e: BasisElement, r, t) -> np.ndarray:
    u, w = _split(e, r, t)
    _, dval = _scalar(e, u, w)
    return dval


def jacobian(e: BasisElement, r, t) -> np.ndarray:
    """Analytic Jacobian ``[component, variable]``, trailing shape ``(2, 2)``."""
    u, w = _split(e, r, t)
    k, l = e.k, e.l
    s = _sinpi(k * u)
    ds = np.pi * k * np.cos(np.pi * k * u)
    if e.family is Family.SIN:
        g, dg = np.sqrt(2.0) * np.ones_like(w), np.zeros_like(w)
    elif e.family is Family.SINCOS:
        g = 2.0 * np.cos(2.0 * np.pi * l * w)
        dg = -4.0 * np.pi * l * _sinpi(2.0 * l * w)
    else:
        g = 2.0 * _sinpi(2.0 * l * w)
        dg = 4.0 * np.pi * l * np.cos(2.0 * np.pi * l * w)
    d_own, d_other = ds * g, s * dg
    J = np.zeros(u.shape + (2, 2))
    if e.slot is Slot.R:
        J[..., 0, 0], J[..., 0, 1] = d_own, d_other
    else:
        J[..., 1, 1], J[..., 1, 0] = d_own, d_other
    return J


class SampledBasis:
    """All elements of a truncated basis sampled on one grid.

    ``values`` has shape ``(n, M, N, 2)`` and ``divergences`` ``(n, M, N)``.
    The arrays are read-only once built.
    """

    def __init__(self, partition: GridPartition, KL: int = 5):
        self.partition = partition
        self.KL = KL
        self.elements = build_basis(KL)
        rr, tt = np.meshgrid(partition.r_knots, partition.t_knots, indexing="ij")
        self.values = np.stack([evaluate(e, rr, tt) for e in self.elements])
        self.divergences = np.stack([divergence(e, rr, tt) for e in self.elements])
        self.values.setflags(write=False)
        self.divergences.setflags(write=False)

    def __len__(self) -> int:
        return len(self.elements)

    @cached_property
    def jacobians(self) -> np.ndarray:
        rr, tt = np.meshgrid(self.partition.r_knots, self.partition.t_knots, indexing="ij")
        J = np.stack([jacobian(e, rr, tt) for e in self.elements])
        J.setflags(write=False)
        return J

    def combine(self, coefficients: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(coefficients, dtype=float), self.values, axes=(0, 0))

    def combine_divergence(self, coefficients: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(coefficients, dtype=float), self.divergences, axes=(0, 0))


def tangent_boundary_violation(v: np.ndarray) -> float:
    """Largest normal component of a sampled tangent field on the edges of D."""
    return float(
        max(
            np.max(np.abs(v[0, :, 0])),
            np.max(np.abs(v[-1, :, 0])),
            np.max(np.abs(v[:, 0, 1])),
            np.max(np.abs(v[:, -1, 1])),
        )
    )
