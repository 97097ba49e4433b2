"""Analytic test surfaces and the power-law reparametrizations used to perturb them."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import GridPartition, SurfaceSample, bilinear_sample

# maps type-2 points onto type-1 points: x1 = P x2
TYPE2_TO_TYPE1 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])


class Kind(enum.Enum):
    SINE1 = "sine1"
    SINE2 = "sine2"
    HELICOID1 = "helicoid1"
    HELICOID2 = "helicoid2"
    COSSIN1 = "cossin1"
    COSSIN2 = "cossin2"


@dataclass(frozen=True)
class SurfaceSpec:
    kind: Kind
    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")

    @classmethod
    def parse(cls, text: str) -> "SurfaceSpec":
        """Parse ``kind:k`` (``k`` optional for the cosine-sine kinds)."""
        name, _, k = text.strip().partition(":")
        try:
            kind = Kind(name.lower())
        except ValueError:
            raise ValueError(f"unknown surface kind {name!r}") from None
        return cls(kind, int(k) if k else 1)

    def __call__(self, r, t) -> np.ndarray:
        return surface_function(self)(np.asarray(r, dtype=float), np.asarray(t, dtype=float))


@dataclass(frozen=True)
class GammaSpec:
    """gamma(r, t) = (r**exponent_r, t**exponent_t)."""

    exponent_r: float = 1.0
    exponent_t: float = 1.0

    def __post_init__(self):
        if not (self.exponent_r > 0 and self.exponent_t > 0):
            raise ValueError("gamma exponents must be positive")

    @classmethod
    def parse(cls, text: str) -> "GammaSpec":
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected 'a,b', got {text!r}")
        return cls(*parts)

    def is_identity(self) -> bool:
        return self.exponent_r == 1.0 and self.exponent_t == 1.0

    def __call__(self, r, t):
        return np.power(r, self.exponent_r), np.power(t, self.exponent_t)


def surface_function(spec: SurfaceSpec) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    k = spec.k
    kind = spec.kind

    def sine(r, t):
        return np.stack([r, t, np.sin(k * np.pi * r)], axis=-1)

    def helicoid(r, t):
        a = k * np.pi * t
        return np.stack([r * np.cos(a), r * np.sin(a), a], axis=-1)

    def cossin(r, t):
        return np.stack([r, t, np.cos(0.5 * np.pi * r) * np.sin(0.5 * np.pi * t)], axis=-1)

    type1 = {Kind.SINE1: sine, Kind.HELICOID1: helicoid, Kind.COSSIN1: cossin}
    type2 = {Kind.SINE2: sine, Kind.HELICOID2: helicoid, Kind.COSSIN2: cossin}
    if kind in type1:
        return type1[kind]
    base = type2[kind]

    def rolled(r, t):
        # type 2 is type 1 with coordinates cycled: (x, y, z) -> (z, x, y)
        p = base(r, t)
        return p[..., [2, 0, 1]]

    return rolled


@dataclass(frozen=True, eq=False)
class AnalyticSurface(SurfaceSample):
    """A sample that remembers the map it was drawn from."""

    func: Optional[Callable] = None


def generate(spec: SurfaceSpec, M: int = 101, N: int = 101) -> AnalyticSurface:
    if M < 2 or N < 2:
        raise ValueError("need M, N >= 2")
    p = GridPartition.uniform(M, N)
    rr, tt = np.meshgrid(p.r_knots, p.t_knots, indexing="ij")
    f = surface_function(spec)
    return AnalyticSurface(p, f(rr, tt), func=f)


def perturb(s: SurfaceSample, g: GammaSpec) -> SurfaceSample:
    """Sample ``c(gamma(r, t))`` on the same grid.

    Zoo surfaces are re-evaluated analytically; other samples are resampled by
    bilinear interpolation, with a warning.
    """
    if g.is_identity():
        return s
    p = s.partition
    rr, tt = np.meshgrid(p.r_knots, p.t_knots, indexing="ij")
    wr, wt = _warp(g, p, rr, tt)
    func = getattr(s, "func", None)
    if func is not None:
        return AnalyticSurface(p, func(wr, wt), func=lambda r, t: func(*_warp(g, p, r, t)))
    warnings.warn("perturbing a non-analytic surface by bilinear resampling", RuntimeWarning, stacklevel=2)
    return SurfaceSample(p, bilinear_sample(s.points, p, wr, wt))


def _warp(g: GammaSpec, p: GridPartition, r, t):
    # gamma acts on the unit square; map knots there and back
    r0, r1 = p.r_knots[0], p.r_knots[-1]
    t0, t1 = p.t_knots[0], p.t_knots[-1]
    ur, ut = g((np.asarray(r) - r0) / (r1 - r0), (np.asarray(t) - t0) / (t1 - t0))
    return r0 + ur * (r1 - r0), t0 + ut * (t1 - t0)
