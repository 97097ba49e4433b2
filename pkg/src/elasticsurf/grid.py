"""Discretization of the parameter square and the grid-level numerics.

Every field in this package is an ``(M, N, d)`` array sampled on the tensor
grid ``r_knots x t_knots``; index ``i`` runs along ``r`` and ``j`` along ``t``.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import IO, Union

import numpy as np

AREA_EPS = 1e-12
DOMAIN_TOL = 1e-12


class SurfaceFileError(ValueError):
    """Raised when a surface file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class GridPartition:
    r_knots: np.ndarray
    t_knots: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r_knots, dtype=float)
        t = np.asarray(self.t_knots, dtype=float)
        for name, k in (("r_knots", r), ("t_knots", t)):
            if k.ndim != 1 or k.size < 2:
                raise ValueError(f"{name} needs at least 2 knots")
            if not np.all(np.isfinite(k)):
                raise ValueError(f"{name} contains non-finite values")
            if not np.all(np.diff(k) > 0):
                raise ValueError(f"{name} is not strictly increasing")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "r_knots", r)
        object.__setattr__(self, "t_knots", t)

    @property
    def shape(self) -> tuple[int, int]:
        return self.r_knots.size, self.t_knots.size

    @classmethod
    def uniform(cls, M: int, N: int) -> "GridPartition":
        return cls(np.linspace(0.0, 1.0, M), np.linspace(0.0, 1.0, N))

    def mesh(self) -> np.ndarray:
        """The identity map sampled on the grid, shape ``(M, N, 2)``."""
        rr, tt = np.meshgrid(self.r_knots, self.t_knots, indexing="ij")
        return np.stack([rr, tt], axis=-1)

    def same_as(self, other: "GridPartition") -> bool:
        return self is other or (
            np.array_equal(self.r_knots, other.r_knots)
            and np.array_equal(self.t_knots, other.t_knots)
        )


@dataclass(frozen=True, eq=False)
class SurfaceSample:
    partition: GridPartition
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (*self.partition.shape, 3):
            raise ValueError(
                f"points shape {pts.shape} does not match partition {self.partition.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("surface contains non-finite coordinates")
        object.__setattr__(self, "points", pts)


def check_shared(partition: GridPartition, other: GridPartition) -> None:
    if not partition.same_as(other):
        raise ValueError("fields are sampled on different partitions")


def scale_partition(p: GridPartition) -> GridPartition:
    """Map both knot vectors affinely onto ``[0, 1]``."""

    def _scale(k):
        out = (k - k[0]) / (k[-1] - k[0])
        out[0], out[-1] = 0.0, 1.0
        return out

    return GridPartition(_scale(p.r_knots), _scale(p.t_knots))


def _trapezoid_weights(knots: np.ndarray) -> np.ndarray:
    h = np.diff(knots)
    w = np.zeros_like(knots)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def quadrature_weights(p: GridPartition) -> np.ndarray:
    """Tensor trapezoidal weights, shape ``(M, N)``; they sum to the area of D."""
    return np.outer(_trapezoid_weights(p.r_knots), _trapezoid_weights(p.t_knots))


def integrate(values: np.ndarray, p: GridPartition) -> float:
    """Trapezoidal integral over D of a scalar ``(M, N)`` grid."""
    return float(np.sum(quadrature_weights(p) * values))


def _triangle_areas(a, b, c):
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)


def approximate_area(s: SurfaceSample) -> float:
    """Sum of the two triangle areas spanned by each grid cell."""
    c = s.points
    c00, c10 = c[:-1, :-1], c[1:, :-1]
    c01, c11 = c[:-1, 1:], c[1:, 1:]
    return float(np.sum(_triangle_areas(c00, c11, c01)) + np.sum(_triangle_areas(c00, c10, c11)))


def normalize_unit_area(s: SurfaceSample) -> SurfaceSample:
    area = approximate_area(s)
    if not area > AREA_EPS:
        raise ValueError(f"degenerate surface: approximate area {area:g}")
    return SurfaceSample(s.partition, s.points / np.sqrt(area))


def _locate(knots: np.ndarray, x: np.ndarray, name: str):
    lo, hi = knots[0], knots[-1]
    if np.any(x < lo - DOMAIN_TOL) or np.any(x > hi + DOMAIN_TOL):
        bad = x[(x < lo - DOMAIN_TOL) | (x > hi + DOMAIN_TOL)].flat[0]
        raise ValueError(f"{name}={bad!r} lies outside [{lo}, {hi}]")
    x = np.clip(x, lo, hi)
    idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, knots.size - 2)
    lam = (x - knots[idx]) / (knots[idx + 1] - knots[idx])
    return idx, lam


def bilinear_sample(field: np.ndarray, p: GridPartition, r, t) -> np.ndarray:
    """Bilinearly interpolate a ``(M, N, d)`` grid at points ``(r, t)``.

    ``r`` and ``t`` may be scalars or arrays of a common shape; the result has
    that shape followed by ``d``. Grid nodes are reproduced exactly.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    i, a = _locate(p.r_knots, r, "r")
    j, b = _locate(p.t_knots, t, "t")
    a = a[..., None]
    b = b[..., None]
    return (
        (1 - a) * (1 - b) * field[i, j]
        + a * (1 - b) * field[i + 1, j]
        + (1 - a) * b * field[i, j + 1]
        + a * b * field[i + 1, j + 1]
    )


def _endpoint_weights(x: np.ndarray) -> np.ndarray:
    """Weights of the derivative at ``x[0]`` of the polynomial through ``x``."""
    n = x.size
    w = np.empty(n)
    w[0] = np.sum(1.0 / (x[0] - x[1:]))
    for k in range(1, n):
        others = np.delete(x, [0, k])
        w[k] = np.prod(x[0] - others) / np.prod(x[k] - np.delete(x, k))
    return w


def _partial(field: np.ndarray, knots: np.ndarray, axis: int) -> np.ndarray:
    n = knots.size
    d = np.gradient(field, knots, axis=axis, edge_order=2 if n > 2 else 1)
    if n >= 4:
        # four-point one-sided stencils on the edges, exact for cubics
        f = np.moveaxis(field, axis, 0)
        out = np.moveaxis(d, axis, 0)
        lo = _endpoint_weights(knots[:4])
        hi = _endpoint_weights(knots[::-1][:4])
        out[0] = np.tensordot(lo, f[:4], axes=(0, 0))
        out[-1] = np.tensordot(hi, f[::-1][:4], axes=(0, 0))
    return d


def finite_difference_partials(field: np.ndarray, p: GridPartition):
    """Partials along ``r`` and ``t`` of a ``(M, N, ...)`` grid.

    Central three-point differences inside (non-uniform knots handled by the
    local quadratic fit) and one-sided four-point differences on the edges.
    All stencils are exact for quadratics.
    """
    field = np.asarray(field, dtype=float)
    return _partial(field, p.r_knots, 0), _partial(field, p.t_knots, 1)


# --- surface file format -----------------------------------------------------

Source = Union[str, os.PathLike, IO[bytes], IO[str], bytes]


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode()
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r") as fh:
            return fh.read()
    data = source.read()
    return data.decode() if isinstance(data, bytes) else data


def _floats(line: str, what: str) -> np.ndarray:
    try:
        vals = np.array([float(tok) for tok in line.split()])
    except ValueError:
        raise SurfaceFileError(f"malformed {what}: {line!r}") from None
    if not np.all(np.isfinite(vals)):
        raise SurfaceFileError(f"non-finite value in {what}")
    return vals


def load_surface(source: Source) -> SurfaceSample:
    """Read a surface sample from a path, a bytes object, or an open stream.

    Layout: ``M N``, then the ``M`` r-knots, then the ``N`` t-knots, then
    ``M*N`` lines ``x y z`` with the r index varying fastest. Lines starting
    with ``#`` are ignored.
    """
    lines = [ln.strip() for ln in _read_text(source).splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise SurfaceFileError("malformed header: empty file")
    head = lines[0].split()
    try:
        M, N = (int(tok) for tok in head)
    except ValueError:
        raise SurfaceFileError(f"malformed header: {lines[0]!r}") from None
    if M < 2 or N < 2:
        raise SurfaceFileError(f"malformed header: need M, N >= 2, got {M} {N}")
    if len(lines) < 3:
        raise SurfaceFileError("malformed header: missing knot lines")
    r = _floats(lines[1], "r knots")
    t = _floats(lines[2], "t knots")
    if r.size != M or t.size != N:
        raise SurfaceFileError(f"knot count mismatch: header {M} {N}, got {r.size} {t.size}")
    if not (np.all(np.diff(r) > 0) and np.all(np.diff(t) > 0)):
        raise SurfaceFileError("non-monotone knots: knot vectors must be strictly increasing")
    body = lines[3:]
    if len(body) != M * N:
        raise SurfaceFileError(f"point count mismatch: expected {M * N}, got {len(body)}")
    rows = []
    for k, ln in enumerate(body):
        row = _floats(ln, f"point line {k + 1}")
        if row.size != 3:
            raise SurfaceFileError(f"malformed point line {k + 1}: expected 3 coordinates")
        rows.append(row)
    pts = np.array(rows)
    # file order is i fastest, i.e. Fortran order over (i, j)
    points = pts.reshape(N, M, 3).transpose(1, 0, 2)
    return SurfaceSample(GridPartition(r, t), points)


def write_grid_file(stream: IO[str], p: GridPartition, values: np.ndarray, comment: str | None = None) -> None:
    """Write a ``(M, N, d)`` grid in the surface file layout (``d`` columns)."""
    M, N = p.shape
    if comment:
        for ln in comment.splitlines():
            stream.write(f"# {ln}\n")
    stream.write(f"{M} {N}\n")
    stream.write(" ".join(repr(float(x)) for x in p.r_knots) + "\n")
    stream.write(" ".join(repr(float(x)) for x in p.t_knots) + "\n")
    flat = values.transpose(1, 0, 2).reshape(M * N, -1)
    for row in flat:
        stream.write(" ".join(repr(float(x)) for x in row) + "\n")


def dumps_surface(s: SurfaceSample) -> str:
    buf = io.StringIO()
    write_grid_file(buf, s.partition, s.points)
    return buf.getvalue()
