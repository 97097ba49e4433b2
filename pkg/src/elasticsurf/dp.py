"""Dynamic-programming partial registration by product warps h(r, t) = (gamma(r), t).

Each r-column of a shape field is treated as one point of a curve in R^{3N},
and gamma is the monotone warp minimizing the discretized energy

    int int || R q1(r, t) - q2(gamma(r), t) sqrt(gamma'(r)) ||^2 dt dr

over piecewise-linear paths on the (M x M) knot lattice. The warp search is
alternated with the optimal rotation, restarting from several seed rotations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import GridPartition, _trapezoid_weights, check_shared
from .rotation import axis_permutation_rotations, optimal_rotation
from .shape import DiffeoField, ShapeField, group_action, l2_norm_sq


def coprime_moves(max_step: int = 4) -> list[tuple[int, int]]:
    return [
        (a, b)
        for a in range(1, max_step + 1)
        for b in range(1, max_step + 1)
        if math.gcd(a, b) == 1
    ]


@dataclass
class DpConfig:
    moves: list[tuple[int, int]] = field(default_factory=coprime_moves)
    max_rounds: int = 30
    tol: float = 1e-8
    seeds: Optional[Sequence[np.ndarray]] = None

    def __post_init__(self):
        self.moves = [tuple(int(x) for x in m) for m in self.moves]
        if (1, 1) not in self.moves:
            raise ValueError("the move set must contain (1, 1)")
        if any(a < 1 or b < 1 for a, b in self.moves):
            raise ValueError("moves must have positive components")
        if self.max_rounds < 1 or not self.tol > 0:
            raise ValueError("max_rounds >= 1 and tol > 0 required")


@dataclass
class DpResult:
    rotation: np.ndarray
    h: DiffeoField
    energy: float
    gamma: np.ndarray
    lattice_cost: float
    rounds: int
    energy_history: list[float]

    def __iter__(self):
        yield from (self.rotation, self.h, self.energy)


class WarpLattice:
    """Edge costs of the warp lattice for a fixed pair of shape fields.

    Geometry (interpolation positions, slopes, segment weights) is computed
    once; only the cross term depends on the rotation.
    """

    def __init__(self, q1: ShapeField, q2: ShapeField, moves: Sequence[tuple[int, int]]):
        check_shared(q1.partition, q2.partition)
        self.partition = q1.partition
        self.moves = list(moves)
        r = self.partition.r_knots
        M = r.size
        wt = _trapezoid_weights(self.partition.t_knots)
        # column inner products: n11[i] = |q1_i|^2, n22[k] = |q2_k|^2, c22[k] = <q2_k, q2_k+1>
        self.n11 = np.einsum("j,ija,ija->i", wt, q1.q, q1.q)
        self.n22 = np.einsum("j,kja,kja->k", wt, q2.q, q2.q)
        self.c22 = np.einsum("j,kja,kja->k", wt, q2.q[:-1], q2.q[1:])
        # cross moments T[i, k, a, b] = sum_j wt_j q2[k, j, a] q1[i, j, b]
        self._cross = np.einsum("j,kja,ijb->ikab", wt, q2.q, q1.q)
        self.geometry = {}
        for a, b in self.moves:
            if a >= M or b >= M:
                continue
            i0 = np.arange(M - a)[:, None]
            k0 = np.arange(M - b)[None, :]
            slope = (r[k0 + b] - r[k0]) / (r[i0 + a] - r[i0])
            steps = []
            for m in range(a + 1):
                x = r[k0] + slope * (r[i0 + m] - r[i0])
                x = np.clip(x, r[0], r[-1])
                k = np.clip(np.searchsorted(r, x, side="right") - 1, 0, M - 2)
                lam = (x - r[k]) / (r[k + 1] - r[k])
                steps.append((m, k, lam))
            # trapezoid weights of the r-segment [r_i, r_{i+a}], per start i
            seg = np.diff(r)
            weights = np.zeros((M - a, a + 1))
            for m in range(a):
                h = seg[np.arange(M - a) + m]
                weights[:, m] += 0.5 * h
                weights[:, m + 1] += 0.5 * h
            self.geometry[(a, b)] = (slope, steps, weights)

    def edge_costs(self, R: np.ndarray) -> dict:
        """Cost arrays ``cost[(a, b)][i, k]`` of the move (a, b) from node (i, k)."""
        G12 = np.einsum("ikab,ab->ik", self._cross, np.asarray(R))
        M = self.n11.size
        out = {}
        for move, (slope, steps, weights) in self.geometry.items():
            a, _ = move
            root = np.sqrt(slope)
            total = np.zeros(slope.shape)
            rows = np.arange(M - a)[:, None]
            for m, k, lam in steps:
                n2 = (1 - lam) ** 2 * self.n22[k] + 2 * lam * (1 - lam) * self.c22[k] + lam**2 * self.n22[k + 1]
                cross = (1 - lam) * G12[rows + m, k] + lam * G12[rows + m, k + 1]
                f = self.n11[rows + m] + slope * n2 - 2.0 * root * cross
                total += weights[:, m][:, None] * f
            if not np.all(np.isfinite(total)):
                raise FloatingPointError("non-finite warp lattice cost")
            out[move] = total
        return out

    def solve(self, R: np.ndarray):
        """Optimal lattice path for rotation ``R``; returns ``(path, cost)``."""
        costs = self.edge_costs(R)
        M = self.n11.size
        D = np.full((M, M), np.inf)
        D[0, 0] = 0.0
        choice = np.full((M, M), -1, dtype=int)
        moves = list(costs)
        for i in range(1, M):
            for idx, (a, b) in enumerate(moves):
                if a > i:
                    continue
                cand = D[i - a, : M - b] + costs[(a, b)][i - a]
                better = cand < D[i, b:]
                D[i, b:][better] = cand[better]
                choice[i, b:][better] = idx
        path = [(M - 1, M - 1)]
        i, k = M - 1, M - 1
        while (i, k) != (0, 0):
            a, b = moves[choice[i, k]]
            i, k = i - a, k - b
            path.append((i, k))
        return path[::-1], float(D[M - 1, M - 1])


def path_to_warp(path: Sequence[tuple[int, int]], r: np.ndarray) -> np.ndarray:
    """Values of the piecewise-linear warp at every r knot."""
    gamma = np.empty_like(r)
    for (i0, k0), (i1, k1) in zip(path[:-1], path[1:]):
        slope = (r[k1] - r[k0]) / (r[i1] - r[i0])
        gamma[i0:i1] = r[k0] + slope * (r[i0:i1] - r[i0])
    gamma[0], gamma[-1] = r[0], r[-1]
    return gamma


def product_diffeo(gamma: np.ndarray, p: GridPartition) -> DiffeoField:
    h = p.mesh()
    h[..., 0] = np.asarray(gamma)[:, None]
    return DiffeoField(p, h)


def dp_partial_registration(q1: ShapeField, q2: ShapeField, cfg: Optional[DpConfig] = None) -> DpResult:
    """Alternate warp DP and optimal rotation from each seed rotation; keep the best.

    Unpacks as ``(rotation, h, energy)``.
    """
    cfg = cfg or DpConfig()
    lattice = WarpLattice(q1, q2, cfg.moves)
    r = q1.partition.r_knots
    seeds = cfg.seeds if cfg.seeds is not None else axis_permutation_rotations()
    best: Optional[DpResult] = None
    for seed in seeds:
        R = np.asarray(seed, dtype=float)
        state = None
        history: list[float] = []
        for rnd in range(1, cfg.max_rounds + 1):
            path, cost = lattice.solve(R)
            gamma = path_to_warp(path, r)
            h = product_diffeo(gamma, q1.partition)
            q2_tilde = group_action(q2, h)
            R_new = optimal_rotation(q2_tilde, q1)
            energy = l2_norm_sq(ShapeField(q1.partition, q1.q @ R_new.T - q2_tilde.q))
            if state is not None and energy > state.energy:
                break
            prev = state.energy if state is not None else math.inf
            history.append(energy)
            state = DpResult(R_new, h, energy, gamma, cost, rnd, history)
            R = R_new
            if prev - energy < cfg.tol * max(prev, 1e-300) or energy == 0.0:
                break
        if best is None or state.energy < best.energy:
            best = state
    return best
