"""Registration driver: initialization, descent loop, rotation updates, results."""
from __future__ import annotations

import csv
import enum
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .basis import SampledBasis
from .dp import DpConfig, DpResult, dp_partial_registration
from .gradient import StepReport, assemble_gradient, take_step
from .grid import SurfaceSample, bilinear_sample, normalize_unit_area, scale_partition, write_grid_file
from .rotation import optimal_rotation
from .shape import DiffeoField, ShapeField, compute_shape_field, group_action, l2_norm_sq

log = logging.getLogger(__name__)


class InitMode(str, enum.Enum):
    DP = "dp"
    IDENTITY = "identity"


class IdentityRotation(str, enum.Enum):
    """Starting rotation when gradient descent starts from the identity map."""

    IDENTITY = "identity"
    OPTIMAL = "optimal"


@dataclass
class RunConfig:
    init_mode: InitMode = InitMode.DP
    identity_rotation: IdentityRotation = IdentityRotation.IDENTITY
    KL: int = 5
    eps_zero: float = 1e-4
    eps_progress: float = 1e-4
    grad_tol: float = 1e-4
    max_inner_iters: int = 200
    max_outer_rounds: int = 10
    step_safety: float = 0.9
    max_halvings: int = 30
    dp: DpConfig = field(default_factory=DpConfig)

    def __post_init__(self):
        self.init_mode = InitMode(self.init_mode)
        self.identity_rotation = IdentityRotation(self.identity_rotation)
        if self.KL < 1:
            raise ValueError("KL must be at least 1")
        for name in ("eps_zero", "eps_progress", "grad_tol", "step_safety"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.step_safety < 1:
            raise ValueError("step_safety must be below 1")
        if self.max_inner_iters < 0 or self.max_outer_rounds < 1:
            raise ValueError("max_inner_iters >= 0 and max_outer_rounds >= 1 required")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["init_mode"] = self.init_mode.value
        d["identity_rotation"] = self.identity_rotation.value
        d["dp"] = {"moves": [list(m) for m in self.dp.moves], "max_rounds": self.dp.max_rounds, "tol": self.dp.tol}
        return d


@dataclass
class RegistrationResult:
    squared_distance: float
    rotation: np.ndarray
    h_final: DiffeoField
    inner_iterations: int
    outer_rounds: int
    energy_trace: list[float]
    wall_time: float
    initial_energy: float = float("nan")
    init_used: str = ""
    steps: list[StepReport] = field(default_factory=list, repr=False)
    dp_result: Optional[DpResult] = field(default=None, repr=False)
    surfaces: Optional[tuple[SurfaceSample, SurfaceSample]] = field(default=None, repr=False)
    config: Optional[RunConfig] = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "squared_distance": self.squared_distance,
            "rotation": [float(x) for x in np.asarray(self.rotation).ravel()],
            "inner_iterations": self.inner_iterations,
            "outer_rounds": self.outer_rounds,
            "energy_trace": [float(e) for e in self.energy_trace],
            "wall_time_s": self.wall_time,
            "initial_energy": self.initial_energy,
            "init_used": self.init_used,
            "config": self.config.as_dict() if self.config else {},
        }


def _energy(q1_rot: ShapeField, q2_tilde: ShapeField) -> float:
    return l2_norm_sq(ShapeField(q1_rot.partition, q1_rot.q - q2_tilde.q))


def prepare(s: SurfaceSample) -> SurfaceSample:
    """Scale the partition onto the unit square and the surface to unit area."""
    return normalize_unit_area(SurfaceSample(scale_partition(s.partition), s.points))


def run_registration(s1: SurfaceSample, s2: SurfaceSample, cfg: Optional[RunConfig] = None) -> RegistrationResult:
    """Register ``s2`` onto ``s1``: ``s1`` is rotated, ``s2`` reparametrized."""
    cfg = cfg or RunConfig()
    start = time.perf_counter()
    if s1.partition.shape != s2.partition.shape:
        raise ValueError(f"grid dimensions differ: {s1.partition.shape} vs {s2.partition.shape}")
    s1, s2 = prepare(s1), prepare(s2)
    if not s1.partition.same_as(s2.partition):
        raise ValueError("surfaces are sampled on different partitions; resample first")
    p = s1.partition
    q1, q2 = compute_shape_field(s1), compute_shape_field(s2)

    # Step 1: initial rotation and reparametrization
    identity = DiffeoField.identity(p)
    R_id = optimal_rotation(q2, q1)
    e_id = _energy(q1.rotated(R_id), q2)
    dp_res = None
    R, h, energy, init_used = R_id, identity, e_id, InitMode.IDENTITY.value
    if cfg.init_mode is InitMode.IDENTITY and cfg.identity_rotation is IdentityRotation.IDENTITY:
        R = np.eye(3)
        energy = _energy(q1, q2)
    elif cfg.init_mode is InitMode.DP:
        dp_res = dp_partial_registration(q1, q2, cfg.dp)
        if dp_res.energy <= e_id:
            R, h, energy, init_used = dp_res.rotation, dp_res.h, dp_res.energy, InitMode.DP.value
        else:
            log.info("identity start beats DP start (%.4g < %.4g)", e_id, dp_res.energy)
    q2_tilde = group_action(q2, h)
    initial_energy = energy
    trace = [energy]
    steps: list[StepReport] = []
    basis = SampledBasis(p, cfg.KL)
    inner_total = 0
    outer = 0

    while energy > cfg.eps_zero and cfg.max_inner_iters > 0:
        outer += 1
        q1_rot = q1.rotated(R)
        e_round_start = energy
        # Step 2: descent over reparametrizations with the rotation fixed
        for _ in range(cfg.max_inner_iters):
            grad = assemble_gradient(q1_rot, q2_tilde, basis)
            if grad.grad_norm <= cfg.grad_tol:
                break
            h, q2_tilde, report = take_step(
                q1_rot, q2, h, q2_tilde, energy, basis, cfg.step_safety, cfg.max_halvings, grad=grad
            )
            steps.append(report)
            if not report.accepted:
                break
            inner_total += 1
            prev, energy = energy, report.energy_after
            if not np.isfinite(energy):
                raise FloatingPointError("energy became non-finite")
            trace.append(energy)
            if energy <= cfg.eps_zero or prev - energy < cfg.eps_progress * prev:
                break
        if energy <= cfg.eps_zero:
            break
        # Step 3: re-optimize the rotation for the current reparametrization
        R_new = optimal_rotation(q2_tilde, q1)
        e_rot = _energy(q1.rotated(R_new), q2_tilde)
        if e_rot < energy:
            R, energy = R_new, e_rot
            trace.append(energy)
        if energy <= cfg.eps_zero or outer >= cfg.max_outer_rounds:
            break
        if e_round_start - energy < cfg.eps_progress * e_round_start:
            break

    return RegistrationResult(
        squared_distance=energy,
        rotation=R,
        h_final=h,
        inner_iterations=inner_total,
        outer_rounds=outer,
        energy_trace=trace,
        wall_time=time.perf_counter() - start,
        initial_energy=initial_energy,
        init_used=init_used,
        steps=steps,
        dp_result=dp_res,
        surfaces=(s1, s2),
        config=cfg,
    )


# --- outputs -----------------------------------------------------------------

def _edges(values: np.ndarray):
    """Boundary polylines of a grid: r=0, r=1, t=0, t=1 edges."""
    return {
        "r0": values[0, :],
        "r1": values[-1, :],
        "t0": values[:, 0],
        "t1": values[:, -1],
    }


def boundary_polylines(s1: SurfaceSample, s2: SurfaceSample, R: np.ndarray, h: DiffeoField) -> dict:
    """Edges of ``R s1`` and of ``s2`` reparametrized by ``h``."""
    first = s1.points @ np.asarray(R).T
    second = bilinear_sample(s2.points, s2.partition, h.h[..., 0], h.h[..., 1])
    return {"first": _edges(first), "second": _edges(second)}


def write_boundary_csv(path, polylines: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["surface", "edge", "index", "x", "y", "z"])
        for surface, edges in polylines.items():
            for edge, pts in edges.items():
                for idx, (x, y, z) in enumerate(pts):
                    w.writerow([surface, edge, idx, repr(float(x)), repr(float(y)), repr(float(z))])


def emit_outputs(res: RegistrationResult, out_json=None, boundary_csv=None, dump_h=None) -> None:
    if out_json is not None:
        with open(out_json, "w") as fh:
            json.dump(res.to_json_dict(), fh, indent=2)
            fh.write("\n")
    if boundary_csv is not None:
        if res.surfaces is None:
            raise ValueError("result carries no surfaces for boundary output")
        s1, s2 = res.surfaces
        write_boundary_csv(boundary_csv, boundary_polylines(s1, s2, res.rotation, res.h_final))
    if dump_h is not None:
        with open(dump_h, "w") as fh:
            write_grid_file(fh, res.h_final.partition, res.h_final.h, comment="reparametrization h(r, t)")
