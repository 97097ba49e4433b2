import csv
import json

import numpy as np
import pytest

from elasticsurf.dp import dp_partial_registration
from elasticsurf.driver import (
    IdentityRotation,
    InitMode,
    RunConfig,
    emit_outputs,
    prepare,
    run_registration,
)
from elasticsurf.grid import GridPartition, SurfaceSample
from elasticsurf.rotation import optimal_rotation
from elasticsurf.shape import compute_shape_field
from elasticsurf.zoo import GammaSpec, SurfaceSpec, generate, perturb


def pair(M=31, gamma=(1.25, 1.0), k=2):
    a = generate(SurfaceSpec.parse(f"sine2:{k}"), M, M)
    b = perturb(generate(SurfaceSpec.parse(f"sine1:{k}"), M, M), GammaSpec(*gamma))
    return a, b


@pytest.fixture(scope="module")
def small_run():
    a, b = pair()
    return run_registration(a, b, RunConfig(max_outer_rounds=3))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"KL": 0}, {"grad_tol": 0.0}, {"eps_zero": -1.0}, {"step_safety": 1.0}, {"max_outer_rounds": 0}, {"init_mode": "random"}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            RunConfig(**kwargs)

    def test_strings_coerced(self):
        cfg = RunConfig(init_mode="identity", identity_rotation="optimal")
        assert cfg.init_mode is InitMode.IDENTITY
        assert cfg.identity_rotation is IdentityRotation.OPTIMAL
        assert cfg.as_dict()["init_mode"] == "identity"


class TestRun:
    def test_identical_inputs(self):
        s = generate(SurfaceSpec.parse("sine1:2"))
        assert run_registration(s, s).squared_distance <= 1e-4

    def test_trace_invariants(self, small_run):
        trace = small_run.energy_trace
        assert all(b <= a for a, b in zip(trace, trace[1:]))
        assert small_run.squared_distance == trace[-1]
        assert small_run.initial_energy == trace[0]
        assert small_run.inner_iterations == sum(s.accepted for s in small_run.steps)
        assert small_run.h_final.boundary_violation() <= 1e-15
        assert np.min(small_run.h_final.jacobian_det()) > 0

    def test_no_steps_reproduces_dp(self):
        a, b = pair()
        res = run_registration(a, b, RunConfig(max_inner_iters=0))
        q1, q2 = compute_shape_field(prepare(a)), compute_shape_field(prepare(b))
        R, h, energy = dp_partial_registration(q1, q2)
        assert res.squared_distance == energy
        np.testing.assert_array_equal(res.rotation, R)
        np.testing.assert_array_equal(res.h_final.h, h.h)
        assert res.init_used == "dp"

    def test_identity_start_rotations(self):
        a, b = pair(21, (1.25, 1.25))
        plain = run_registration(a, b, RunConfig(init_mode="identity", max_inner_iters=0))
        aligned = run_registration(a, b, RunConfig(init_mode="identity", identity_rotation="optimal", max_inner_iters=0))
        np.testing.assert_array_equal(plain.rotation, np.eye(3))
        q1, q2 = compute_shape_field(prepare(a)), compute_shape_field(prepare(b))
        np.testing.assert_allclose(aligned.rotation, optimal_rotation(q2, q1))
        assert plain.h_final.is_identity() and aligned.h_final.is_identity()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="grid dimensions"):
            run_registration(generate(SurfaceSpec.parse("sine1:1"), 11, 11), generate(SurfaceSpec.parse("sine1:1"), 11, 13))

    def test_partition_mismatch(self):
        a = generate(SurfaceSpec.parse("sine1:1"), 5, 5)
        b = SurfaceSample(GridPartition(np.array([0, 0.1, 0.5, 0.7, 1.0]), a.partition.t_knots), a.points)
        with pytest.raises(ValueError, match="different partitions"):
            run_registration(a, b)

    def test_deterministic(self):
        a, b = pair(21)
        cfg = RunConfig(max_outer_rounds=2)
        one = run_registration(a, b, cfg).to_json_dict()
        two = run_registration(a, b, cfg).to_json_dict()
        one.pop("wall_time_s"), two.pop("wall_time_s")
        assert json.dumps(one) == json.dumps(two)

    @pytest.mark.slow
    def test_swapped_roles(self):
        a, b = pair(51)
        forward = run_registration(a, b).squared_distance
        backward = run_registration(b, a).squared_distance
        assert abs(forward - backward) <= 0.02


class TestOutputs:
    def test_json_schema(self, small_run, tmp_path):
        out = tmp_path / "res.json"
        emit_outputs(small_run, out_json=out)
        data = json.loads(out.read_text())
        for key in ("squared_distance", "rotation", "inner_iterations", "outer_rounds", "energy_trace", "wall_time_s", "config"):
            assert key in data
        assert len(data["rotation"]) == 9
        np.testing.assert_allclose(np.reshape(data["rotation"], (3, 3)), small_run.rotation)
        assert data["config"]["KL"] == 5

    def test_boundary_of_flat_patch(self, tmp_path):
        p = GridPartition.uniform(5, 5)
        m = p.mesh()
        flat = SurfaceSample(p, np.concatenate([m, np.zeros(p.shape + (1,))], axis=-1))
        res = run_registration(flat, flat, RunConfig(init_mode="identity"))
        path = tmp_path / "b.csv"
        emit_outputs(res, boundary_csv=path)
        rows = list(csv.DictReader(path.open()))
        assert len(rows) == 2 * 4 * 5
        pts = {(r["surface"], r["edge"]): [] for r in rows}
        for r in rows:
            pts[r["surface"], r["edge"]].append([float(r[c]) for c in "xyz"])
        edge = np.linspace(0, 1, 5)
        for surface in ("first", "second"):
            np.testing.assert_allclose(pts[surface, "r0"], np.stack([0 * edge, edge, 0 * edge], 1), atol=1e-12)
            np.testing.assert_allclose(pts[surface, "t1"], np.stack([edge, 0 * edge + 1, 0 * edge], 1), atol=1e-12)

    def test_dump_h(self, small_run, tmp_path):
        path = tmp_path / "h.txt"
        emit_outputs(small_run, dump_h=path)
        lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
        M, N = map(int, lines[0].split())
        vals = np.loadtxt(lines[3:])
        assert vals.shape == (M * N, 2)
        np.testing.assert_allclose(vals.reshape(N, M, 2).transpose(1, 0, 2), small_run.h_final.h)

    def test_unwritable_path(self, small_run, tmp_path):
        with pytest.raises(OSError):
            emit_outputs(small_run, out_json=tmp_path / "missing" / "x.json")
