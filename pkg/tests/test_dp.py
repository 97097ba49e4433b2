import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_rotation, smooth_shape
from oracles import brute_force
from elasticsurf.dp import (
    DpConfig,
    WarpLattice,
    coprime_moves,
    dp_partial_registration,
    path_to_warp,
    product_diffeo,
)
from elasticsurf.driver import prepare
from elasticsurf.grid import GridPartition, SurfaceSample
from elasticsurf.shape import ShapeField, compute_shape_field, registration_energy
from elasticsurf.zoo import TYPE2_TO_TYPE1, GammaSpec, SurfaceSpec, generate, perturb


def test_moves():
    mv = coprime_moves(4)
    assert len(mv) == 11
    assert (1, 1) in mv and (2, 2) not in mv and (3, 4) in mv


def test_config_validation():
    with pytest.raises(ValueError, match="contain"):
        DpConfig(moves=[(1, 2), (2, 1)])
    with pytest.raises(ValueError, match="positive"):
        DpConfig(moves=[(1, 1), (0, 1)])


@pytest.mark.parametrize("M, seed", [(8, 0), (10, 1), (12, 2)])
def test_lattice_optimum_matches_enumeration(M, seed):
    rng = np.random.default_rng(seed)
    r = np.sort(np.concatenate([[0, 1], rng.uniform(0.05, 0.95, M - 2)]))
    p = GridPartition(r, np.linspace(0, 1, 7))
    q1, q2 = smooth_shape(rng, p), smooth_shape(rng, p)
    R = random_rotation(rng)
    moves = coprime_moves(4)
    path, cost = WarpLattice(q1, q2, moves).solve(R)
    bf_path, bf_cost = brute_force(q1, q2, R, moves)
    assert cost == pytest.approx(bf_cost, rel=1e-10)
    assert path == bf_path


def test_registration_warp_is_lattice_optimum(rng):
    p = GridPartition.uniform(10, 6)
    q1, q2 = smooth_shape(rng, p), smooth_shape(rng, p)
    R0 = random_rotation(rng)
    res = dp_partial_registration(q1, q2, DpConfig(max_rounds=1, seeds=[R0]))
    bf_path, _ = brute_force(q1, q2, R0, coprime_moves(4))
    np.testing.assert_array_equal(res.gamma, path_to_warp(bf_path, p.r_knots))


def test_identical_fields(rng):
    p = GridPartition.uniform(41, 21)
    q = smooth_shape(rng, p)
    R, h, energy = dp_partial_registration(q, q)
    assert energy <= 1e-6
    np.testing.assert_allclose(R, np.eye(3), atol=1e-6)
    assert h.is_identity()


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=10)
def test_result_invariants(seed):
    rng = np.random.default_rng(seed)
    p = GridPartition.uniform(15, 9)
    q1, q2 = smooth_shape(rng, p), smooth_shape(rng, p)
    res = dp_partial_registration(q1, q2, DpConfig(seeds=[np.eye(3), random_rotation(rng)]))
    g = res.gamma
    assert g[0] == 0.0 and g[-1] == 1.0 and np.all(np.diff(g) > 0)
    assert res.h.boundary_violation() == 0.0
    np.testing.assert_array_equal(res.h.h[..., 1], p.mesh()[..., 1])
    assert np.min(res.h.jacobian_det()) > 0
    assert res.energy == pytest.approx(registration_energy(q1, q2, res.rotation, res.h), rel=1e-12, abs=1e-15)
    hist = res.energy_history
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_known_warp_recovery():
    M = 21
    p = GridPartition.uniform(M, M)
    rr, tt = np.meshgrid(p.r_knots, p.t_knots, indexing="ij")

    def surf(r, t):
        return np.stack([r, t, 0.5 * np.sin(3 * r) + 0.3 * r * t**2], axis=-1)

    g0 = GammaSpec(1.25, 1.0)
    s1 = prepare(SurfaceSample(p, surf(rr, tt)))
    s2 = prepare(SurfaceSample(p, surf(*g0(rr, tt))))
    res = dp_partial_registration(compute_shape_field(s1), compute_shape_field(s2))
    recovered = res.gamma ** 1.25
    assert np.max(np.abs(recovered - p.r_knots)) <= 2 / (M - 1)


def test_sine_pair_start():
    s1 = prepare(generate(SurfaceSpec.parse("sine2:2")))
    s2 = prepare(perturb(generate(SurfaceSpec.parse("sine1:2")), GammaSpec(1.25, 1.0)))
    R, h, energy = dp_partial_registration(compute_shape_field(s1), compute_shape_field(s2))
    assert energy <= 0.01
    assert np.max(np.abs(R - TYPE2_TO_TYPE1)) <= 0.1


def test_non_finite_costs_rejected():
    p = GridPartition.uniform(6, 5)
    q = ShapeField(p, np.full(p.shape + (3,), 1e200))
    with pytest.raises(FloatingPointError):
        with np.errstate(over="ignore", invalid="ignore"):
            WarpLattice(q, q, coprime_moves(2)).solve(np.eye(3))


def test_product_diffeo():
    p = GridPartition.uniform(5, 4)
    gamma = np.array([0, 0.1, 0.3, 0.7, 1.0])
    h = product_diffeo(gamma, p)
    np.testing.assert_array_equal(h.h[:, 2, 0], gamma)
    np.testing.assert_array_equal(h.h[..., 1], p.mesh()[..., 1])
