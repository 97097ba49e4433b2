import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from elasticsurf.grid import GridPartition
from elasticsurf.shape import ShapeField

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def smooth_field(rng: np.random.Generator, p: GridPartition, dim: int = 3, terms: int = 3) -> np.ndarray:
    """Random field built from a few low-frequency trigonometric modes."""
    rr, tt = np.meshgrid(p.r_knots, p.t_knots, indexing="ij")
    out = np.zeros(p.shape + (dim,))
    for d in range(dim):
        out[..., d] = rng.normal()
        for _ in range(terms):
            a, b = rng.uniform(0.2, 2.0, size=2)
            ph = rng.uniform(0, 2 * np.pi, size=2)
            out[..., d] += rng.normal(scale=0.5) * np.cos(np.pi * a * rr + ph[0]) * np.cos(np.pi * b * tt + ph[1])
    return out


def smooth_shape(rng, p: GridPartition) -> ShapeField:
    return ShapeField(p, smooth_field(rng, p))


def random_rotation(rng) -> np.ndarray:
    Q, Rm = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(Rm))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid101():
    return GridPartition.uniform(101, 101)


# criterion number -> (passed, title, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
