import numpy as np
import pytest

from clap_estimate.lie import Pose, so3_exp


def random_rotation(rng, max_angle=np.pi):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return so3_exp(axis * rng.uniform(0, max_angle))


def random_pose(rng, max_angle=np.pi, scale=3.0):
    return Pose(random_rotation(rng, max_angle), rng.normal(scale=scale, size=3))


def random_gl3_near_identity(rng, spread=0.5):
    """Sample in the principal-log domain: exp of a bounded generator."""
    from scipy.linalg import expm

    A = rng.uniform(-1, 1, size=(3, 3)) * spread
    return expm(A)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
