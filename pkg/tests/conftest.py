import numpy as np
import pytest

from driftalign import Subspace, exp_map, orthonormalize


def random_subspace(d, k, rng):
    return orthonormalize(rng.standard_normal((d, k)))


def perturbed(base, magnitude, rng):
    """A subspace at exactly `magnitude` geodesic distance from base."""
    z = rng.standard_normal(base.basis.shape)
    tangent = z - base.basis @ (base.basis.T @ z)
    tangent *= magnitude / np.linalg.norm(tangent)
    return exp_map(base, tangent)


def line(angle):
    """The 1-D subspace of R^2 at the given angle from e1."""
    return Subspace(np.array([[np.cos(angle)], [np.sin(angle)]]))


def line_angle(s):
    """Angle in [0, pi) of a 1-D subspace of R^2."""
    x, y = s.basis[:, 0]
    return float(np.arctan2(y, x)) % np.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
