import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rot2(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def block_rotation(n, angles):
    """Block-diagonal rotation with the given plane angles (trailing 1 if n is odd)."""
    R = np.eye(n)
    for j, t in enumerate(angles):
        R[2 * j:2 * j + 2, 2 * j:2 * j + 2] = rot2(t)
    return R
