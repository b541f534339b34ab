import math

import numpy as np
import pytest

from sohb import son, weyl
from sohb.exceptions import NoConvergence


def test_c_fn_matches_trace_of_torus_rotation(rng):
    for n in (3, 4, 5, 6):
        th = rng.uniform(0, 2 * np.pi, (7, n // 2))
        R = weyl.torus_rotation(n, th)
        for k in (1, 2, 3):
            Rk = np.linalg.matrix_power(R, k)
            np.testing.assert_allclose(weyl.c_fn(n, k, th), np.trace(Rk, axis1=1, axis2=2), atol=1e-13)


def test_weyl_weight_so3_closed_form():
    # SO(3): u_3(t) = 1 - cos t = 2 sin^2(t/2)
    t = np.linspace(0, 2 * np.pi, 9)[:, None]
    np.testing.assert_allclose(weyl.weyl_weight(3, t), 1 - np.cos(t[:, 0]))


def test_weyl_weight_so4_closed_form():
    th = np.array([[0.3, 1.1]])
    expected = 2.0 / 2.0 * (np.cos(0.3) - np.cos(1.1)) ** 2
    assert weyl.weyl_weight(4, th)[0] == pytest.approx(expected)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
def test_normalization(n):
    assert weyl.integrate_class_function(n, lambda th: np.ones(len(th)), M=16) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_quadrature_matches_haar_mc(rng, n):
    # <exp(Tr A)> by quadrature vs plain Haar Monte Carlo
    q = weyl.integrate_class_function(n, lambda th: np.exp(weyl.c_fn(n, 1, th)))
    A = son.haar_sample(rng, n, 200_000)
    f = np.exp(np.trace(A, axis1=1, axis2=2))
    assert abs(f.mean() - q) < 4 * f.std() / math.sqrt(len(f))


def test_vector_integrand_and_chunking():
    n = 5
    g = lambda th: np.stack([weyl.c_fn(n, 1, th) ** 2, weyl.c_fn(n, 2, th)], axis=1)
    out = weyl.integrate_class_function(n, g, M=32)
    # (Tr A)^2 integrates to 1 and Tr A^2 to 1 on SO(n), n >= 3
    np.testing.assert_allclose(out, [1.0, 1.0], atol=1e-12)
    grid = weyl.QuadratureGrid(6, 8)
    blocks = list(grid.chunks(max_nodes=10))
    assert sum(len(b[0]) for b in blocks) == grid.size
    assert sum(b[1].sum() for b in blocks) == pytest.approx(1.0)


def test_converged_integral_and_failure():
    val = weyl.converged_integral(4, lambda th: np.exp(3.0 * weyl.c_fn(4, 1, th)))
    ref = weyl.integrate_class_function(4, lambda th: np.exp(3.0 * weyl.c_fn(4, 1, th)), M=256)
    assert val == pytest.approx(ref, rel=1e-12)
    with pytest.raises(NoConvergence):
        weyl.converged_integral(4, lambda th: np.exp(200.0 * (weyl.c_fn(4, 1, th) - 4)), M_max=32)


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        weyl.integrate_class_function(2, lambda th: 1.0)
    with pytest.raises(ValueError):
        weyl.integrate_class_function(3, lambda th: np.ones(len(th)), M=4)
    with pytest.raises(ValueError):
        weyl.c_fn(5, 1, np.zeros((2, 3)))
