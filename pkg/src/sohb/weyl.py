"""Integrals of class functions over SO(n) via the Weyl integration formula.

A class function ``f`` on SO(n), ``n = 2p`` or ``2p + 1``, integrates against
the normalized Haar measure as a ``p``-dimensional torus integral::

    int f(A) dA = (2 pi)^-p  int_[0, 2pi]^p  f(R_theta) u_n(theta) dtheta

The torus integrand is smooth and periodic, so the tensor trapezoid rule on
``M^p`` equispaced nodes converges spectrally; for trigonometric polynomials
of degree below ``M`` it is exact.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._checks import check_dimension, check_random_state
from .exceptions import NoConvergence

#: largest torus dimension handled with a full tensor grid
MAX_GRID_TORUS_DIM = 4
DEFAULT_M = 64
#: nodes evaluated per vectorized chunk
CHUNK_NODES = 1 << 18


def torus_dim(n):
    return check_dimension(n) // 2


def _angles(n, theta):
    p = torus_dim(n)
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        theta = theta[None]
    if theta.shape[-1] != p:
        raise ValueError(f"SO({n}) torus points have {p} angle(s), got shape {theta.shape}")
    return theta


def c_fn(n, k, theta):
    """``Tr(R_theta^k)``: ``2 sum_j cos(k theta_j)``, plus 1 when ``n`` is odd."""
    theta = _angles(n, theta)
    return 2.0 * np.cos(k * theta).sum(axis=-1) + (n % 2)


def weyl_weight(n, theta):
    """Weyl density ``u_n`` on the maximal torus.

    ``u_2p   = 2^((p-1)^2) / p!  prod_{j<k} (cos t_j - cos t_k)^2``
    ``u_2p+1 = 2^(p(p-1)) / p!  prod_{j<k} (cos t_j - cos t_k)^2  prod_j (1 - cos t_j)``
    """
    theta = _angles(n, theta)
    p = theta.shape[-1]
    c = np.cos(theta)
    u = np.ones(theta.shape[:-1])
    for j in range(p):
        for k in range(j + 1, p):
            u = u * (c[..., j] - c[..., k]) ** 2
    if n % 2:
        u = u * np.prod(1.0 - c, axis=-1) * (2.0 ** (p * (p - 1)) / math.factorial(p))
    else:
        u = u * (2.0 ** ((p - 1) ** 2) / math.factorial(p))
    return u


def torus_rotation(n, theta):
    """Block-diagonal rotation ``R_theta`` with planar blocks, trailing 1 if ``n`` odd."""
    theta = _angles(n, theta)
    p = theta.shape[-1]
    R = np.zeros(theta.shape[:-1] + (n, n))
    c, s = np.cos(theta), np.sin(theta)
    for j in range(p):
        a = 2 * j
        R[..., a, a] = c[..., j]
        R[..., a, a + 1] = -s[..., j]
        R[..., a + 1, a] = s[..., j]
        R[..., a + 1, a + 1] = c[..., j]
    if n % 2:
        R[..., n - 1, n - 1] = 1.0
    return R


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor trapezoid grid on ``[0, 2 pi)^p`` carrying the Weyl weight.

    ``weights`` already include ``(2 pi)^-p`` and the cell volume, so that
    ``sum(weights * g(nodes))`` approximates the Haar integral directly.
    """

    n: int
    M: int

    @property
    def p(self):
        return self.n // 2

    @property
    def size(self):
        return self.M ** self.p

    def chunks(self, max_nodes=CHUNK_NODES):
        """Yield ``(nodes, weights)`` blocks covering the grid in C order."""
        p, M = self.p, self.M
        axis = 2.0 * np.pi * np.arange(M) / M
        # split the leading axes off until a block fits in max_nodes
        lead = 0
        while lead < p and M ** (p - lead) > max_nodes:
            lead += 1
        tail = np.stack(np.meshgrid(*([axis] * (p - lead)), indexing="ij"), axis=-1).reshape(-1, p - lead)
        for idx in np.ndindex(*([M] * lead)):
            head = np.broadcast_to(axis[list(idx)], (tail.shape[0], lead))
            nodes = np.concatenate([head, tail], axis=1)
            yield nodes, weyl_weight(self.n, nodes) / self.size

    @property
    def nodes(self):
        return np.concatenate([c[0] for c in self.chunks()])

    @property
    def weights(self):
        return np.concatenate([c[1] for c in self.chunks()])


def integrate_class_function(n, g, M=DEFAULT_M):
    """Trapezoid-Weyl quadrature of a class function.

    Parameters
    ----------
    n : int
        Matrix dimension.
    g : callable
        Torus restriction ``theta -> f(R_theta)``; receives an array of shape
        ``(m, p)`` and returns ``(m,)`` or ``(m, q)`` for ``q`` integrands.
    M : int
        Nodes per angle.

    Returns
    -------
    float or ndarray of shape (q,)
    """
    n = check_dimension(n)
    if M < 8:
        raise ValueError(f"need at least 8 nodes per angle, got {M}")
    grid = QuadratureGrid(n, int(M))
    partial = []
    for nodes, w in grid.chunks():
        vals = np.asarray(g(nodes), dtype=float)
        if vals.ndim == 1:
            partial.append(np.sum(w * vals))
        else:
            partial.append(np.sum(w[:, None] * vals, axis=0))
    partial = np.asarray(partial)
    if partial.ndim == 1:
        return math.fsum(partial)
    return np.array([math.fsum(col) for col in partial.T])


def mc_class_integral(n, g, N, rng):
    """Uniform Monte Carlo on the torus cube with the Weyl weight.

    Fallback for large ``p`` where a tensor grid is unaffordable. Returns
    ``(estimate, standard_error)``.
    """
    rng = check_random_state(rng)
    p = torus_dim(n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(int(N), p))
    vals = np.asarray(g(theta), dtype=float)
    u = weyl_weight(n, theta)
    y = vals * (u if vals.ndim == 1 else u[:, None])
    return y.mean(axis=0), y.std(axis=0, ddof=1) / np.sqrt(len(y))


def converged_integral(n, g, tol=1e-12, M0=16, M_max=1024, max_nodes=1 << 27, rng=None, mc_samples=10**6):
    """Double ``M`` from ``M0`` until successive quadratures agree.

    Stops when ``|I_2M - I_M| < tol (1 + |I_2M|)`` (componentwise for vector
    integrands) and returns the finer value. For ``p > MAX_GRID_TORUS_DIM``
    the Monte Carlo fallback is used and ``tol`` bounds its standard error.

    Raises
    ------
    NoConvergence
        ``M`` would exceed ``M_max``, the grid would exceed ``max_nodes``, or
        the Monte Carlo standard error stays above ``tol``.
    """
    n = check_dimension(n)
    p = n // 2
    if p > MAX_GRID_TORUS_DIM:
        est, err = mc_class_integral(n, g, mc_samples, check_random_state(rng))
        if np.any(err > tol * (1.0 + np.abs(est))):
            raise NoConvergence(
                f"Monte Carlo fallback for n={n}: standard error {np.max(err):.3g} above tolerance {tol:g}"
            )
        return est
    M = int(M0)
    prev = integrate_class_function(n, g, M)
    while True:
        M *= 2
        if M > M_max or M**p > max_nodes:
            raise NoConvergence(f"trapezoid-Weyl quadrature for n={n} not converged at M={M // 2}")
        cur = integrate_class_function(n, g, M)
        if np.all(np.abs(cur - prev) < tol * (1.0 + np.abs(cur))):
            return cur
        prev = cur
