"""Hydrodynamic operators of the body-orientation fluid on periodic grids.

Fields are sampled on a uniform periodic grid over ``[0, L)^d``. The frame
dimension ``n`` and the number ``d`` of axes along which fields vary are
independent: derivatives along axes ``d..n-1`` are identically zero, so the
n-dimensional algebra is exercised at a memory cost of ``O(grid n^2)``.

Array layout: a scalar field has the grid shape, a vector field appends
``(n,)``, a matrix field appends ``(n, n)``.

Two discretizations of the frame connection are kept apart on purpose.
``Delta``, ``A`` and ``W_tilde`` are assembled from the skew part of
``Theta^T d_l Theta``, which makes their antisymmetry exact in floating
point. The alternative expressions (``A_tilde``, the per-column equations)
use the raw finite differences, so any discrepancy between the two sides
is pure truncation error and shrinks at the stencil order.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import son
from ._checks import check_dimension, check_kappa, check_random_state
from .coefficients import coefficients_weyl
from .exceptions import DimensionMismatch

#: centered first-derivative weights as (shift, w): f' ~ sum w (f[i+s] - f[i-s]) / h
STENCILS = {
    2: ((1, 0.5),),
    4: ((1, 2.0 / 3.0), (2, -1.0 / 12.0)),
}
DEFAULT_ORDER = 4
DEFAULT_GRID = 24
FIELD_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid with ``shape[a]`` nodes on ``[0, L)`` per axis."""

    shape: tuple
    L: float = 2.0 * math.pi

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if not 1 <= len(self.shape) <= 3:
            raise ValueError(f"grids vary along 1 to 3 axes, got {len(self.shape)}")
        if self.L <= 0:
            raise ValueError("box length must be positive")

    @classmethod
    def cube(cls, size, d=3, L=2.0 * math.pi):
        return cls((size,) * d, L)

    @property
    def d(self):
        return len(self.shape)

    @property
    def h(self):
        return tuple(self.L / s for s in self.shape)

    def coords(self):
        """Node coordinates, one array of the grid shape per axis."""
        axes = [self.L * np.arange(s) / s for s in self.shape]
        return np.meshgrid(*axes, indexing="ij")


def _check_stencil(grid, order):
    if order not in STENCILS:
        raise ValueError(f"stencil order must be 2 or 4, got {order}")
    if min(grid.shape) < 2 * len(STENCILS[order]) + 1:
        raise ValueError(f"grid {grid.shape} too small for an order-{order} stencil")


def fd_derivative(f, grid, axis, order=DEFAULT_ORDER):
    """Centered periodic difference of ``f`` along grid axis ``axis``.

    ``f`` has the grid shape as leading axes and any trailing shape.
    """
    _check_stencil(grid, order)
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    # paired differences make constants differentiate to exactly zero
    for shift, w in STENCILS[order]:
        out += w * (np.roll(f, -shift, axis=axis) - np.roll(f, shift, axis=axis))
    return out / grid.h[axis]


def _partials(f, grid, n, order):
    """``[d_0 f, ..., d_{n-1} f]`` with zeros along axes the grid does not span."""
    if n < grid.d:
        raise DimensionMismatch(f"fields of dimension {n} cannot vary along {grid.d} axes")
    out = [fd_derivative(f, grid, a, order) for a in range(grid.d)]
    out += [np.zeros_like(out[0])] * (n - grid.d)
    return out


def fd_gradient(f, grid, n=None, order=DEFAULT_ORDER):
    """Gradient of a scalar field as an ``n``-vector field (``n`` defaults to ``d``)."""
    n = grid.d if n is None else n
    return np.stack(_partials(f, grid, n, order), axis=-1)


def fd_divergence(X, grid, order=DEFAULT_ORDER):
    """``sum_l d_l X_l`` for a vector field ``X`` of shape ``grid + (n,)``."""
    X = np.asarray(X, dtype=float)
    return sum(fd_derivative(X[..., l], grid, l, order) for l in range(grid.d))


def fd_wedge_curl(X, grid, order=DEFAULT_ORDER):
    """``(grad ^ X)_ij = d_i X_j - d_j X_i``."""
    X = np.asarray(X, dtype=float)
    D = np.stack(_partials(X, grid, X.shape[-1], order), axis=-2)  # D[..., i, j] = d_i X_j
    return D - np.swapaxes(D, -1, -2)


def _check_fields(rho, theta, grid):
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if rho.shape != grid.shape or theta.shape[: grid.d] != grid.shape or theta.ndim != grid.d + 2:
        raise DimensionMismatch(f"fields {rho.shape}, {theta.shape} do not match grid {grid.shape}")
    if theta.shape[-1] != theta.shape[-2]:
        raise DimensionMismatch("rotation field must carry square matrices")
    check_dimension(theta.shape[-1])
    return rho, theta


def _T(M):
    return np.swapaxes(M, -1, -2)


@dataclass
class FieldBundle:
    """Derived tensors of one ``(rho, Theta)`` state.

    ``Delta[..., i, j, k]`` is the cyclic frame derivative of
    ``(Omega_i, Omega_j, Omega_k)``; ``A = Theta Delta_1.. Theta^T``.
    ``A_tilde_theta`` is ``-((grad ^ Omega_1) + (Omega_1 . grad)) Theta``
    built from raw differences.
    """

    grid: PeriodicGrid
    kappa: float
    rho: np.ndarray
    theta: np.ndarray
    c: dict
    grad_rho: np.ndarray
    div_omega: np.ndarray
    r: np.ndarray
    F: np.ndarray
    curl_omega1: np.ndarray
    W: np.ndarray
    Delta: np.ndarray
    A: np.ndarray
    W_tilde: np.ndarray
    advect_theta: np.ndarray
    A_tilde_theta: np.ndarray
    d_theta: list = field(repr=False)

    @property
    def n(self):
        return self.theta.shape[-1]

    @property
    def omega(self):
        """``Omega[..., :, k] = Theta e_k``; simply ``theta``, named for readability."""
        return self.theta


def compute_bundle(rho, theta, kappa, grid, order=DEFAULT_ORDER):
    """Evaluate ``r, F, W, Delta, A, W_tilde`` on a gridded state (``kappa > 0``)."""
    kappa = check_kappa(kappa, strict=True)
    rho, theta = _check_fields(rho, theta, grid)
    n = theta.shape[-1]
    t = coefficients_weyl(n, kappa)
    c = {"c1": t.c1, "c2": t.c2, "c3": t.c3, "c4": t.c4}

    dT = _partials(theta, grid, n, order)  # dT[l][..., i, k] = d_l (Omega_k)_i
    omega1 = theta[..., :, 0]
    grad_rho = fd_gradient(rho, grid, n, order)
    div = sum(dT[l][..., l, :] for l in range(grid.d))  # div[..., k] = div Omega_k
    r = np.einsum("...ik,...k->...i", theta, div)
    F = -c["c3"] * grad_rho - c["c4"] * rho[..., None] * r

    D1 = np.stack([dT[i][..., :, 0] for i in range(n)], axis=-2)  # D1[..., i, j] = d_i (Omega_1)_j
    curl = D1 - _T(D1)
    F_wedge = son.wedge_vec(F, omega1)
    W = F_wedge - c["c4"] * rho[..., None, None] * curl

    # T[a, b, c] = ((Omega_a . grad) Omega_b) . Omega_c from the skew connection
    Tabc = np.zeros(theta.shape[:-2] + (n, n, n))
    for l in range(grid.d):
        X = _T(theta) @ dT[l]
        Xi = 0.5 * (X - _T(X))  # Xi[c, b] = Omega_c . d_l Omega_b
        Tabc += theta[..., l, :, None, None] * _T(Xi)[..., None, :, :]
    Delta = Tabc + np.moveaxis(Tabc, -3, -1) + np.moveaxis(Tabc, -1, -3)

    A = theta @ Delta[..., 0, :, :] @ _T(theta)
    W_tilde = F_wedge + c["c4"] * rho[..., None, None] * A

    advect = sum(omega1[..., l, None, None] * dT[l] for l in range(grid.d))
    A_tilde_theta = -(curl @ theta + advect)
    return FieldBundle(grid, kappa, rho, theta, c, grad_rho, div, r, F, curl, W, Delta, A, W_tilde,
                       advect, A_tilde_theta, dT)


def theta_rhs(rho, theta, kappa, grid, form="orient4", order=DEFAULT_ORDER, bundle=None):
    """``d_t Theta`` from either orientation equation.

    ``orient3``: ``W Theta / rho - c2 (Omega_1 . grad) Theta``
    ``orient4``: ``W_tilde Theta / rho - (c2 - c4) (Omega_1 . grad) Theta``
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("density must be strictly positive")
    b = bundle if bundle is not None else compute_bundle(rho, theta, kappa, grid, order)
    inv_rho = 1.0 / b.rho[..., None, None]
    if form == "orient3":
        return b.W @ b.theta * inv_rho - b.c["c2"] * b.advect_theta
    if form == "orient4":
        return b.W_tilde @ b.theta * inv_rho - (b.c["c2"] - b.c["c4"]) * b.advect_theta
    raise ValueError(f"form must be 'orient3' or 'orient4', got {form!r}")


def mass_rhs(rho, theta, kappa, grid, order=DEFAULT_ORDER):
    """``d_t rho = -div(c1 rho Omega_1)``."""
    rho, theta = _check_fields(rho, theta, grid)
    c1 = coefficients_weyl(theta.shape[-1], kappa).c1
    return -fd_divergence(c1 * rho[..., None] * theta[..., :, 0], grid, order)


def omega_columns_rhs(bundle):
    """``d_t Omega_j`` from the per-column equations, with raw-difference ``delta``.

    Returns an array shaped like ``theta`` whose column ``j`` is the time
    derivative of ``Omega_j``.
    """
    b = bundle
    n, theta, rho = b.n, b.theta, b.rho
    c2, c3, c4 = b.c["c2"], b.c["c3"], b.c["c4"]
    omega1 = theta[..., :, 0]
    grad_rho = b.grad_rho
    # raw T[a, b, c] = ((Omega_a . grad) Omega_b) . Omega_c
    Tabc = np.zeros(theta.shape[:-2] + (n, n, n))
    for l in range(b.grid.d):
        X = _T(theta) @ b.d_theta[l]  # X[c, b]
        Tabc += theta[..., l, :, None, None] * _T(X)[..., None, :, :]

    def delta(a, bb, cc):
        return Tabc[..., a, bb, cc] + Tabc[..., bb, cc, a] + Tabc[..., cc, a, bb]

    out = np.empty_like(theta)
    proj = grad_rho - np.sum(grad_rho * omega1, axis=-1)[..., None] * omega1
    rest = sum(b.div_omega[..., k, None] * theta[..., :, k] for k in range(1, n))
    out[..., :, 0] = -c3 * proj / rho[..., None] - c4 * rest
    for j in range(1, n):
        Oj = theta[..., :, j]
        along = c3 * np.sum(Oj * grad_rho, axis=-1) / rho + c4 * b.div_omega[..., j]
        col = along[..., None] * omega1
        for k in range(1, n):
            if k != j:
                col = col - c4 * delta(0, j, k)[..., None] * theta[..., :, k]
        out[..., :, j] = col
    return out - (c2 - c4) * b.advect_theta


def _max_abs(x):
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def omega_component_check(rho, theta, kappa, grid, order=DEFAULT_ORDER):
    """Max discrepancy between the columns of the orient4 right side and the
    per-column equations; per column as well as overall."""
    b = compute_bundle(rho, theta, kappa, grid, order)
    lhs = theta_rhs(rho, theta, kappa, grid, "orient4", order, bundle=b)
    rhs = omega_columns_rhs(b)
    per_col = [_max_abs(lhs[..., :, j] - rhs[..., :, j]) for j in range(b.n)]
    return {"residual": max(per_col), "per_column": per_col}


def invariant_residuals(bundle):
    """Algebraic invariants: skewness of W, W_tilde, A; antisymmetry of Delta; A Omega_1 = 0."""
    b = bundle
    D = b.Delta
    return {
        "W_skew": _max_abs(b.W + _T(b.W)),
        "W_tilde_skew": _max_abs(b.W_tilde + _T(b.W_tilde)),
        "A_skew": _max_abs(b.A + _T(b.A)),
        "Delta_swap_01": _max_abs(D + np.swapaxes(D, -3, -2)),
        "Delta_swap_12": _max_abs(D + np.swapaxes(D, -2, -1)),
        "Delta_swap_02": _max_abs(D + np.swapaxes(D, -3, -1)),
        "A_omega1": _max_abs(np.einsum("...ij,...j->...i", b.A, b.theta[..., :, 0])),
    }


class SyntheticField:
    """Smooth periodic test state ``rho = 1 + a sum sin(.)``, ``Theta = exp(S(x))``.

    ``S`` is a skew-valued trigonometric polynomial with ``n_modes`` terms
    ``B_m sin(k_m . x + phi_m)``, each ``B_m`` of Frobenius norm
    ``amplitude``, and wave vectors drawn from ``{-1, 0, 1}^d``.
    """

    def __init__(self, n, d=3, n_modes=3, amplitude=0.5, rho_amplitude=0.3, seed=0):
        self.n = check_dimension(n)
        self.d = min(int(d), 3, self.n)
        if not 0 <= rho_amplitude < 1:
            raise ValueError("rho_amplitude must lie in [0, 1) to keep the density positive")
        rng = check_random_state(seed)
        self.amplitude = amplitude
        self.rho_amplitude = rho_amplitude
        self.k = [self._wavevector(rng) for _ in range(n_modes)]
        self.phase = rng.uniform(0.0, 2.0 * math.pi, n_modes)
        self.B = son.random_skew(rng, self.n, n_modes, norm=amplitude) if n_modes else np.zeros((0, n, n))
        self.k_rho = [self._wavevector(rng) for _ in range(2)]
        self.phase_rho = rng.uniform(0.0, 2.0 * math.pi, 2)

    def _wavevector(self, rng):
        while True:
            k = rng.integers(-1, 2, self.d)
            if np.any(k):
                return k

    def grid(self, size, L=2.0 * math.pi):
        return PeriodicGrid.cube(size, self.d, L)

    def sample(self, grid):
        if grid.d != self.d:
            raise DimensionMismatch(f"field varies along {self.d} axes, grid has {grid.d}")
        x = grid.coords()
        scale = 2.0 * math.pi / grid.L

        def wave(k, phi):
            return np.sin(scale * sum(k[a] * x[a] for a in range(self.d)) + phi)

        S = np.zeros(grid.shape + (self.n, self.n))
        for k, phi, B in zip(self.k, self.phase, self.B):
            S += wave(k, phi)[..., None, None] * B
        theta = son.expm_skew(S)
        rho = 1.0 + self.rho_amplitude * 0.5 * sum(wave(k, p) for k, p in zip(self.k_rho, self.phase_rho))
        return rho, theta


def uniform_state(grid, n, theta0=None, rho0=1.0):
    theta0 = np.eye(n) if theta0 is None else np.asarray(theta0, dtype=float)
    return np.full(grid.shape, float(rho0)), np.broadcast_to(theta0, grid.shape + (n, n)).copy()


@dataclass
class ConvergenceReport:
    """Max-norm discrepancies per grid size and empirical orders between successive sizes."""

    name: str
    sizes: list
    h: list
    errors: list
    orders: list

    @property
    def min_order(self):
        return min(self.orders) if self.orders else math.nan


def _orders(errors, sizes):
    out = []
    for (e0, n0), (e1, n1) in zip(zip(errors, sizes), zip(errors[1:], sizes[1:])):
        out.append(math.log(e0 / e1) / math.log(n1 / n0) if e0 > 0 and e1 > 0 else math.inf)
    return out


def check_equivalence(state, kappa, sizes=(DEFAULT_GRID, 2 * DEFAULT_GRID), order=DEFAULT_ORDER, L=2.0 * math.pi):
    """Refinement study of the two identities linking the orientation equations.

    ``state`` is a :class:`SyntheticField` (anything with ``d`` and
    ``sample(grid)``). Returns reports for ``A Theta - A_tilde Theta`` and for
    the orient3 minus orient4 right sides, each over the grid ``sizes``.
    """
    sizes = [int(s) for s in sizes]
    eq, rhs = [], []
    for s in sizes:
        grid = PeriodicGrid.cube(s, state.d, L)
        rho, theta = state.sample(grid)
        b = compute_bundle(rho, theta, kappa, grid, order)
        eq.append(_max_abs(b.A @ b.theta - b.A_tilde_theta))
        rhs.append(_max_abs(theta_rhs(rho, theta, kappa, grid, "orient3", order, bundle=b)
                            - theta_rhs(rho, theta, kappa, grid, "orient4", order, bundle=b)))
    hs = [L / s for s in sizes]
    return (ConvergenceReport("A_vs_A_tilde", sizes, hs, eq, _orders(eq, sizes)),
            ConvergenceReport("orient3_vs_orient4", sizes, hs, rhs, _orders(rhs, sizes)))


def omega_convergence(state, kappa, sizes=(DEFAULT_GRID, 2 * DEFAULT_GRID), order=DEFAULT_ORDER, L=2.0 * math.pi):
    errs = []
    for s in sizes:
        grid = PeriodicGrid.cube(s, state.d, L)
        rho, theta = state.sample(grid)
        errs.append(omega_component_check(rho, theta, kappa, grid, order)["residual"])
    return ConvergenceReport("omega_components", list(sizes), [L / s for s in sizes], errs, _orders(errs, list(sizes)))


def tangency_residual(rhs, theta):
    """Max of ``|M + M^T|`` with ``M = (d_t Theta) Theta^T``."""
    M = rhs @ _T(theta)
    return _max_abs(M + _T(M))


# -- dumps -----------------------------------------------------------------

def _header(grid, n):
    cols = ["rho"] + [f"theta_{i}{j}" for i in range(n) for j in range(n)]
    return {
        "format": "sohb-field",
        "version": FIELD_FORMAT_VERSION,
        "grid": list(grid.shape),
        "L": grid.L,
        "spacing": list(grid.h),
        "n": n,
        "layout": "C-order nodes; theta row-major per node",
        "columns": cols,
    }


def write_fields(path, grid, rho, theta, fmt=None):
    """Dump ``(rho, Theta)`` as CSV (``fmt='csv'``) or flat little-endian float64 (``'bin'``).

    Both start with a one-line JSON header describing the grid. CSV rows
    also carry node coordinates ``x0..x{d-1}``.
    """
    rho, theta = _check_fields(rho, theta, grid)
    n = theta.shape[-1]
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "bin")
    head = _header(grid, n)
    data = np.concatenate([rho.reshape(-1, 1), theta.reshape(-1, n * n)], axis=1)
    if fmt == "csv":
        coords = np.stack([c.reshape(-1) for c in grid.coords()], axis=1)
        names = [f"x{a}" for a in range(grid.d)] + head["columns"]
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(head) + "\n")
            fh.write(",".join(names) + "\n")
            for row in np.concatenate([coords, data], axis=1):
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write((json.dumps(head) + "\n").encode())
            fh.write(data.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown field format {fmt!r}")


def read_fields(path):
    """Inverse of :func:`write_fields`; returns ``(grid, rho, theta)``."""
    with open(path, "rb") as fh:
        first = fh.readline().decode()
        if first.startswith("# "):
            head = json.loads(first[2:])
            fh.readline()
            rows = np.loadtxt(fh, delimiter=",", ndmin=2)
            data = rows[:, len(head["grid"]):]
        else:
            head = json.loads(first)
            data = np.frombuffer(fh.read(), dtype="<f8").reshape(-1, 1 + head["n"] ** 2)
    grid = PeriodicGrid(tuple(head["grid"]), head["L"])
    n = head["n"]
    return grid, data[:, 0].reshape(grid.shape).copy(), data[:, 1:].reshape(grid.shape + (n, n)).copy()
