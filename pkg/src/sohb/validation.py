"""Monte Carlo certification of the kinetic-level identities.

Test distributions are finite mixtures of von Mises laws: their densities are
cheap to evaluate and their first moments are known in closed form
(``int A M_Theta dA = c1 Theta``), so every residual has an exact target.
All integrals are Haar Monte Carlo or self-normalized importance sampling
with reported standard errors.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import son
from ._checks import check_random_state, check_skew
from ._parallel import chunked_map
from .coefficients import coefficients_trace_moments, coefficients_weyl
from .von_mises import MCEstimate, VonMises, mc_expectation


class MixtureDistribution:
    """``f(A) = sum_i w_i M_i(A)`` with ``M_i`` von Mises laws on a common SO(n)."""

    def __init__(self, components):
        components = [(float(w), vm) for w, vm in components]
        if not components:
            raise ValueError("a mixture needs at least one component")
        if any(w < 0 for w, _ in components):
            raise ValueError("mixture weights must be nonnegative")
        dims = {vm.n for _, vm in components}
        if len(dims) != 1:
            raise ValueError(f"components live on different groups: SO({sorted(dims)})")
        self.components = components

    @property
    def n(self):
        return self.components[0][1].n

    @property
    def rho(self):
        return sum(w for w, _ in self.components)

    @property
    def common_kappa(self):
        kappas = {vm.kappa for _, vm in self.components}
        return kappas.pop() if len(kappas) == 1 else None

    def density(self, A):
        return sum(w * vm.density(A) for w, vm in self.components)

    def first_moment(self):
        """Exact ``J_f = sum_i w_i c1(kappa_i) Theta_i``."""
        return sum(w * coefficients_weyl(vm.n, vm.kappa).c1 * vm.theta for w, vm in self.components)

    @classmethod
    def random(cls, rng, n, n_components=3, kappa_range=(0.5, 2.0), weight_range=(0.2, 1.0)):
        rng = check_random_state(rng)
        comps = []
        for _ in range(n_components):
            w = rng.uniform(*weight_range)
            comps.append((w, VonMises(son.haar_sample(rng, n), rng.uniform(*kappa_range))))
        return cls(comps)


@dataclass
class MixtureMoments:
    rho: float
    J: np.ndarray
    theta: np.ndarray
    J_mc: np.ndarray
    J_mc_stderr: np.ndarray


def _haar_mean(func, n, N, rng):
    """Haar Monte Carlo mean of ``func(A)`` with per-entry standard errors."""

    def chunk(r, m):
        vals = np.asarray(func(son.haar_sample(r, n, m)), dtype=float).reshape(m, -1)
        return vals.sum(axis=0), (vals * vals).sum(axis=0)

    parts = chunked_map(chunk, check_random_state(rng), N)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / N
    var = np.maximum(s2 / N - mean * mean, 0.0) * N / (N - 1)
    probe = np.asarray(func(np.eye(n)[None]), dtype=float)
    shape = probe.shape[1:]
    return mean.reshape(shape), np.sqrt(var / N).reshape(shape)


def moments_of(f, N, rng):
    """Density, first moment and mean frame of a mixture.

    ``J`` is the exact first moment; ``J_mc`` is an independent Haar Monte
    Carlo estimate of ``int f(A) A dA`` for cross-checking it.
    """
    J = f.first_moment()
    theta = son.project_to_rotation(J)
    J_mc, err = _haar_mean(lambda A: f.density(A)[:, None, None] * A, f.n, N, rng)
    return MixtureMoments(f.rho, J, theta, J_mc, err)


def collision_Q(f, kappa=None, theta=None):
    """Pointwise evaluator of ``Q(f)(A) = rho_f M_{Theta_f}(A) - f(A)``.

    ``kappa`` is the concentration of the relaxation target; it defaults to
    the components' common concentration. Passing ``theta`` replaces
    ``Theta_f`` (used for negative controls).
    """
    if kappa is None:
        kappa = f.common_kappa
        if kappa is None:
            raise ValueError("components have different concentrations; pass kappa explicitly")
    if theta is None:
        theta = son.project_to_rotation(f.first_moment())
    target = VonMises(theta, kappa)
    rho = f.rho

    def Q(A):
        return rho * target.density(A) - f.density(A)

    Q.theta = theta
    Q.kappa = kappa
    return Q


class GCIResiduals(NamedTuple):
    r0: float
    r1: np.ndarray
    r0_stderr: float
    r1_stderr: np.ndarray


def gci_residuals(f, N, rng, kappa=None, theta=None):
    """Monte Carlo ``int Q(f) dA`` and ``int Q(f) (A Theta^T - Theta A^T) dA``.

    Both vanish for every ``f`` when ``Theta = Theta_f``; ``theta`` overrides
    the frame used in both the collision operator and the invariant.
    """
    if N < 10_000:
        raise ValueError(f"need N >= 1e4 samples, got {N}")
    Q = collision_Q(f, kappa, theta)
    th = Q.theta

    def integrand(A):
        q = Q(A)
        psi = A @ th.T - th @ np.swapaxes(A, -1, -2)
        n = A.shape[-1]
        out = np.empty((len(A), 1 + n * n))
        out[:, 0] = q
        out[:, 1:] = (q[:, None, None] * psi).reshape(len(A), -1)
        return out

    n = f.n
    mean, err = _haar_mean(integrand, n, N, rng)
    return GCIResiduals(float(mean[0]), mean[1:].reshape(n, n), float(err[0]), err[1:].reshape(n, n))


def operator_L_mc(P, kappa, N, rng):
    """Importance-sampling estimate of ``L(P) = int (A . P) (A - A^T)/2 M_Id dA``."""
    P = check_skew(P)
    vm = VonMises(np.eye(P.shape[0]), kappa)

    def h(A):
        return son.matrix_inner(A, P)[:, None, None] * 0.5 * (A - np.swapaxes(A, -1, -2))

    return mc_expectation(vm, h, N, rng)


def operator_B_mc(P, Q, kappa, N, rng):
    """Estimate of ``B(P, Q) = int (A . P)(A . Q)(A + A^T)/2 M_Id dA``."""
    P = check_skew(P, "P")
    Q = check_skew(Q, "Q")
    vm = VonMises(np.eye(P.shape[0]), kappa)

    def h(A):
        coef = son.matrix_inner(A, P) * son.matrix_inner(A, Q)
        return coef[:, None, None] * 0.5 * (A + np.swapaxes(A, -1, -2))

    return mc_expectation(vm, h, N, rng)


def operator_L_closed(P, kappa):
    P = check_skew(P)
    return coefficients_trace_moments(P.shape[0], kappa).C2 * P


def operator_B_closed(P, Q, kappa):
    """``C3 Tr(PQ) Id + C4 ((PQ + QP)/2 - Tr(PQ)/n Id)``."""
    P = check_skew(P, "P")
    Q = check_skew(Q, "Q")
    n = P.shape[0]
    t = coefficients_trace_moments(n, kappa)
    tr = np.trace(P @ Q)
    I = np.eye(n)
    return t.C3 * tr * I + t.C4 * (0.5 * (P @ Q + Q @ P) - tr / n * I)


def within_sigma(est, err, expected, k=3.0, mode="entrywise", atol=1e-12):
    """Whether a Monte Carlo estimate is consistent with ``expected``.

    ``entrywise``: every ``|est - expected| <= k err + atol``.
    ``norm``: ``||est - expected||_F <= k ||err||_F + atol``.
    Entries with zero standard error must match to ``atol``.
    """
    d = np.abs(np.asarray(est, dtype=float) - np.asarray(expected, dtype=float))
    err = np.asarray(err, dtype=float)
    if mode == "entrywise":
        return bool(np.all(d <= k * err + atol))
    if mode == "norm":
        return bool(np.linalg.norm(d) <= k * np.linalg.norm(err) + atol)
    raise ValueError(f"unknown mode {mode!r}")


def z_scores(est, err, expected):
    d = np.asarray(est, dtype=float) - np.asarray(expected, dtype=float)
    err = np.asarray(err, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(err > 0, d / np.where(err > 0, err, 1.0), np.where(np.abs(d) <= 1e-12, 0.0, np.inf))
    return z


__all__ = [
    "MCEstimate",
    "MixtureDistribution",
    "MixtureMoments",
    "GCIResiduals",
    "moments_of",
    "collision_Q",
    "gci_residuals",
    "operator_L_mc",
    "operator_B_mc",
    "operator_L_closed",
    "operator_B_closed",
    "within_sigma",
    "z_scores",
]
