"""Matrix von Mises distribution ``M_Theta(A) = exp(kappa Theta . A) / Z`` on SO(n).

Densities are with respect to normalized Haar measure. Sampling is exact
rejection from Haar proposals (envelope ``Theta . A <= n``) while the
acceptance rate stays workable, then Metropolis random walk on the group.
"""

import functools
import math
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin

from . import son
from ._checks import check_kappa, check_random_state, check_rotation, check_square
from ._parallel import chunked_map
from .coefficients import invert_c1, log_partition_function
from .exceptions import DegenerateESS, DimensionMismatch

#: switch to Metropolis below this running acceptance rate
MH_THRESHOLD = 1e-3
#: proposals observed before the running rate is trusted
ACCEPT_WINDOW = 10_000
MH_BURN_IN = 200
MH_THIN = 20
MH_TARGET = 0.4
MH_CHAINS = 64
MIN_ESS = 50


class VonMises:
    """Von Mises law on SO(n) with orientation ``theta`` and concentration ``kappa``."""

    def __init__(self, theta, kappa):
        self.theta = check_rotation(theta, "theta")
        self.kappa = check_kappa(kappa)

    @property
    def n(self):
        return self.theta.shape[0]

    @functools.cached_property
    def logZ(self):
        return log_partition_function(self.n, self.kappa)

    def __repr__(self):
        return f"VonMises(n={self.n}, kappa={self.kappa:g})"

    def log_density(self, A):
        """``kappa (Theta . A) - log Z``; accepts a single matrix or a stack."""
        A = check_square(A, "A", allow_stack=True)
        if A.shape[-1] != self.n:
            raise DimensionMismatch(f"distribution is on SO({self.n}), got {A.shape[-1]}x{A.shape[-1]}")
        return self.kappa * son.matrix_inner(A, self.theta) - self.logZ

    def density(self, A):
        return np.exp(self.log_density(A))

    @property
    def acceptance_probability(self):
        """Exact acceptance rate of Haar-proposal rejection: ``Z exp(-kappa n)``."""
        return math.exp(self.logZ - self.kappa * self.n)

    def sample(self, rng=None, size=None):
        """Draw from ``M_Theta``; ``(n, n)`` or ``(size, n, n)``."""
        rng = check_random_state(rng)
        m = 1 if size is None else int(size)
        out = self.theta @ sample_identity(self.n, self.kappa, m, rng)
        return out[0] if size is None else out


def log_density(vm, A):
    return vm.log_density(A)


def sample(vm, rng, size=None):
    return vm.sample(rng, size)


def sample_identity(n, kappa, size, rng, threshold=MH_THRESHOLD, window=ACCEPT_WINDOW):
    """``size`` draws from ``M_Id``; rejection first, Metropolis fallback.

    Rejection accepts a Haar proposal ``A`` with probability
    ``exp(kappa (Tr A - n))``. Proposals are drawn in batches sized from the
    exact acceptance rate; once ``window`` proposals have been seen and the
    running rate is below ``threshold``, the remaining draws come from
    :func:`metropolis_identity`.
    """
    rng = check_random_state(rng)
    size = int(size)
    if kappa == 0:
        return son.haar_sample(rng, n, size)
    p_acc = math.exp(log_partition_function(n, kappa) - kappa * n)
    accepted = []
    n_acc = n_prop = 0
    while n_acc < size:
        if n_prop >= window and n_acc < threshold * n_prop:
            accepted.append(metropolis_identity(n, kappa, size - n_acc, rng))
            break
        want = size - n_acc
        batch = int(min(max(math.ceil(1.2 * want / p_acc) + 8, 16), max(window, 1 << 18)))
        A = son.haar_sample(rng, n, batch)
        u = rng.random(batch)
        keep = np.log(u) < kappa * (np.trace(A, axis1=1, axis2=2) - n)
        A = A[keep][:want]
        accepted.append(A)
        n_acc += len(A)
        n_prop += batch
    return np.concatenate(accepted)[:size]


def metropolis_identity(n, kappa, size, rng, n_chains=None, burn_in=MH_BURN_IN, thin=MH_THIN, target=MH_TARGET):
    """Random-walk Metropolis for ``M_Id`` with parallel chains.

    Each step left-multiplies the state by ``exp(s K)`` with ``K`` a random
    skew direction (a symmetric proposal). The step ``s`` is adapted during
    burn-in towards acceptance ``target``. Output is chain-major: the draws
    of chain 0, then chain 1, ..., so contiguous blocks are whole chains.
    """
    rng = check_random_state(rng)
    size = int(size)
    if n_chains is None:
        n_chains = min(size, MH_CHAINS)
    per_chain = -(-size // n_chains)
    A = np.broadcast_to(np.eye(n), (n_chains, n, n)).copy()
    tr = np.trace(A, axis1=1, axis2=2)
    s = 1.0 / math.sqrt(1.0 + kappa)

    def step(A, tr, s):
        K = son.random_skew(rng, n, n_chains)
        prop = son.expm_skew(s * K) @ A
        tr_p = np.trace(prop, axis1=1, axis2=2)
        ok = np.log(rng.random(n_chains)) < kappa * (tr_p - tr)
        A[ok] = prop[ok]
        tr[ok] = tr_p[ok]
        return ok.mean()

    for i in range(burn_in):
        acc = step(A, tr, s)
        if i % 10 == 9:
            s *= math.exp(np.clip(acc - target, -0.5, 0.5))
    draws = np.empty((n_chains, per_chain, n, n))
    for j in range(per_chain):
        for _ in range(thin):
            step(A, tr, s)
        draws[:, j] = A
    return draws.reshape(-1, n, n)[:size]


class MCEstimate(NamedTuple):
    estimate: np.ndarray
    stderr: np.ndarray
    ess: float


def _is_chunk(vm, h, rng, m):
    A = son.haar_sample(rng, vm.n, m)
    w = np.exp(vm.kappa * (son.matrix_inner(A, vm.theta) - vm.n))
    H = np.asarray(h(A), dtype=float).reshape(m, -1)
    w2 = w * w
    return w.sum(), w2.sum(), w @ H, w2 @ H, w2 @ (H * H)


def mc_expectation(vm, h, N, rng):
    """Self-normalized importance sampling of ``E_{M_Theta}[h(A)]``.

    Haar proposals carry weights ``exp(kappa Theta . A)``; the standard error
    is the delta-method estimate ``sqrt(sum w^2 (h - est)^2) / sum w``.

    Parameters
    ----------
    h : callable
        Maps a stack ``(m, n, n)`` to ``(m,)`` or ``(m, ...)``.
    N : int
        Number of Haar proposals, at least 1000.

    Raises
    ------
    DegenerateESS
        Effective sample size ``(sum w)^2 / sum w^2`` below 50.
    """
    if N < 1000:
        raise ValueError(f"need N >= 1000 proposals, got {N}")
    rng = check_random_state(rng)
    probe = np.asarray(h(np.eye(vm.n)[None]), dtype=float)
    out_shape = probe.shape[1:]
    parts = chunked_map(lambda r, m: _is_chunk(vm, h, r, m), rng, N)
    sw, sw2, swh, sw2h, sw2h2 = (sum(p[i] for p in parts) for i in range(5))
    ess = sw * sw / sw2
    if ess < MIN_ESS:
        raise DegenerateESS(f"effective sample size {ess:.1f} < {MIN_ESS}")
    est = swh / sw
    var = np.maximum(sw2h2 - 2.0 * est * sw2h + est * est * sw2, 0.0)
    err = np.sqrt(var) / sw
    return MCEstimate(est.reshape(out_shape), err.reshape(out_shape), float(ess))


def sample_mean(vm, h, N, rng, n_chains=MH_CHAINS):
    """Mean of ``h`` over ``N`` exact draws from ``vm``, with a standard error.

    Uses rejection when its acceptance rate is at least ``MH_THRESHOLD``
    (independent draws, plain standard error). Otherwise runs
    ``n_chains`` independent Metropolis chains and takes the spread of the
    per-chain means, which accounts for autocorrelation. ``ess`` is the
    implied number of independent draws.
    """
    rng = check_random_state(rng)
    N = int(N)
    if vm.acceptance_probability >= MH_THRESHOLD:
        A = vm.theta @ sample_identity(vm.n, vm.kappa, N, rng, threshold=0.0)
        H = np.asarray(h(A), dtype=float).reshape(N, -1)
        est = H.mean(axis=0)
        err = H.std(axis=0, ddof=1) / math.sqrt(N)
        ess = float(N)
    else:
        per = -(-N // n_chains)
        A = vm.theta @ metropolis_identity(vm.n, vm.kappa, per * n_chains, rng, n_chains=n_chains)
        H = np.asarray(h(A), dtype=float).reshape(n_chains, per, -1)
        means = H.mean(axis=1)
        est = means.mean(axis=0)
        err = means.std(axis=0, ddof=1) / math.sqrt(n_chains)
        iid = H.reshape(n_chains * per, -1).std(axis=0, ddof=1) / math.sqrt(n_chains * per)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(err > 0, (iid / np.where(err > 0, err, 1.0)) ** 2, 1.0)
        ess = float(n_chains * per * np.min(ratio))
    probe = np.asarray(h(np.eye(vm.n)[None]), dtype=float)
    shape = probe.shape[1:]
    return MCEstimate(est.reshape(shape), err.reshape(shape), ess)


class VonMisesEstimator(DensityMixin, BaseEstimator):
    """Maximum-likelihood fit of a von Mises law to sample rotations.

    ``fit`` sets ``theta_`` to the projection of the sample mean and solves
    ``c1(kappa_) = (mean . theta_) / n``, which is the likelihood equation
    because ``d log Z / d kappa = n c1(kappa)``.
    """

    def __init__(self, kappa_max=256.0):
        self.kappa_max = kappa_max

    def fit(self, X, y=None):
        X = check_square(X, "X", allow_stack=True).reshape(-1, *np.shape(X)[-2:])
        n = X.shape[-1]
        mean = X.mean(axis=0)
        self.theta_ = son.project_to_rotation(mean)
        r = min(son.matrix_inner(mean, self.theta_) / n, 1.0 - 1e-12)
        self.kappa_ = min(invert_c1(n, max(r, 0.0)), self.kappa_max)
        self.distribution_ = VonMises(self.theta_, self.kappa_)
        return self

    def score_samples(self, X):
        return self.distribution_.log_density(X)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        return self.distribution_.sample(random_state, n_samples)
