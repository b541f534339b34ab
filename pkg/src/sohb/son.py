"""Linear algebra on SO(n): inner product, Haar draws, Procrustes projection."""

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin

from ._checks import check_dimension, check_random_state, check_square
from .exceptions import DimensionMismatch, NonUniqueProjection, SingularProjection

#: relative gap between the two smallest singular values below which the
#: reflected maximizer is declared non-unique
TIE_TOL = 1e-9


def matrix_inner(A, B):
    """Frobenius inner product ``Tr(A^T B)``; broadcasts over leading axes."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[-2:] != B.shape[-2:] or A.shape[-1] != A.shape[-2]:
        raise DimensionMismatch(f"cannot pair matrices of shapes {A.shape} and {B.shape}")
    return np.einsum("...ij,...ij->...", A, B)


def haar_sample(rng, n, size=None):
    """Draw rotation(s) from the normalized Haar measure on SO(n).

    QR of a Gaussian matrix with the sign convention ``diag(R) > 0`` gives a
    Haar orthogonal matrix; one column flip maps O(n) minus SO(n) onto SO(n).
    Returns an ``(n, n)`` array, or ``(size, n, n)`` when ``size`` is given.
    """
    rng = check_random_state(rng)
    n = check_dimension(n, minimum=2)
    m = 1 if size is None else int(size)
    G = rng.standard_normal((m, n, n))
    Q, R = np.linalg.qr(G)
    d = np.diagonal(R, axis1=1, axis2=2)
    bad = np.any(np.abs(d) < 1e-12, axis=1)
    while np.any(bad):
        G[bad] = rng.standard_normal((int(bad.sum()), n, n))
        Q[bad], R[bad] = np.linalg.qr(G[bad])
        d = np.diagonal(R, axis1=1, axis2=2)
        bad = np.any(np.abs(d) < 1e-12, axis=1)
    Q = Q * np.sign(d)[:, None, :]
    flip = np.linalg.det(Q) < 0
    Q[flip, :, 0] *= -1.0
    return Q[0] if size is None else Q


def project_to_rotation(J, strict=False, tol=TIE_TOL):
    """Rotation maximizing ``A . J`` over SO(n) (special orthogonal Procrustes).

    With ``J = U S V^T``, the maximizer is ``U diag(1, ..., 1, det(U V^T)) V^T``,
    and ``J Theta^T`` is then symmetric.

    Raises
    ------
    NonUniqueProjection
        The maximizer is a continuum: ``det(U V^T) = -1`` with tied smallest
        singular values, or at least two vanishing singular values.
    SingularProjection
        Only with ``strict=True``: ``J`` is numerically singular.
    """
    J = check_square(J, "J")
    n = J.shape[0]
    U, s, Vt = np.linalg.svd(J)
    scale = s[0]
    if scale == 0.0:
        raise NonUniqueProjection("J is the zero matrix")
    if strict and s[-1] < tol * scale:
        raise SingularProjection(f"J is singular (smallest singular value {s[-1]:.3g})")
    if n >= 2 and s[-2] < tol * scale:
        raise NonUniqueProjection("J has rank <= n - 2; the maximizer is not unique")
    d = np.linalg.det(U @ Vt)
    if d < 0:
        if s[-2] - s[-1] < tol * scale:
            raise NonUniqueProjection(
                "det(U V^T) = -1 with tied smallest singular values "
                f"({s[-2]:.6g}, {s[-1]:.6g}); the maximizer is not unique"
            )
        U = U.copy()
        U[:, -1] *= -1.0
    return U @ Vt


def wedge_vec(X, Y):
    """``(X ^ Y)_ij = X_i Y_j - X_j Y_i``; broadcasts over leading axes."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[-1] != Y.shape[-1]:
        raise DimensionMismatch(f"vectors have lengths {X.shape[-1]} and {Y.shape[-1]}")
    outer = X[..., :, None] * Y[..., None, :]
    return outer - np.swapaxes(outer, -1, -2)


def skew_from_upper(values, n):
    """Skew matrix whose strict upper triangle (row-major) is ``values``."""
    values = np.asarray(values, dtype=float)
    m = n * (n - 1) // 2
    if values.shape[-1] != m:
        raise DimensionMismatch(f"need {m} upper-triangular entries for n={n}")
    iu = np.triu_indices(n, 1)
    P = np.zeros(values.shape[:-1] + (n, n))
    P[..., iu[0], iu[1]] = values
    return P - np.swapaxes(P, -1, -2)


def random_skew(rng, n, size=None, norm=np.sqrt(2.0)):
    """Gaussian-direction skew matrix rescaled to Frobenius norm ``norm``.

    The default norm makes ``exp(t K)`` a rotation by angle ``t`` in one plane
    when ``K`` happens to be an elementary wedge.
    """
    rng = check_random_state(rng)
    m = 1 if size is None else int(size)
    K = skew_from_upper(rng.standard_normal((m, n * (n - 1) // 2)), n)
    K *= norm / np.linalg.norm(K, axis=(1, 2))[:, None, None]
    return K[0] if size is None else K


def expm_skew(K):
    """Matrix exponential of (a stack of) skew matrices.

    Backed by ``scipy.linalg.expm`` (Pade 13 scaling and squaring); the result
    is re-orthogonalized by one polar step, which is a no-op to rounding.
    """
    K = np.asarray(K, dtype=float)
    R = scipy.linalg.expm(K)
    # one Newton polar step keeps R^T R = I at the 1e-15 level for long chains
    return 0.5 * (R + np.swapaxes(np.linalg.inv(R), -1, -2))


class RotationProjector(TransformerMixin, BaseEstimator):
    """Transformer mapping each square matrix to its nearest rotation.

    Stateless; ``fit`` only records the matrix dimension so that
    ``transform`` can reject inputs of another size.

    Parameters
    ----------
    strict : bool
        Also reject numerically singular inputs.
    tol : float
        Relative singular-value tolerance for tie / singularity detection.
    """

    def __init__(self, strict=False, tol=TIE_TOL):
        self.strict = strict
        self.tol = tol

    def fit(self, X, y=None):
        X = check_square(X, "X", allow_stack=True)
        self.n_dim_ = X.shape[-1]
        return self

    def transform(self, X):
        X = check_square(X, "X", allow_stack=True)
        if hasattr(self, "n_dim_") and X.shape[-1] != self.n_dim_:
            raise DimensionMismatch(f"fitted for n={self.n_dim_}, got n={X.shape[-1]}")
        flat = X.reshape(-1, X.shape[-1], X.shape[-1])
        out = np.stack([project_to_rotation(J, strict=self.strict, tol=self.tol) for J in flat])
        return out.reshape(X.shape)

