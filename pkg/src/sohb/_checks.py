"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from .exceptions import DimensionMismatch

ORTHO_TOL = 1e-10


def check_square(M, name="matrix", allow_stack=False):
    """Return ``M`` as a float array of square matrices.

    With ``allow_stack`` a leading batch axis (or several) is accepted.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or (M.ndim > 2 and not allow_stack):
        raise DimensionMismatch(f"{name} must be a square matrix, got shape {M.shape}")
    if M.shape[-1] != M.shape[-2]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def check_same_shape(A, B, names=("A", "B")):
    if A.shape != B.shape:
        raise DimensionMismatch(f"{names[0]} has shape {A.shape} but {names[1]} has shape {B.shape}")


def is_rotation(A, tol=ORTHO_TOL):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    n = A.shape[0]
    return bool(np.linalg.norm(A.T @ A - np.eye(n)) <= tol and abs(np.linalg.det(A) - 1.0) <= tol)


def check_rotation(A, name="rotation", tol=ORTHO_TOL):
    A = check_square(A, name)
    if not is_rotation(A, tol):
        raise ValueError(f"{name} is not a rotation matrix (tolerance {tol:g})")
    return A


def check_skew(P, name="P"):
    P = check_square(P, name)
    if not np.array_equal(P, -P.T):
        # canonical form: built from the strict upper triangle
        if np.max(np.abs(P + P.T)) > 1e-12 * max(1.0, np.max(np.abs(P))):
            raise ValueError(f"{name} is not antisymmetric")
        P = np.triu(P, 1) - np.triu(P, 1).T
    return P


def check_dimension(n, minimum=3):
    if not isinstance(n, numbers.Integral) or isinstance(n, bool):
        raise TypeError(f"dimension must be an integer, got {n!r}")
    if n < minimum:
        raise ValueError(f"dimension must be >= {minimum}, got {n}")
    return int(n)


def check_kappa(kappa, strict=False):
    kappa = float(kappa)
    if not np.isfinite(kappa) or kappa < 0 or (strict and kappa == 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"kappa must be finite and {bound}, got {kappa}")
    return kappa


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise TypeError(f"cannot build a Generator from {seed!r}")
