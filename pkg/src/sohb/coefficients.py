"""Hydrodynamic coefficients c1..c4 of the body-orientation fluid model.

Three evaluation routes are provided:

``weyl``
    Direct torus-integral formulas, evaluated by trapezoid-Weyl quadrature.
``trace_moments``
    The Boltzmann-weighted trace moments ``<Tr A^k / n>`` are formed first;
    C2, C3, C4 follow, then c2 and c4 both through the constants relation
    and through their closed trace-moment expressions.
``closed_form_n3``
    For n = 3 only: single-angle integrals evaluated by adaptive
    Gauss-Kronrod quadrature, sharing no code with the tensor grid.

Exponentials are evaluated as ``exp(kappa (C - n))`` so that nothing
overflows at large concentration; ``Z`` is rescaled at the end.
"""

import csv
import functools
import math
import warnings
from dataclasses import dataclass, fields

import numpy as np
from scipy import integrate

from ._checks import check_dimension, check_kappa
from .exceptions import InternalMismatch
from .weyl import c_fn, converged_integral

ROUTES = ("weyl", "trace_moments", "closed_form_n3")
#: inter-route (and in-route) agreement threshold, relative
MISMATCH_RTOL = 1e-8
#: magnitudes below this are compared absolutely (c1 vanishes at kappa = 0)
MISMATCH_FLOOR = 1e-6
QUAD_TOL = 1e-13

CSV_HEADER = ["n", "kappa", "c1", "c2", "c3", "c4", "C2", "C3", "C4", "Z", "route"]


@dataclass(frozen=True)
class CoefficientTable:
    """Coefficients at one ``(n, kappa)``; ``c3`` is ``inf`` at ``kappa = 0``."""

    n: int
    kappa: float
    c1: float
    c2: float
    c3: float
    c4: float
    C2: float
    C3: float
    C4: float
    Z: float
    route: str

    def __post_init__(self):
        for f in fields(self):
            if f.name not in ("n", "route"):
                object.__setattr__(self, f.name, float(getattr(self, f.name)))

    def numeric(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("n", "route")}

    def csv_row(self):
        row = [str(self.n)]
        for name in CSV_HEADER[1:-1]:
            v = getattr(self, name)
            row.append("" if not math.isfinite(v) else format(v, ".17g"))
        row.append(self.route)
        return row


def _c3(kappa):
    return math.inf if kappa == 0 else 1.0 / (2.0 * kappa)


def rel_diff(a, b):
    if a == b:
        return 0.0
    if not (math.isfinite(a) and math.isfinite(b)):
        return math.inf
    return abs(a - b) / max(abs(a), abs(b), MISMATCH_FLOOR)


def table_discrepancy(t1, t2):
    """Largest relative difference over the numeric fields of two tables."""
    d1, d2 = t1.numeric(), t2.numeric()
    return max(rel_diff(d1[k], d2[k]) for k in d1)


def _weighted_integrals(n, kappa, columns):
    """Quadrature of ``col(C1, C2, C3) * exp(kappa (C1 - n))`` for each column."""

    def g(theta):
        t1, t2, t3 = (c_fn(n, k, theta) for k in (1, 2, 3))
        e = np.exp(kappa * (t1 - n))
        return np.stack([col(t1, t2, t3) * e for col in columns], axis=-1)

    return converged_integral(n, g, tol=QUAD_TOL)


@functools.lru_cache(maxsize=None)
def _moments(n, kappa):
    """``(I0, <T1/n>, <T2/n>, <T3/n>, <T1 T2 / n^2>)`` with ``T_k = Tr A^k``."""
    cols = (
        lambda t1, t2, t3: np.ones_like(t1),
        lambda t1, t2, t3: t1 / n,
        lambda t1, t2, t3: t2 / n,
        lambda t1, t2, t3: t3 / n,
        lambda t1, t2, t3: t1 * t2 / n**2,
    )
    I = _weighted_integrals(n, kappa, cols)
    return (I[0],) + tuple(I[1:] / I[0])


def partition_function(n, kappa):
    """``Z = int exp(kappa Tr A) dA`` over normalized Haar measure."""
    n = check_dimension(n)
    kappa = check_kappa(kappa)
    return math.exp(kappa * n) * _moments(n, kappa)[0]


def log_partition_function(n, kappa):
    n = check_dimension(n)
    kappa = check_kappa(kappa)
    return kappa * n + math.log(_moments(n, kappa)[0])


def trace_moment(n, kappa, k):
    """``<Tr A^k / n>`` under the weight ``exp(kappa Tr A)``, ``k`` in {1, 2, 3}."""
    n = check_dimension(n)
    kappa = check_kappa(kappa)
    if k not in (1, 2, 3):
        raise ValueError(f"k must be 1, 2 or 3, got {k}")
    return _moments(n, kappa)[k]


def constants_from_moments(n, m1, m2, m3, m12):
    """C2, C3, C4 from the weighted trace moments."""
    C2 = (1.0 - m2) / (n - 1)
    C3 = (m12 - m1) / (n - 1)
    C4 = 2.0 * n / ((n - 1) * (n - 2) * (n + 2)) * (m3 - 2.0 * m12 + m1)
    return C2, C3, C4


def c2_c4_from_constants(n, C2, C3, C4):
    return -(C3 - C4 / n) / C2, C4 / (4.0 * C2)


@functools.lru_cache(maxsize=None)
def _coefficients_weyl(n, kappa):
    cols = (
        lambda t1, t2, t3: np.ones_like(t1),
        lambda t1, t2, t3: t1,
        lambda t1, t2, t3: 2.0 * t3 - n * t1 * t2 + (n * n - 2.0) * t1,
        lambda t1, t2, t3: t3 - (2.0 / n) * t1 * t2 + t1,
        lambda t1, t2, t3: 1.0 - t2 / n,
    )
    I0, I1, I2, I3, I4 = _weighted_integrals(n, kappa, cols)
    c1 = I1 / (n * I0)
    c2 = I2 / (n * (n - 2) * (n + 2) * I4)
    c4 = I3 / (2.0 * (n - 2) * (n + 2) * I4)
    # C2 and C4 are pinned by c4 = C4 / (4 C2); C3 by the c2 relation
    C2 = I4 / ((n - 1) * I0)
    C4 = 4.0 * C2 * c4
    C3 = C4 / n - c2 * C2
    return CoefficientTable(n, kappa, c1, c2, _c3(kappa), c4, C2, C3, C4, math.exp(kappa * n) * I0, "weyl")


def coefficients_weyl(n, kappa):
    """Coefficients from the torus-integral formulas.

    C2 is the normalized torus integral of ``(1 - C^(2)/n)``; C3 and C4 are
    then recovered from c2 and c4 through the constants relation, so the
    relation holds by construction in this route.
    """
    return _coefficients_weyl(check_dimension(n), check_kappa(kappa))


def trace_moment_forms(n, kappa):
    """c2 and c4 two ways from the same trace moments.

    Returns ``{"constants": (c2, c4), "direct": (c2, c4), "C": (C2, C3, C4)}``:
    through the constants relation, and through the closed trace-moment
    expressions.
    """
    n = check_dimension(n)
    _, m1, m2, m3, m12 = _moments(n, check_kappa(kappa))
    C = constants_from_moments(n, m1, m2, m3, m12)
    c2_direct = (2.0 * m3 - n * n * m12 + (n * n - 2.0) * m1) / ((n - 2) * (n + 2) * (1.0 - m2))
    c4_direct = n * (m3 - 2.0 * m12 + m1) / (2.0 * (n - 2) * (n + 2) * (1.0 - m2))
    return {"constants": c2_c4_from_constants(n, *C), "direct": (c2_direct, c4_direct), "C": C}


@functools.lru_cache(maxsize=None)
def _coefficients_trace_moments(n, kappa):
    I0, m1 = _moments(n, kappa)[:2]
    forms = trace_moment_forms(n, kappa)
    C2, C3, C4 = forms["C"]
    c2, c4 = forms["constants"]
    c2_direct, c4_direct = forms["direct"]
    for name, a, b in (("c2", c2, c2_direct), ("c4", c4, c4_direct)):
        if rel_diff(a, b) > MISMATCH_RTOL:
            raise InternalMismatch(
                f"{name} at n={n}, kappa={kappa}: constants relation gives {a!r}, trace form gives {b!r}"
            )
    return CoefficientTable(n, kappa, m1, c2, _c3(kappa), c4, C2, C3, C4, math.exp(kappa * n) * I0, "trace_moments")


def coefficients_trace_moments(n, kappa):
    """Coefficients assembled from weighted trace moments.

    Raises
    ------
    InternalMismatch
        The constants-relation and direct trace-moment forms of c2 or c4
        disagree beyond ``MISMATCH_RTOL``.
    """
    return _coefficients_trace_moments(check_dimension(n), check_kappa(kappa))


def _quad(f):
    # quad flags roundoff when the tolerance is at machine level; judge by its error estimate
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, 0.0, 2.0 * np.pi, epsabs=1e-14, epsrel=1e-13, limit=400)
    if err > 1e-11 * max(1.0, abs(val)):
        warnings.warn(f"adaptive quadrature error estimate {err:.2g} for value {val:.6g}",
                      integrate.IntegrationWarning, stacklevel=2)
    return val


@functools.lru_cache(maxsize=None)
def _closed_form_n3(kappa):
    def e(t):
        return math.exp(kappa * (2.0 * math.cos(t) - 2.0))

    def s2(t):
        return math.sin(t / 2.0) ** 2

    def w4(t):
        return math.sin(t / 2.0) ** 4 * math.cos(t / 2.0) ** 2

    d1 = _quad(lambda t: e(t) * s2(t))
    c1 = _quad(lambda t: (1.0 + 2.0 * math.cos(t)) * e(t) * s2(t)) / (3.0 * d1)
    d2 = _quad(lambda t: e(t) * w4(t))
    c2_minus_c4 = _quad(lambda t: (2.0 + 3.0 * math.cos(t)) * e(t) * w4(t)) / (5.0 * d2)
    c4 = _quad(lambda t: (1.0 - math.cos(t)) * e(t) * w4(t)) / (5.0 * d2)
    c2 = c2_minus_c4 + c4

    # SO(3) class integrals: int f dA = (1/pi) int_0^2pi f(t) sin^2(t/2) dt
    def tr(k, t):
        return 1.0 + 2.0 * math.cos(k * t)

    def avg(h):
        return _quad(lambda t: h(t) * e(t) * s2(t)) / d1

    m1 = c1
    m2 = avg(lambda t: tr(2, t) / 3.0)
    m3 = avg(lambda t: tr(3, t) / 3.0)
    m12 = avg(lambda t: tr(1, t) * tr(2, t) / 9.0)
    C2, C3, C4 = constants_from_moments(3, m1, m2, m3, m12)
    Z = math.exp(3.0 * kappa) * d1 / math.pi
    return CoefficientTable(3, kappa, c1, c2, _c3(kappa), c4, C2, C3, C4, Z, "closed_form_n3")


def closed_form_n3(kappa):
    """n = 3 coefficients from single-angle integrals (adaptive quadrature).

    c2 is rebuilt as ``(c2 - c4) + c4`` from the two tabulated integrals.
    """
    return _closed_form_n3(check_kappa(kappa))


def coefficients(n, kappa, route="weyl"):
    if route == "weyl":
        return coefficients_weyl(n, kappa)
    if route == "trace_moments":
        return coefficients_trace_moments(n, kappa)
    if route == "closed_form_n3":
        if n != 3:
            raise ValueError("closed_form_n3 route exists only for n = 3")
        return closed_form_n3(kappa)
    raise ValueError(f"unknown route {route!r}; expected one of {ROUTES}")


def c1(n, kappa):
    """Order parameter ``c1(kappa) = <Tr A / n>``."""
    return coefficients_weyl(n, kappa).c1


def invert_c1(n, value):
    """``kappa`` such that ``c1(n, kappa) = value``, for ``0 <= value < 1``."""
    from scipy.optimize import brentq

    if not 0.0 <= value < 1.0:
        raise ValueError(f"c1 takes values in [0, 1), got {value}")
    if value == 0.0:
        return 0.0
    hi = 1.0
    while c1(n, hi) < value:
        hi *= 2.0
        if hi > 512:
            raise ValueError(f"c1 = {value} needs kappa beyond the supported range")
    return brentq(lambda k: c1(n, k) - value, 0.0, hi, xtol=1e-12)


def write_csv(tables, fh, discrepancy=None):
    """Write tables as CSV; ``discrepancy`` maps ``(n, kappa)`` to a float column."""
    writer = csv.writer(fh, lineterminator="\n")
    header = list(CSV_HEADER)
    if discrepancy is not None:
        header.append("max_discrepancy")
    writer.writerow(header)
    for t in tables:
        row = t.csv_row()
        if discrepancy is not None:
            row.append(format(discrepancy[(t.n, t.kappa)], ".17g"))
        writer.writerow(row)
