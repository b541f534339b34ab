import csv
import io
import math

import numpy as np
import pytest

from sohb import coefficients as C
from sohb.exceptions import InternalMismatch

# n = 3, kappa = 2 reference values from the single-angle route (adaptive quadrature)
REF_3_2 = {"c1": 0.7212035115695827, "c2": 0.7773142348748863, "c4": 0.11134288256255687}


def test_kappa_zero_values():
    # at kappa = 0 the law is Haar: <Tr A> = 0, <Tr A^2> = 1, c2, c4 from the uniform moments
    t = C.coefficients_weyl(3, 0.0)
    assert t.c1 == pytest.approx(0.0, abs=1e-12)
    assert t.c2 == pytest.approx(0.5, abs=1e-12)
    assert t.c4 == pytest.approx(0.25, abs=1e-12)
    assert t.C2 == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert math.isinf(t.c3)
    assert t.Z == pytest.approx(1.0, abs=1e-12)


def test_c3():
    assert C.coefficients_weyl(4, 1.0).c3 == 0.5
    assert C.coefficients_weyl(5, 4.0).c3 == 0.125


@pytest.mark.parametrize("kappa", [0.5, 2.0, 7.0])
def test_so3_partition_function_bessel(kappa):
    # SO(3): Z = e^kappa (I0(2 kappa) - I1(2 kappa))
    from scipy.special import iv

    assert C.partition_function(3, kappa) == pytest.approx(math.exp(kappa) * (iv(0, 2 * kappa) - iv(1, 2 * kappa)), rel=1e-12)


def test_c1_is_log_derivative_of_Z():
    n, k, h = 4, 1.5, 1e-4
    dlogZ = (C.log_partition_function(n, k + h) - C.log_partition_function(n, k - h)) / (2 * h)
    assert dlogZ / n == pytest.approx(C.c1(n, k), rel=1e-7)


def test_reference_values_n3():
    t = C.coefficients_weyl(3, 2.0)
    for name, v in REF_3_2.items():
        assert getattr(t, name) == pytest.approx(v, rel=1e-10)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 5.0, 10.0])
def test_weyl_vs_closed_form_n3(kappa):
    a, b = C.coefficients_weyl(3, kappa), C.closed_form_n3(kappa)
    assert C.table_discrepancy(a, b) < 1e-9


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_routes_and_constants_relation(n):
    for kappa in (0.5, 2.0):
        w, t = C.coefficients_weyl(n, kappa), C.coefficients_trace_moments(n, kappa)
        assert C.table_discrepancy(w, t) < 1e-10
        forms = C.trace_moment_forms(n, kappa)
        for a, b in zip(forms["constants"], forms["direct"]):
            assert C.rel_diff(a, b) < 1e-10
        assert t.c2 == pytest.approx(-(t.C3 - t.C4 / n) / t.C2, rel=1e-12)
        assert t.c4 == pytest.approx(t.C4 / (4 * t.C2), rel=1e-12)


def test_internal_mismatch_raised(monkeypatch):
    C._coefficients_trace_moments.cache_clear()
    monkeypatch.setattr(C, "c2_c4_from_constants", lambda n, *c: (1.0, 1.0))
    with pytest.raises(InternalMismatch):
        C.coefficients_trace_moments(3, 1.25)
    C._coefficients_trace_moments.cache_clear()


def test_c1_monotone_and_limits():
    ks = np.arange(0, 10.01, 0.5)
    v = [C.c1(4, k) for k in ks]
    assert np.all(np.diff(v) > 0)
    assert C.c1(3, 20.0) > 0.95
    assert C.c1(3, 60.0) < 1.0


def test_invert_c1_roundtrip():
    for n, k in ((3, 0.7), (4, 3.0), (5, 12.0)):
        assert C.invert_c1(n, C.c1(n, k)) == pytest.approx(k, rel=1e-8)
    assert C.invert_c1(3, 0.0) == 0.0
    with pytest.raises(ValueError):
        C.invert_c1(3, 1.0)


def test_routes_dispatch_and_errors():
    assert C.coefficients(3, 1.0, "closed_form_n3").route == "closed_form_n3"
    with pytest.raises(ValueError):
        C.coefficients(4, 1.0, "closed_form_n3")
    with pytest.raises(ValueError):
        C.coefficients(3, 1.0, "nope")
    with pytest.raises(ValueError):
        C.coefficients_weyl(3, -1.0)


def test_csv_output():
    buf = io.StringIO()
    tables = [C.coefficients_weyl(3, 0.0), C.coefficients_weyl(3, 1.0)]
    C.write_csv(tables, buf, {(3, 0.0): 0.0, (3, 1.0): 1e-15})
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == C.CSV_HEADER + ["max_discrepancy"]
    assert rows[1][C.CSV_HEADER.index("c3")] == ""
    assert float(rows[2][C.CSV_HEADER.index("c3")]) == 0.5
    # 17 significant digits round-trip exactly
    assert float(rows[2][2]) == tables[1].c1


@pytest.mark.parametrize("n", [7, 8])
def test_c1_vanishes_at_zero_in_higher_dimension(n):
    assert abs(C.coefficients_weyl(n, 0.0).c1) < 1e-10
