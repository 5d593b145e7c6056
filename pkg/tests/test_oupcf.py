import csv
import pathlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

import fpt
from fpt.errors import InputError, NumericsError

DATA = pathlib.Path(__file__).parent / "data"


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------

@pytest.mark.parametrize("y", [-3.0, -1.0, 0.0, 0.7, 2.5])
def test_order_one_is_mills_ratio(y):
    assert fpt.pcf(1.0, y) == pytest.approx(norm.cdf(y) / norm.pdf(y), rel=1e-12)


def test_value_at_origin():
    assert fpt.pcf(1.0, 0.0) == pytest.approx(np.sqrt(np.pi / 2), rel=1e-13)


@pytest.mark.parametrize("y", [-2.0, -0.5, 0.0, 1.3])
def test_nonpositive_integers_are_hermite(y):
    assert fpt.pcf(-2.0, y) == pytest.approx(y * y - 1.0, abs=1e-12)
    assert fpt.pcf(0.0, y) == 1.0
    assert fpt.pcf(-3.0, y) == pytest.approx(-(y**3 - 3 * y), abs=1e-12)


@pytest.mark.parametrize("s", [0.3, 1.0, 2.4, -0.6, -1.7])
def test_derivative_identity_by_finite_differences(s):
    # d/dy pcf(s, y) = s * pcf(s+1, y), checked against central differences
    y, h = 0.8, 1e-5
    fd = (fpt.pcf(s, y + h) - fpt.pcf(s, y - h)) / (2 * h)
    assert fd == pytest.approx(s * fpt.pcf(s + 1.0, y), rel=2e-9, abs=1e-10)


@given(st.floats(-3.0, -0.01), st.floats(-3.0, 3.0))
@settings(max_examples=80, deadline=None)
def test_recursion_residual(s, y):
    lhs = fpt.pcf(s, y) + y * fpt.pcf(s + 1.0, y) - (s + 1.0) * fpt.pcf(s + 2.0, y)
    scale = max(abs(fpt.pcf(s, y)), abs(fpt.pcf(s + 2.0, y)), 1.0)
    assert abs(lhs) / scale < 1e-9


def test_overflow_raises_not_inf():
    with pytest.raises(NumericsError):
        fpt.pcf(1.0, 45.0)
    with pytest.raises(NumericsError):
        fpt.pcf(2.0, 39.0)


def test_rejects_nonfinite():
    with pytest.raises(InputError):
        fpt.pcf(np.nan, 0.0)


# ----------------------------------------------------------------------
# reflection identity
# ----------------------------------------------------------------------

def test_reflection_half_order_at_origin():
    lhs = fpt.reflection_product(0.5, 0.0)
    assert lhs == pytest.approx(fpt.pcf(0.5, 0.0) ** 2, abs=1e-8)


@pytest.mark.parametrize("s,y", [(0.25, 1.0), (0.25, -1.5), (0.75, 0.3)])
def test_reflection_matches_direct_product(s, y):
    direct = fpt.pcf(s, y) * fpt.pcf(1.0 - s, y)
    assert fpt.reflection_product(s, y) == pytest.approx(direct, rel=1e-8)


def test_reflection_symmetric_in_s():
    # the series only depends on {s, 1-s}
    a = fpt.reflection_product(0.3, 0.4)
    b = fpt.reflection_product(0.7, 0.4)
    assert a == pytest.approx(b, rel=1e-12)


def test_reflection_rejects_integer_order():
    with pytest.raises(InputError):
        fpt.reflection_product(1.0, 0.0)


# ----------------------------------------------------------------------
# zeros
# ----------------------------------------------------------------------

def test_hermite_leftmost_zeros():
    assert fpt.hermite_leftmost_zero(2) == pytest.approx(-1.0, abs=1e-12)
    assert fpt.hermite_leftmost_zero(3) == pytest.approx(-np.sqrt(3), abs=1e-12)
    assert fpt.hermite_leftmost_zero(5) == pytest.approx(-2.86, abs=5e-3)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_rightmost_zero_inverts_hermite_zeros(n):
    zeta = fpt.hermite_leftmost_zero(n)
    assert fpt.rightmost_zero(zeta) == pytest.approx(float(n), abs=1e-8)


def test_rightmost_zero_golden_table():
    with open(DATA / "ou_lambda_table.csv") as fh:
        rows = [r for r in csv.DictReader(
            line for line in fh if not line.startswith("#"))]
    for row in rows:
        yp, lam = float(row["y_plus"]), float(row["lambda"])
        got = fpt.rightmost_zero(yp)
        if row["abscissa_kind"] == "exact":
            assert got == pytest.approx(lam, abs=1e-8)
        elif row["abscissa_kind"] == "rounded_3sf":
            assert abs(got - lam) <= 5e-4
        else:
            # the tabulated boundary is a 3 s.f. rounding of the true abscissa
            assert abs(got - lam) <= 2e-2


def test_rightmost_zero_monotone_decreasing():
    grid = np.linspace(-1.5, 3.0, 50)
    lams = np.array([fpt.rightmost_zero(y) for y in grid])
    assert np.all(np.diff(lams) < 0.0)


def test_pcf_eval_reports_dispatch_route():
    assert fpt.pcf_eval(1.5, 0.3).method == "integral"
    assert fpt.pcf_eval(-2.0, 0.3).method == "hermite"
    assert fpt.pcf_eval(-0.7, 0.3).method == "recursion"
    rec = fpt.pcf_eval(-2.0, 1.7)
    assert rec.value == pytest.approx(1.7**2 - 1.0, abs=1e-12)
