import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from semidirac.specfun import MAX_ORDER, bessel_j, bessel_j_derivative, bessel_j_ladder, bessel_j_table

mpmath.mp.dps = 50


def series_oracle(m, x):
    """Ascending power series summed in 50-digit arithmetic until the terms stop mattering."""
    x = mpmath.mpf(x)
    term = (x / 2) ** m / mpmath.factorial(m)
    total, k = term, 0
    while abs(term) > mpmath.mpf(10) ** -40 * max(abs(total), 1) or k < 2 * x:
        k += 1
        term *= -(x / 2) ** 2 / (k * (k + m))
        total += term
    return float(total)


def test_origin_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j_derivative(0, 0.0) == 0.0
    assert bessel_j_derivative(1, 0.0) == 0.5


def test_order_one_at_one_matches_series():
    assert bessel_j(1, 1.0) == pytest.approx(series_oracle(1, 1.0), abs=1e-15)


def test_grid_against_series_oracle():
    xs = np.linspace(0.0, 50.0, 200)
    worst = 0.0
    for m in range(13):
        ours = bessel_j(m, xs)
        ref = np.array([series_oracle(m, x) for x in xs])
        worst = max(worst, float(np.max(np.abs(ours - ref))))
    assert worst <= 1e-12


def test_scalar_and_array_paths_agree():
    xs = np.array([0.3, 1.9, 2.0, 2.1, 7.5, 33.0])
    table = bessel_j_table(6, xs)
    for i, x in enumerate(xs):
        assert np.allclose(bessel_j_table(6, float(x)), table[:, i], rtol=0, atol=1e-15)


def test_derivative_matches_finite_difference():
    h = 1e-6
    fd = (bessel_j(2, 3.0 + h) - bessel_j(2, 3.0 - h)) / (2 * h)
    assert bessel_j_derivative(2, 3.0) == pytest.approx(fd, abs=1e-8)


@given(st.integers(1, 12), st.floats(0.1, 50.0))
def test_recurrence_residual(m, x):
    lo, mid, hi = bessel_j_ladder([m - 1, m, m + 1], x)
    assert abs(lo + hi - 2 * m / x * mid) <= 1e-10


@given(st.integers(-MAX_ORDER, MAX_ORDER), st.floats(-60.0, 60.0))
def test_reflection_identities(m, x):
    j = bessel_j(m, x)
    assert bessel_j(-m, x) == (-1) ** (m % 2) * j
    assert bessel_j(m, -x) == (-1) ** (m % 2) * j


@given(st.integers(0, 10), st.floats(0.0, 50.0))
def test_derivative_is_recurrence(m, x):
    expected = 0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x))
    assert bessel_j_derivative(m, x) == pytest.approx(expected, abs=1e-12)


def test_unsupported_order_raises():
    with pytest.raises(ValueError):
        bessel_j(MAX_ORDER + 1, 1.0)
    with pytest.raises(ValueError):
        bessel_j(0, float("nan"))
