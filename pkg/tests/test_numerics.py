import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fockspec.numerics import gauss_legendre, linear_fit, log_abs_sum, log_gamma_ratio, panel_rule

mpmath.mp.dps = 40


@given(st.floats(0.05, 5e4), st.floats(-0.04, 50))
def test_log_gamma_ratio_matches_mpmath(x, a):
    ref = float(mpmath.loggamma(mpmath.mpf(x) + a) - mpmath.loggamma(x))
    got = log_gamma_ratio(x, a)
    assert got == pytest.approx(ref, rel=1e-13, abs=1e-13)


def test_log_gamma_ratio_rejects_nonpositive():
    with pytest.raises(ValueError):
        log_gamma_ratio(-1.0, 0.5)


@given(st.lists(st.floats(-700, 700), min_size=1, max_size=30), st.integers(0, 2**32 - 1))
def test_log_abs_sum_matches_mpmath(logs, seed):
    ph = np.random.default_rng(seed).uniform(-np.pi, np.pi, len(logs))
    la, arg = log_abs_sum(np.array(logs), ph)
    ref = mpmath.fsum(mpmath.exp(mpmath.mpf(l)) * mpmath.expj(p) for l, p in zip(logs, ph))
    if abs(ref) < mpmath.exp(max(logs)) * 1e-10:
        return  # cancellation: the double-precision sum carries no relative accuracy
    assert la == pytest.approx(float(mpmath.log(abs(ref))), abs=1e-9)
    assert math.cos(arg - float(mpmath.arg(ref))) == pytest.approx(1.0, abs=1e-12)


def test_log_abs_sum_positive_terms():
    la, _ = log_abs_sum(np.log([1.0, 2.0, 3.0]))
    assert la == pytest.approx(math.log(6.0), abs=1e-15)


def test_panel_rule_integrates_polynomials():
    x, w = panel_rule(np.array([0.0, 0.5, 2.0]), 8)
    assert np.sum(w * x**7) == pytest.approx(2.0**8 / 8, rel=1e-14)
    xg, wg = gauss_legendre(5)
    assert np.sum(wg) == pytest.approx(2.0)


def test_linear_fit_exact_line():
    slope, icpt, err = linear_fit(np.arange(5.0), 3 * np.arange(5.0) - 1)
    assert (slope, icpt) == pytest.approx((3.0, -1.0))
    assert err == pytest.approx(0.0, abs=1e-12)
