import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fockspec import fock
from fockspec.weights import WeightSpec

mpmath.mp.dps = 30
B2 = fock.OrthoBasis.build(WeightSpec.radial_power(2), 120)
B4 = fock.OrthoBasis.build(WeightSpec.radial_power(4), 400)
points = st.builds(complex, st.floats(-2.5, 2.5), st.floats(-2.5, 2.5))


def mp_kernel(m, z, zeta, n_terms):
    """Direct mpmath series with moments from the Gamma function."""
    t = mpmath.mpc(z) * mpmath.conj(mpmath.mpc(zeta))
    s = 0
    for n in range(n_terms):
        In = 2 * mpmath.pi / m * mpmath.gamma(mpmath.mpf(2 * n + 2) / m) * mpmath.mpf(2) ** (-mpmath.mpf(2 * n + 2) / m)
        s += t**n / In
    return complex(s)


@given(points, points)
def test_kernel_hermitian(z, zeta):
    a = fock.kernel(B4, z, zeta).value
    b = fock.kernel(B4, zeta, z).value
    assert a == np.conj(b)


@given(points)
def test_kernel_positive_diagonal(z):
    v = fock.kernel(B4, z, z).value
    assert v.real > 0 and v.imag == 0


@pytest.mark.parametrize("z,zeta", [(0.5, 0.2j), (1 + 1j, 0.7 - 0.3j), (2.0, -1.5), (1 + 1.5j, 1.9 - 2j)])
def test_kernel_against_mpmath_series(z, zeta):
    got = fock.kernel(B4, z, zeta).value
    # the float64 error scale is eps times the sum of |terms| = K(|z|, |zeta|)
    scale = fock.kernel(B4, abs(z), abs(zeta)).value.real
    assert abs(got - mp_kernel(4, z, zeta, 401)) <= 1e-13 * scale


def test_gaussian_kernel_closed_form():
    z, zeta = 1.2 - 0.4j, -0.3 + 0.9j
    ref = 2 / math.pi * np.exp(2 * z * np.conj(zeta))
    assert fock.kernel(B2, z, zeta).value == pytest.approx(ref, rel=1e-12)


@given(points, st.integers(1, 200))
def test_truncation_monotone(z, n):
    a = fock.kernel(B4, z, z, n_max=n).value.real
    b = fock.kernel(B4, z, z, n_max=n + 1).value.real
    assert b >= a


def test_orthogonality_and_reproducing():
    assert fock.orthogonality_defect(B4, 50) <= 1e-8
    assert fock.reproducing_defect(B2, 0.4 + 0.3j) <= 1e-8
    assert fock.reproducing_defect(B4, -0.6j) <= 1e-8


@given(st.lists(points, min_size=2, max_size=8, unique=True))
def test_kernel_gram_psd(pts):
    lo, tr = fock.gram_min_eigenvalue(B4, pts)
    assert lo >= -1e-10 * tr


def test_normalized_kernel_unit_norm():
    assert fock.normalized_kernel_norm(B2, 0.7 + 0.2j) == pytest.approx(1.0, abs=1e-10)


def test_strict_mode_raises_on_truncation():
    with pytest.raises(fock.TruncationError):
        fock.diagonal_estimate_check(B4, [6.0], extend=False)


def test_extension_clears_flag():
    kv = fock.kernel(B4, 6.0, 6.0, extend=True)
    assert not kv.flagged and kv.n_terms > 401


def test_diagonal_gaussian_constant():
    r = fock.diagonal_estimate_check(B2, [0, 1, 1j, 2 - 1j])
    assert r.passed and r.max - r.min <= 1e-12 * r.max
    assert r.min == pytest.approx(2 / math.pi / (4 * math.pi), rel=1e-12)


def test_near_diagonal_and_decay_fit():
    near = fock.near_diagonal_check(B2, 0.25, [0, 1 + 1j])
    assert near.passed and near.min >= math.exp(-2 * math.pi * 0.25**2 / (4 * math.pi) * 4 * math.pi) - 1e-12
    fit = fock.offdiagonal_decay_fit(B2, [(0, 0.5), (0, 1.5), (1j, 2 + 1j)])
    assert fit.passed and 0 < fit.eps_fit <= 1
