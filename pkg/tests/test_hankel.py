import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fockspec import fock, hankel
from fockspec.hankel import SymbolPoly
from fockspec.weights import WeightSpec

mpmath.mp.dps = 40
BASES = {m: fock.OrthoBasis.build(WeightSpec.radial_power(m), 3000) for m in (2, 3, 4, 6)}

coef = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
symbols = st.lists(coef, min_size=2, max_size=4).filter(lambda c: abs(c[-1]) > 1e-3).map(lambda c: SymbolPoly(tuple(c)))


def mp_moment(m, n):
    x = mpmath.mpf(2 * n + 2) / m
    return 2 * mpmath.pi / m * mpmath.gamma(x) * mpmath.mpf(2) ** (-x)


def mp_gram(m, g, N):
    """<H e_j, H e_k> from the inner products <gbar e_j, gbar e_k> and <gbar e_j, e_l>."""
    c = [mpmath.mpc(x) for x in g.coeffs]
    d = len(c) - 1
    I = [mp_moment(m, n) for n in range(N + 2 * d + 1)]
    G = np.zeros((N, N), dtype=complex)
    for j in range(N):
        for k in range(N):
            s = 0
            for a in range(d + 1):
                bb = k + a - j
                if 0 <= bb <= d:
                    s += mpmath.conj(c[a]) * c[bb] * I[j + bb] / mpmath.sqrt(I[j] * I[k])
            for l in range(min(j, k) + 1):
                if j - l <= d and k - l <= d:
                    s -= mpmath.conj(c[j - l]) * c[k - l] * mpmath.sqrt(I[j] * I[k]) / I[l]
            G[j, k] = complex(s)
    return G


@pytest.mark.parametrize("m,coeffs", [(2, (0, 1)), (4, (0.5, 1, -0.3j)), (3, (0, 0, 0, 2)), (6, (1, 1j, 0, 0.25))])
def test_gram_against_mpmath(m, coeffs):
    g = SymbolPoly(coeffs)
    G = hankel.hankel_gram(BASES[m], g, 12).dense()
    ref = mp_gram(m, g, 12)
    assert np.max(np.abs(G - ref)) <= 1e-13 * np.max(np.abs(ref))


@given(st.sampled_from([2, 3, 4, 6]), symbols)
def test_gram_psd(m, g):
    gram = hankel.hankel_gram(BASES[m], g, 60)
    ev = np.linalg.eigvalsh(gram.dense())
    assert ev.min() >= -1e-10 * gram.trace()


@given(st.sampled_from([2, 4, 6]), symbols, coef)
def test_constant_shift_invariance(m, g, c0):
    shifted = SymbolPoly((g.coeffs[0] + c0,) + g.coeffs[1:])
    a = hankel.hankel_gram(BASES[m], g, 40).dense()
    b = hankel.hankel_gram(BASES[m], shifted, 40).dense()
    assert np.array_equal(a, b)


@given(st.sampled_from([3, 4, 6]), st.integers(1, 4), coef.filter(lambda c: abs(c) > 1e-3))
def test_monomial_gram_diagonal(m, d, c):
    gram = hankel.hankel_gram(BASES[m], SymbolPoly.monomial(d, c), 50)
    assert gram.bandwidth == d - 1
    off = max((np.max(np.abs(band)) for band in gram.bands[1:]), default=0.0)
    assert off <= 1e-12 * np.max(np.abs(gram.bands[0]))


@pytest.mark.parametrize("m,d", [(2, 1), (4, 1), (6, 2), (3, 3)])
def test_closed_form_matches_eigensolver_and_mpmath(m, d):
    g = SymbolPoly.monomial(d, 1.5)
    b = BASES[m]
    cf = hankel.closed_form_spectrum(b, g, 400)
    ev = hankel.singular_values(hankel.hankel_gram(b, g, 400), symbol=g)
    assert np.max(np.abs(cf.s[:400 - 2 * d] - ev.s[:400 - 2 * d])) <= 1e-8 * cf.s[0]
    for n in (0, d, 37, 399):
        s2 = 2.25 * (mp_moment(m, n + d) / mp_moment(m, n) - (mp_moment(m, n) / mp_moment(m, n - d) if n >= d else 0))
        assert np.any(np.isclose(cf.s, float(mpmath.sqrt(s2)), rtol=1e-11, atol=0))


def test_gaussian_flat_spectrum():
    s = hankel.spectrum(BASES[2], SymbolPoly.monomial(1), 2000).s
    assert np.max(np.abs(s - 2**-0.5)) <= 1e-9


@given(st.sampled_from([2, 4, 6]), symbols)
def test_spectrum_sorted_nonnegative_and_interlacing(m, g):
    b = BASES[m]
    small = hankel.singular_values(hankel.hankel_gram(b, g, 30), symbol=g).s
    big = hankel.singular_values(hankel.hankel_gram(b, g, 45), symbol=g).s
    assert np.all(small >= 0) and np.all(np.diff(small) <= 0)
    assert np.all(small <= big[:30] * (1 + 1e-10) + 1e-12 * big[0])


def test_insufficient_moments():
    b = fock.OrthoBasis.build(WeightSpec.radial_power(2), 20)
    with pytest.raises(hankel.InsufficientMomentsError):
        hankel.hankel_gram(b, SymbolPoly.monomial(2), 20)


def test_symbol_parse_and_label():
    g = SymbolPoly.parse("1, 0, 2+1j")
    assert g.degree == 2 and g.coeffs[2] == 2 + 1j
    assert g.derivative().coeffs == (0j, 4 + 2j)
    assert SymbolPoly.parse("0, 1").label() == "z"
    with pytest.raises(ValueError):
        SymbolPoly.parse("")


def test_growth_indicator_verdicts():
    assert hankel.symbol_growth_indicator(WeightSpec.radial_power(2), SymbolPoly.monomial(1)).verdict == "BOUNDED"
    assert hankel.symbol_growth_indicator(WeightSpec.radial_power(4), SymbolPoly.monomial(1)).verdict == "COMPACT"
    assert hankel.symbol_growth_indicator(WeightSpec.radial_power(2), SymbolPoly.monomial(2)).verdict == "UNBOUNDED"


def test_kernel_image_and_dbar():
    b = fock.OrthoBasis.build(WeightSpec.radial_power(2), 120)
    g = SymbolPoly((0, 1, 0.3))
    assert hankel.kernel_image_check(b, g, 0.3 + 0.2j, [0.1, 1j, -0.5 + 0.5j]) <= 1e-12
    f = np.zeros(8, dtype=complex)
    f[3] = 1.0
    b4 = fock.OrthoBasis.build(WeightSpec.radial_power(4), 40)
    r1 = hankel.dbar_residual(b4, SymbolPoly.monomial(1), f, 0.5, 1e-3)
    r2 = hankel.dbar_residual(b4, SymbolPoly.monomial(1), f, 0.5, 5e-4)
    assert r1 / r2 == pytest.approx(4.0, rel=0.05)


def test_trace_bound_and_spineq():
    b = BASES[4]
    g = SymbolPoly.monomial(1)
    assert hankel.toeplitz_trace_bound(b, g, 5.0, 200).holds
    spec = hankel.spectrum(b, g, 2000)
    r = hankel.spineq_check(b, spec, g, 5.0)
    assert r.lhs >= r.rhs and math.isfinite(r.ratio)


def test_spectrum_csv_and_json():
    spec = hankel.spectrum(BASES[2], SymbolPoly.monomial(1), 16)
    rows = spec.to_csv().splitlines()
    assert rows[0] == "n,s_n" and len(rows) == 17
    assert float(rows[1].split(",")[1]) == spec.s[0]
    assert '"method": "closed_form"' in spec.to_json()
