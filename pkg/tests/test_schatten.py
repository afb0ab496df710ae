import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from fockspec import fock, hankel, schatten
from fockspec.geometry import RadiusField
from fockspec.hankel import SymbolPoly
from fockspec.schatten import Verdict
from fockspec.weights import WeightSpec

ms = st.sampled_from([2.0, 3.0, 4.0, 5.0, 6.0, 8.0])
ds = st.integers(1, 4)
ps = st.floats(2.0, 40.0)


@given(ms, ds, ps)
def test_exponent_sign_matches_critical_exponent(m, d, p):
    p_star = schatten.critical_exponent(m, d)
    assume(abs(p - p_star) > 1e-9)
    converges = schatten.radial_exponent(m, d, p) < -1
    assert converges == (p > p_star)


@given(ms, ds, ps, ps)
def test_exponent_verdicts_nest(m, d, p1, p2):
    lo, hi = sorted((p1, p2))
    if schatten.exponent_verdict(m, d, lo) == Verdict.CONVERGES:
        assert schatten.exponent_verdict(m, d, hi) == Verdict.CONVERGES


def test_critical_exponents():
    assert [schatten.critical_exponent(m, d) for m, d in [(4, 1), (6, 1), (6, 2), (2, 1)]] == [4.0, 3.0, 6.0, math.inf]
    assert schatten.critical_status(4, 2) == "NEVER"
    assert schatten.critical_status(4, 0) == "NOT_APPLICABLE"


@given(st.floats(0.05, 0.85), st.floats(1e-3, 1e3))
def test_increment_verdict_geometric(q, a):
    partials = np.cumsum(a * q ** np.arange(12))
    assert schatten.increment_verdict(partials).verdict == Verdict.CONVERGES


@given(st.floats(1.0, 4.0), st.floats(1e-3, 1e3))
def test_increment_verdict_growing(q, a):
    partials = np.cumsum(a * q ** np.arange(12))
    assert schatten.increment_verdict(partials).verdict == Verdict.DIVERGES


def test_increment_verdict_needs_three():
    with pytest.raises(ValueError):
        schatten.increment_verdict([1.0, 2.0])


@pytest.mark.parametrize("m,d,p", [(4, 1, 3.0), (4, 1, 6.0), (6, 2, 5.0), (6, 2, 8.0), (6, 1, 2.5), (6, 1, 4.0)])
def test_criterion_integral_agrees_with_exponent(m, d, p):
    r = schatten.criterion_integral(WeightSpec.radial_power(m), SymbolPoly.monomial(d), p)
    assert r.verdict == r.exponent_verdict


def test_criterion_octave_ratio():
    m, d, p = 4.0, 1, 5.0
    r = schatten.criterion_integral(WeightSpec.radial_power(m), SymbolPoly.monomial(d), p)
    p_star = schatten.critical_exponent(m, d)
    assert r.ratio == pytest.approx(2 ** (m * (1 - p / p_star)), rel=1e-3)


def test_constant_symbol_converges():
    r = schatten.criterion_integral(WeightSpec.radial_power(4), SymbolPoly((2.0,)), 3.0)
    assert r.verdict == Verdict.CONVERGES and max(r.partials) == 0


@pytest.fixture(scope="module")
def spectra():
    out = {}
    for m, d in [(4, 1), (6, 1), (6, 2)]:
        b = fock.OrthoBasis.build(WeightSpec.radial_power(m), 2000 + 2 * d)
        out[(m, d)] = hankel.spectrum(b, SymbolPoly.monomial(d), 2000)
    return out


@pytest.mark.parametrize("key", [(4, 1), (6, 1), (6, 2)])
def test_decay_exponent(spectra, key):
    m, d = key
    fit = schatten.decay_fit(spectra[key], (200, 1000))
    assert fit.alpha == pytest.approx((m - 2 * d) / (2 * m), abs=0.01)


@pytest.mark.parametrize("key", [(4, 1), (6, 1), (6, 2)])
def test_never_hilbert_schmidt(spectra, key):
    assert schatten.schatten_partial_norm(spectra[key], 2.0).verdict == Verdict.DIVERGES


@pytest.mark.parametrize("key", [(4, 1), (6, 1), (6, 2)])
def test_spectral_verdicts_nest(spectra, key):
    vs = [schatten.schatten_partial_norm(spectra[key], p).verdict for p in np.linspace(2, 12, 21)]
    first = vs.index(Verdict.CONVERGES) if Verdict.CONVERGES in vs else len(vs)
    assert all(v == Verdict.CONVERGES for v in vs[first:])


def test_decay_fit_window_guard(spectra):
    with pytest.raises(ValueError):
        schatten.decay_fit(spectra[(4, 1)], (10, 15))
    with pytest.raises(ValueError):
        schatten.decay_fit(spectra[(6, 2)], (100, 1999))


def test_classify_three_way(spectra):
    rep = schatten.classify(WeightSpec.radial_power(4), SymbolPoly.monomial(1), [2.5, 3, 3.8, 4.2, 5, 6], spectra[(4, 1)])
    assert rep.p_star == 4.0 and rep.hs_verdict == Verdict.DIVERGES
    assert [v.in_band for v in rep.verdicts] == [False, False, True, True, False, False]
    assert "canonical solution operator" in rep.label
    rec = rep.to_record()
    assert rec["p_star"] == 4.0 and len(rec["verdicts"]) == 6


def test_classify_never_case():
    b = fock.OrthoBasis.build(WeightSpec.radial_power(2), 400)
    spec = hankel.spectrum(b, SymbolPoly.monomial(1), 398)
    rep = schatten.classify(WeightSpec.radial_power(2), SymbolPoly.monomial(1), [3, 6, 12], spec)
    assert rep.to_record()["p_star"] == "inf"
    assert all(v.spectral == Verdict.DIVERGES for v in rep.verdicts)


def test_classify_rejects_unsorted(spectra):
    with pytest.raises(ValueError):
        schatten.classify(WeightSpec.radial_power(4), SymbolPoly.monomial(1), [5, 3], spectra[(4, 1)])


@given(st.floats(0.1, 1.0), st.floats(0.01, 20.0))
def test_envelope_positive_and_branch_continuity(eps, sep):
    w = WeightSpec.radial_power(4)
    k = schatten.EnvelopeKernel(w, eps)
    z = 1.3 + 0.2j
    rz = float(RadiusField(w)(z))
    zeta = z + sep * rz
    d = sep  # any nonnegative distance keeps B > 0
    assert float(k(z, zeta, d)) > 0
    near = float(k(z, z + rz, 1.0))
    far = float(k(z, z + rz * (1 + 1e-9), 1.0))
    assert 0.1 <= near / far <= 10 * math.e


def test_envelope_rejects_bad_eps():
    with pytest.raises(ValueError):
        schatten.EnvelopeKernel(WeightSpec.radial_power(4), 0.0)


def test_envelope_near_branch_exact():
    w = WeightSpec.radial_power(4)
    k = schatten.EnvelopeKernel(w, 1.0)
    rz = float(RadiusField(w)(0.7))
    q = 1.5
    total = k.inner_norms(0.7, [q])[0, 0]
    assert total >= 2 * math.pi * rz ** (2 - q) / (2 - q)


@pytest.mark.slow
def test_envelope_matches_criterion():
    w = WeightSpec.radial_power(4)
    res = schatten.envelope_mixed_norms(w, [3.0, 5.0])
    for r in res:
        crit = schatten.criterion_integral(w, SymbolPoly.monomial(1), r.p)
        assert r.verdict == crit.verdict
