"""Acceptance gate and derived-example checks.

Each check returns a :class:`Outcome`.  ``CRITERIA`` are the nine headline
criteria; ``EXAMPLES`` reproduce every closed-form or exponent-arithmetic
example of the individual operations.  ``fockspec verify`` runs both.
"""

from __future__ import annotations

import json
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import fock, geometry, hankel, schatten, weights
from .fock import OrthoBasis
from .hankel import SymbolPoly
from .weights import WeightSpec

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class Outcome:
    key: str
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.key:<28} {self.title} ({self.seconds:.2f} s) {self.detail}"

    def to_record(self) -> dict:
        return {"check": self.key, "title": self.title, "pass": self.passed, "detail": self.detail}


Check = Callable[[], tuple[bool, str]]
CRITERIA: list[tuple[str, str, Check]] = []
EXAMPLES: list[tuple[str, str, Check]] = []


def _register(table, key, title):
    def deco(fn):
        table.append((key, title, fn))
        return fn
    return deco


def criterion(n: int, title: str):
    return _register(CRITERIA, f"criterion_{n}", title)


def example(key: str, title: str):
    return _register(EXAMPLES, key, title)


def run_check(key: str, title: str, fn: Check) -> Outcome:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure with its reason recorded
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    return Outcome(key, title, bool(ok), detail, time.perf_counter() - t0)


def run_all(include_examples: bool = True, echo=None) -> list[Outcome]:
    out = []
    for table in (CRITERIA, EXAMPLES) if include_examples else (CRITERIA,):
        for key, title, fn in table:
            o = run_check(key, title, fn)
            if echo is not None:
                echo(o.line())
            out.append(o)
    return out


# ---------------------------------------------------------------------------
# shared fixtures
# ---------------------------------------------------------------------------

_cache: dict = {}


def power(m: float) -> WeightSpec:
    return WeightSpec.radial_power(m)


def basis(m: float, n_max: int) -> OrthoBasis:
    key = ("basis", m, n_max)
    if key not in _cache:
        _cache[key] = OrthoBasis.build(power(m), n_max)
    return _cache[key]


def closed_spectrum(m: float, d: int, N: int = 2000) -> hankel.HankelSpectrum:
    key = ("spec", m, d, N)
    if key not in _cache:
        _cache[key] = hankel.closed_form_spectrum(basis(m, N + 2 * d), SymbolPoly.monomial(d), N)
    return _cache[key]


def gaussian_kernel(z, zeta):
    return (2 / math.pi) * np.exp(2 * np.asarray(z) * np.conj(np.asarray(zeta)))


def _close(a, b, tol) -> bool:
    return abs(a - b) <= tol


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

@criterion(1, "Gaussian flat spectrum")
def c1():
    t0 = time.perf_counter()
    b = basis(2, 202)
    g = SymbolPoly.monomial(1)
    cf = hankel.closed_form_spectrum(b, g, 200)
    ei = hankel.spectrum(b, g, 200, "eigensolver")
    dt = time.perf_counter() - t0
    e1 = float(np.max(np.abs(cf.s - 2**-0.5)))
    e2 = float(np.max(np.abs(ei.s - 2**-0.5)))
    return (e1 <= 1e-9 and e2 <= 1e-8 and dt < 5), f"closed {e1:.2e}, eigensolver {e2:.2e}, runtime {'<' if dt < 5 else '>='} 5 s"


CASES = ((4, 1), (6, 1), (6, 2))


@criterion(2, "decay exponents")
def c2():
    parts, ok = [], True
    for m, d in CASES:
        t0 = time.perf_counter()
        fit = schatten.decay_fit(closed_spectrum(m, d), (100, 1000))
        dt = time.perf_counter() - t0
        want = (m - 2 * d) / (2 * m)
        ok &= abs(fit.alpha - want) <= 0.02 and dt < 30
        parts.append(f"({m},{d}) {fit.alpha:.4f} vs {want:.4f}")
    return ok, "; ".join(parts)


@criterion(3, "threshold agreement")
def c3():
    stars = [schatten.critical_exponent(m, d) for m, d in CASES]
    ok = stars == [4.0, 3.0, 6.0] and math.isinf(schatten.critical_exponent(4, 2))
    parts = [f"p*={stars}"]
    for (m, d), ps in zip(CASES, stars):
        grid = [ps * k for k in (0.5, 0.75, 1.25, 1.5, 2.0)]
        rep = schatten.classify(power(m), SymbolPoly.monomial(d), grid, closed_spectrum(m, d))
        trip = ["".join(v.value[0] for v in (pv.criterion, pv.exponent, pv.spectral)) for pv in rep.verdicts]
        ok &= all(len(set(t)) == 1 for t in trip)
        parts.append(f"({m},{d}) {' '.join(trip)}")
    return ok, "; ".join(parts)


@criterion(4, "never Hilbert-Schmidt")
def c4():
    parts, ok = [], True
    for m, d in CASES:
        s = closed_spectrum(m, d).s
        ratio = float(np.sum(s[:2000] ** 2) / np.sum(s[:200] ** 2))
        v = schatten.schatten_partial_norm(closed_spectrum(m, d), 2.0).verdict
        ok &= ratio >= 2 and v == schatten.Verdict.DIVERGES
        parts.append(f"({m},{d}) S(2000)/S(200)={ratio:.3f} {v.value}")
    return ok, "; ".join(parts)


@criterion(5, "geometry")
def c5():
    w2, w4 = power(2), power(4)
    pts = [0, 1 + 1j, -3.5, 10j, 7 - 2j]
    e_rho2 = max(abs(float(geometry.rho(w2, z)) - 1 / (2 * SQRT_PI)) for z in pts)
    e_rho4 = abs(float(geometry.rho(w4, 0)) - (8 * math.pi) ** -0.25)
    dist = [geometry.bergman_distance(w2, 0, R, nodes_per_rho=8) / (2 * SQRT_PI * R) - 1 for R in (1, 2)]
    slopes = [geometry.growth_exponents(power(m)).slope for m in (2, 4, 6)]
    ok = (e_rho2 <= 1e-8 and e_rho4 <= 1e-6 and max(abs(x) for x in dist) <= 0.02
          and all(abs(s - (2 - m) / 2) <= 0.03 for s, m in zip(slopes, (2, 4, 6))))
    return ok, (f"rho err {e_rho2:.1e}/{e_rho4:.1e}, d rel err {dist[0]:+.1e},{dist[1]:+.1e}, "
                f"slopes {[round(s, 4) for s in slopes]}")


@criterion(6, "kernel estimates")
def c6():
    b2 = basis(2, 80)
    g = np.linspace(-2, 2, 9)
    zz = (g[:, None] + 1j * g[None, :]).ravel()
    zz = zz[np.abs(zz) <= 2]
    zi, zj = np.meshgrid(zz, zz[::7], indexing="ij")
    kv = fock.kernel(b2, zi, zj)
    rel = float(np.max(np.abs(kv.value - gaussian_kernel(zi, zj)) / np.abs(gaussian_kernel(zi, zj))))
    b4 = basis(4, 400)
    r = np.linspace(0, 6, 25)
    samples = (r[:, None] * np.exp(1j * np.linspace(0, np.pi / 2, 4))[None, :]).ravel()
    diag = fock.diagonal_estimate_check(b4, samples, extend=True)
    near = fock.near_diagonal_check(b4, 0.25, np.linspace(0, 5, 11) * np.exp(0.3j))
    ok = rel <= 1e-6 and diag.passed and diag.max / diag.min <= 100 and near.min >= 0.5
    return ok, (f"Gaussian rel err {rel:.1e}; diagonal band {diag.max / diag.min:.3f} "
                f"(n_terms {diag.params['n_terms']}); near-diagonal min {near.min:.4f}")


@criterion(7, "operator identities")
def c7():
    b4 = basis(4, 604)
    z2 = SymbolPoly.monomial(2)
    pts = np.array([0, 1, 2, 1.5j, -1 + 1j, 2.5 - 0.5j])
    img = hankel.kernel_image_check(b4, z2, 2.0, pts, N=600)
    f = np.zeros(8)
    f[3] = 1
    bz = basis(4, 40)
    r1 = hankel.dbar_residual(bz, SymbolPoly.monomial(1), f, 0.5, 1e-3)
    r2 = hankel.dbar_residual(bz, SymbolPoly.monomial(1), f, 0.5, 5e-4)
    tb = hankel.toeplitz_trace_bound(basis(4, 2002), SymbolPoly.monomial(1), 5, 2000)
    slack = tb.integral_bound / tb.trace_sum
    ok = img <= 1e-5 and 3.5 <= r1 / r2 <= 4.5 and tb.holds and slack >= 1
    return ok, f"image residual {img:.1e}; Richardson {r1 / r2:.4f}; trace bound slack {slack:.3f}"


@criterion(8, "envelope mixed-norm pincer")
def c8():
    t0 = time.perf_counter()
    w4 = power(4)
    res = schatten.envelope_mixed_norms(w4, [3.0, 5.0])
    crit = [schatten.criterion_integral(w4, SymbolPoly.monomial(1), p).verdict for p in (3.0, 5.0)]
    dt = time.perf_counter() - t0
    want = [schatten.Verdict.DIVERGES, schatten.Verdict.CONVERGES]
    ok = all(r.verdict_B == r.verdict_Bstar == c == v for r, c, v in zip(res, crit, want)) and dt < 120
    return ok, (f"p=3 {res[0].verdict_B.value}/{res[0].verdict_Bstar.value} (ratio {res[0].ratio_B:.3f}); "
                f"p=5 {res[1].verdict_B.value}/{res[1].verdict_Bstar.value} (ratio {res[1].ratio_B:.3f}); runtime {'<' if dt < 120 else '>='} 120 s")


@criterion(9, "spineq")
def c9():
    sp = closed_spectrum(4, 1)
    r = hankel.spineq_check(basis(4, 2002), sp, SymbolPoly.monomial(1), 5)
    return r.lhs <= 100 * r.rhs, f"lhs {r.lhs:.4f}, sum s^p {r.rhs:.4f}, ratio {r.ratio:.2f} (R={r.R:.2f}, N={r.N})"


# ---------------------------------------------------------------------------
# weights examples
# ---------------------------------------------------------------------------

@example("weights.eval_phi_tabulated", "tabulated 16 r^2 density reproduces |z|^4")
def e_w1():
    r = np.linspace(0, 5, 201)
    w = WeightSpec.tabulated(r, 16 * r**2)
    v = float(weights.eval_phi(w, 2j))
    return abs(v - 16) <= 1e-6, f"{v:.10f}"


@example("weights.disc_mass_centered", "centered masses 4 pi and 8 pi")
def e_w2():
    a = float(weights.disc_mass_centered(power(2), 1.0))
    b = float(weights.disc_mass_centered(power(4), 1.0))
    return _close(a, 4 * math.pi, 1e-12) and _close(b, 8 * math.pi, 1e-12), f"{a:.10f}, {b:.10f}"


@example("weights.disc_mass", "off-center disc masses")
def e_w3():
    a = weights.disc_mass(power(2), 5 + 3j, 1.0, method="quadrature")
    b = weights.disc_mass(power(4), 0, 1.0, method="quadrature")
    c = weights.disc_mass(power(4), 10, 0.1, method="quadrature")
    lo, hi = math.pi * 0.01 * 16 * 9.9**2, math.pi * 0.01 * 16 * 10.1**2
    ok = _close(a, 4 * math.pi, 1e-6) and _close(b, 8 * math.pi, 1e-6) and lo <= c <= hi
    return ok, f"{a:.9f}, {b:.9f}, {c:.6f} in [{lo:.4f}, {hi:.4f}]"


@example("weights.moment", "log-Gamma moments")
def e_w4():
    a = weights.moment(power(2), 0) - math.log(math.pi / 2)
    b = weights.moment(power(2), 3) - math.log(3 * math.pi / 8)
    c = weights.moment(power(4), 0) - math.log(math.pi**1.5 / 2**1.5)
    q = weights.moment_quadrature(power(4), 0) - weights.moment(power(4), 0)
    ok = max(abs(a), abs(b), abs(c)) <= 1e-13 and abs(q) <= 1e-10
    return ok, f"errors {a:.1e}, {b:.1e}, {c:.1e}; quadrature {q:.1e}"


# ---------------------------------------------------------------------------
# geometry examples
# ---------------------------------------------------------------------------

@example("geometry.rho", "rho closed forms and local-density limit")
def e_g1():
    w4 = power(4)
    a = float(geometry.rho(power(2), 3 - 1j)) - 1 / (2 * SQRT_PI)
    b = float(geometry.rho(w4, 0)) - (8 * math.pi) ** -0.25
    c = float(geometry.rho(w4, 100))
    ref = (16 * math.pi) ** -0.5 / 100
    tight = float(geometry.rho(w4, 100, tol=1e-14))
    ok = abs(a) <= 1e-9 and abs(b) <= 1e-9 and 0.9 * ref <= c <= 1.1 * ref and abs(c - tight) <= 1e-10 * tight
    return ok, f"{a:.1e}, {b:.1e}, rho(100)/c = {c / ref:.6f}"


@example("geometry.doubling_stats", "doubling ratios 4, 16 and local 4")
def e_g2():
    s2 = geometry.doubling_stats(power(2), [0, 1 + 1j, -2], [0.5, 1.0])
    s4 = geometry.doubling_stats(power(4), [0], [0.5, 1.0, 2.0])
    s4f = geometry.doubling_stats(power(4), [50], [0.005, 0.01])
    ok = abs(s2.C_doubling - 4) <= 1e-6 and abs(s4.C_doubling - 16) <= 1e-6 and abs(s4f.C_doubling - 4) <= 0.01
    return ok, f"{s2.C_doubling:.9f}, {s4.C_doubling:.9f}, {s4f.C_doubling:.6f}"


@example("geometry.rho_comparability", "rho comparability constants")
def e_g3():
    c2 = geometry.rho_comparability(power(2), 2.0, [0, 1 + 1j, 3])
    centers = np.linspace(0, 20, 21)
    c1 = geometry.rho_comparability(power(4), 1.0, centers)
    c3 = geometry.rho_comparability(power(4), 3.0, centers)
    ok = abs(c2 - 1) <= 1e-9 and c1 <= 4 and c3 >= c1
    return ok, f"m=2 {c2:.12f}; m=4 c(1)={c1:.4f}, c(3)={c3:.4f}"


@example("geometry.bergman_distance", "grid distance vs straight-line and radial oracles")
def e_g4():
    w2, w4 = power(2), power(4)
    a = geometry.bergman_distance(w2, 0, 1.5, nodes_per_rho=8) / (2 * SQRT_PI * 1.5) - 1
    d = geometry.bergman_distance(w4, 0, 3, nodes_per_rho=8)
    ref = geometry.radial_distance(w4, 3)
    z = geometry.bergman_distance(w4, 1 + 1j, 1 + 1j)
    ok = abs(a) <= 0.02 and abs(d / ref - 1) <= 0.03 and z == 0
    return ok, f"m=2 rel {a:+.1e}; m=4 {d:.4f} vs {ref:.4f}"


@example("geometry.growth_exponents", "rho growth slopes")
def e_g5():
    s4 = geometry.growth_exponents(power(4)).slope
    s6 = geometry.growth_exponents(power(6)).slope
    return abs(s4 + 1) <= 0.02 and abs(s6 + 2) <= 0.03, f"{s4:.5f}, {s6:.5f}"


@example("geometry.distance_envelope", "distance envelopes")
def e_g6():
    e2 = geometry.distance_envelope_check(power(2), [(0, 0.1), (0, 0.2j), (1, 1.25)], nodes_per_rho=8)
    e4 = geometry.distance_envelope_check(power(4), [(0, 3), (1, 3 + 2j), (0, -2.5j), (2, -2)])
    ok = e2.passed and e2.C_near <= 1.01 and e4.passed and 0 < e4.delta_fit < 1
    return ok, f"m=2 C_near {e2.C_near:.4f}; m=4 delta {e4.delta_fit:.2f}, C_r {e4.C_r:.3f}"


@example("geometry.integral_decay", "integral decay estimate")
def e_g7():
    r2 = geometry.integral_decay_check(power(2), 0.3 + 0.2j, 0, 1.0, tail_exp=30, nodes_per_rho=4)
    rs = [geometry.integral_decay_check(power(4), z, 2, 1.0).ratio for z in (0, 5, 20)]
    ok = r2.tail_increment <= 1e-4 and max(rs) / min(rs) <= 10
    return ok, f"m=2 ratio {r2.ratio:.5f} (increment {r2.tail_increment:.1e}); m=4 {[round(x, 4) for x in rs]}"


# ---------------------------------------------------------------------------
# fock examples
# ---------------------------------------------------------------------------

@example("fock.kernel", "kernel at the origin, Gaussian closed form and brute-force sum")
def e_f1():
    b4 = basis(4, 400)
    k00 = fock.kernel(b4, 0, 0).value
    z0 = abs(k00 - math.exp(-b4.moments[0])) / abs(k00)
    kv = fock.kernel(b4, 1, 1, extend=True).value.real
    ref = 0.0
    for n in range(400):
        ref += math.exp(-(math.log(math.pi / 2) + math.lgamma((2 * n + 2) / 4) - (2 * n + 2) / 4 * math.log(2)))
    b2 = basis(2, 80)
    zs = np.array([2, 1 + 1j, -1.5j])
    gs = np.abs(fock.kernel(b2, zs, zs[::-1]).value / gaussian_kernel(zs, zs[::-1]) - 1).max()
    ok = z0 <= 1e-14 and abs(kv / ref - 1) <= 1e-13 and gs <= 1e-6
    return ok, f"K(0,0) {z0:.1e}; K(1,1) {kv:.15f} vs {ref:.15f}; Gaussian {gs:.1e}"


@example("fock.normalized_kernel", "normalized kernels and their norms")
def e_f2():
    b2 = basis(2, 80)
    z = np.array([0, 1, 1j])
    k, flagged = fock.normalized_kernel(b2, 1.0, z)
    ref = math.sqrt(2 / math.pi) * np.exp(2 * z - 1)
    e = float(np.max(np.abs(k - ref)))
    k0, _ = fock.normalized_kernel(b2, 0.0, 0.0)
    norms = [fock.normalized_kernel_norm(b2, lam) for lam in (0, 1, 2 + 1j)]
    ok = e <= 1e-6 and not flagged and abs(k0 - math.exp(-0.5 * b2.moments[0])) <= 1e-14 and max(abs(n - 1) for n in norms) <= 1e-6
    return ok, f"k_1 err {e:.1e}; norms {[round(n, 12) for n in norms]}"


@example("fock.diagonal_estimate", "diagonal ratio")
def e_f3():
    r = np.linspace(0, 3, 7)
    s = (r[:, None] * np.exp(1j * np.array([0, 1.0, 2.0]))[None, :]).ravel()
    d2 = fock.diagonal_estimate_check(basis(2, 80), s, extend=True)
    d0 = fock.diagonal_estimate_check(basis(4, 400), [0])
    want0 = math.exp(-basis(4, 400).moments[0]) * float(geometry.rho(power(4), 0)) ** 2
    d4 = fock.diagonal_estimate_check(basis(4, 400), np.linspace(0, 6, 13), extend=True)
    ok = d2.max / d2.min - 1 <= 1e-3 and abs(d0.min / want0 - 1) <= 1e-12 and d4.max / d4.min <= 100
    return ok, f"m=2 spread {d2.max / d2.min - 1:.1e}; z=0 {d0.min:.6f}; m=4 band {d4.max / d4.min:.3f}"


@example("fock.offdiagonal_decay", "off-diagonal decay fit")
def e_f4():
    b2 = basis(2, 80)
    pairs = [(0.5 + 0.5j, 0.5 + 0.5j + s * np.exp(1j * t)) for s in np.linspace(0, 4, 9) for t in (0.0, 0.7)]
    fit2 = fock.offdiagonal_decay_fit(b2, pairs)
    b4 = basis(4, 400)
    near_pairs = [(z, z + 0.2 * float(geometry.rho(power(4), z)) * np.exp(1j * t)) for z in (0, 1, 2) for t in (0, 2)]
    fitn = fock.offdiagonal_decay_fit(b4, near_pairs)
    lower = fock.near_diagonal_check(b4, 0.25, [0, 1, 2])
    same = fock.offdiagonal_decay_fit(b4, [(1.5, 1.5)])
    diag = fock.diagonal_estimate_check(b4, [1.5])
    ok = (fit2.passed and fit2.eps_fit == 1.0 and fitn.passed and lower.min > 0
          and abs(same.constants[1.0] - diag.max) <= 1e-12 * diag.max)
    return ok, f"m=2 eps {fit2.eps_fit} c {fit2.c_fit:.3f}; near-diagonal c {fitn.c_fit:.3f}"


@example("fock.near_diagonal", "near-diagonal ratio")
def e_f5():
    b2 = basis(2, 120)
    c = np.array([0, 0.5 + 0.5j])
    chk = fock.near_diagonal_check(b2, 0.5, c)
    rho2 = 1 / (2 * SQRT_PI)
    zeta = c[1] + 0.5 * rho2 * 0.6 * np.exp(0.4j)
    kv = fock.kernel(b2, c[1], zeta).value
    dz = fock.kernel(b2, c[1], c[1]).value.real
    dzeta = fock.kernel(b2, zeta, zeta).value.real
    ratio = abs(kv) / math.sqrt(dz * dzeta)
    exact = math.exp(-abs(c[1] - zeta) ** 2)
    ok4 = fock.near_diagonal_check(basis(4, 400), 0.25, np.linspace(0, 5, 11)).min >= 0.5
    ok = chk.min >= math.exp(-(0.5 * rho2) ** 2) - 1e-12 and abs(ratio - exact) <= 1e-10 and chk.max <= 1 + 1e-12 and ok4
    return ok, f"m=2 min {chk.min:.6f} >= {math.exp(-(0.5 * rho2) ** 2):.6f}; closed-form err {abs(ratio - exact):.1e}"


# ---------------------------------------------------------------------------
# hankel examples
# ---------------------------------------------------------------------------

@example("hankel.gram", "Gram closed forms")
def e_h1():
    G = hankel.hankel_gram(basis(2, 60), SymbolPoly.monomial(1), 50)
    e1 = float(np.max(np.abs(G.bands[0] - 0.5)))
    b4 = basis(4, 60)
    G2 = hankel.hankel_gram(b4, SymbolPoly.monomial(2), 20)
    want = [math.exp(b4.moments[n + 2] - b4.moments[n]) for n in (0, 1)]
    e2 = max(abs(G2.bands[0][n] / want[n] - 1) for n in (0, 1))
    Gc = hankel.hankel_gram(b4, SymbolPoly((3.0,)), 20)
    ok = e1 <= 1e-12 and e2 <= 1e-12 and not np.any(Gc.dense())
    return ok, f"m=2 diag err {e1:.1e}; m=4 rows 0,1 err {e2:.1e}"


@example("hankel.singular_values", "closed-form and eigensolver spectra")
def e_h2():
    g = SymbolPoly.monomial(1)
    a = hankel.spectrum(basis(2, 202), g, 200, "eigensolver")
    e1 = float(np.max(np.abs(a.s - 2**-0.5)))
    b4 = basis(4, 2002)
    ei = hankel.spectrum(b4, g, 2000, "eigensolver")
    n = np.arange(2000)
    lm = b4.moments.log_moments
    ref = np.sqrt(np.exp(lm[n + 1] - lm[n]) - np.where(n > 0, np.exp(lm[n] - lm[np.maximum(n - 1, 0)]), 0.0))
    e2 = float(np.max(np.abs(np.sort(ref)[::-1] - ei.s)))
    zero = hankel.spectrum(b4, SymbolPoly((1.5,)), 100, "eigensolver")
    ok = e1 <= 1e-9 and e2 <= 1e-8 and not np.any(zero.s)
    return ok, f"m=2 {e1:.1e}; m=4 vs Gamma-ratio formula {e2:.1e}"


@example("hankel.symbol_growth", "boundedness and compactness indicators")
def e_h3():
    a = hankel.symbol_growth_indicator(power(2), SymbolPoly.monomial(1))
    b = hankel.symbol_growth_indicator(power(4), SymbolPoly.monomial(1))
    c = hankel.symbol_growth_indicator(power(4), SymbolPoly.monomial(3))
    ok = (abs(a.sup_value - 1 / (2 * SQRT_PI)) <= 1e-9 and a.verdict == "BOUNDED"
          and b.verdict == "COMPACT" and abs(b.exponent + 1) <= 0.02
          and c.verdict == "UNBOUNDED" and abs(c.exponent - 1) <= 0.02)
    return ok, f"{a.verdict} sup {a.sup_value:.9f}; {b.verdict} {b.exponent:.4f}; {c.verdict} {c.exponent:.4f}"


@example("hankel.kernel_image", "H k_lambda against the pointwise formula")
def e_h4():
    b2 = basis(2, 200)
    g = SymbolPoly.monomial(1)
    z = np.array([0, 1j, 2])
    c = fock.kernel_coefficients(b2, 1.0, 200)
    got = hankel.hankel_apply(b2, g, c, z)
    closed = (np.conj(z) - 1) * math.sqrt(2 / math.pi) * np.exp(2 * z - 1)
    e1 = float(np.max(np.abs(got - closed)))
    at_lam = abs(hankel.hankel_apply(basis(2, 200), g, fock.kernel_coefficients(b2, 0.0, 200), np.array([0.0]))[0])
    e2 = hankel.kernel_image_check(basis(4, 604), SymbolPoly.monomial(2), 2.0, np.array([0, 1, 2, 1.5j]), N=600)
    ok = e1 <= 1e-6 and at_lam <= 1e-15 and e2 <= 1e-5
    return ok, f"m=2 {e1:.1e}; at lambda {at_lam:.1e}; m=4 {e2:.1e}"


@example("hankel.dbar_residual", "dbar of H f")
def e_h5():
    b2 = basis(2, 40)
    f0 = np.zeros(4)
    f0[0] = 1
    r0 = hankel.dbar_residual(b2, SymbolPoly.monomial(1), f0, 1.0, 1e-3)
    rc = hankel.dbar_residual(b2, SymbolPoly((2.0,)), f0, 1.0, 1e-3)
    f3 = np.zeros(8)
    f3[3] = 1
    r3 = hankel.dbar_residual(basis(4, 40), SymbolPoly.monomial(1), f3, 0.5, 1e-3)
    # u = zbar/sqrt(I_0) is linear here, so central differences are exact up to roundoff
    ok = r0 <= 1e-9 and rc == 0 and r3 <= 1e-5
    return ok, f"m=2 e_0 {r0:.1e} (exact case); constant {rc:.1e}; m=4 e_3 {r3:.1e}"


@example("hankel.spineq", "spectral integral inequality")
def e_h6():
    g = SymbolPoly.monomial(1)
    ratios = []
    for N in (250, 500, 1000, 2000):
        b = basis(4, N + 2)
        ratios.append(hankel.spineq_check(b, hankel.closed_form_spectrum(b, g, N), g, 2).ratio)
    r5 = hankel.spineq_check(basis(4, 2002), closed_spectrum(4, 1), g, 5)
    const = hankel.spineq_check(basis(4, 2002), hankel.closed_form_spectrum(basis(4, 2002), SymbolPoly((1,)), 100),
                                SymbolPoly((1,)), 2)
    ok = all(0.01 <= r <= 100 for r in ratios) and r5.lhs <= 100 * r5.rhs and const.lhs == const.rhs == 0
    return ok, f"p=2 ratios {[round(r, 3) for r in ratios]}; p=5 ratio {r5.ratio:.3f}"


@example("hankel.toeplitz_trace", "Toeplitz trace bound")
def e_h7():
    g = SymbolPoly.monomial(1)
    t5 = hankel.toeplitz_trace_bound(basis(4, 2002), g, 5, 2000)
    t3 = [hankel.toeplitz_trace_bound(basis(4, N + 2), g, 3, N) for N in (250, 1000, 2000)]
    grows = t3[0].integral_bound < t3[1].integral_bound < t3[2].integral_bound
    tc = hankel.toeplitz_trace_bound(basis(4, 102), SymbolPoly((2,)), 5, 100)
    ok = t5.holds and all(t.holds for t in t3) and grows and tc.trace_sum == tc.integral_bound == 0
    return ok, (f"p=5 {t5.trace_sum:.5f} <= {t5.integral_bound:.5f}; "
                f"p=3 integral {[round(t.integral_bound, 4) for t in t3]}")


# ---------------------------------------------------------------------------
# schatten examples
# ---------------------------------------------------------------------------

@example("schatten.criterion_integral", "criterion integral verdicts")
def e_s1():
    w4 = power(4)
    g = SymbolPoly.monomial(1)
    a = schatten.criterion_integral(w4, g, 5)
    b = schatten.criterion_integral(w4, g, 3)
    c = schatten.criterion_integral(w4, SymbolPoly((1,)), 4)
    V = schatten.Verdict
    ok = (a.verdict == a.exponent_verdict == V.CONVERGES and a.exponent == -2
          and b.verdict == b.exponent_verdict == V.DIVERGES and b.exponent == 0
          and c.verdict == V.CONVERGES and not any(c.partials))
    return ok, f"p=5 {a.verdict.value} (e={a.exponent}); p=3 {b.verdict.value} (e={b.exponent})"


@example("schatten.critical_exponent", "critical exponents")
def e_s2():
    got = [schatten.critical_exponent(m, d) for m, d in ((4, 1), (6, 1), (6, 2), (4, 2))]
    return got[:3] == [4, 3, 6] and math.isinf(got[3]), f"{got}"


@example("schatten.decay_fit", "decay exponents from closed-form spectra")
def e_s3():
    a = schatten.decay_fit(closed_spectrum(2, 1), (100, 1000)).alpha
    b = schatten.decay_fit(closed_spectrum(4, 1), (100, 1000)).alpha
    c = schatten.decay_fit(closed_spectrum(6, 2), (100, 1000)).alpha
    ok = abs(a) <= 0.01 and abs(b - 0.25) <= 0.02 and abs(c - 1 / 6) <= 0.02
    return ok, f"{a:.2e}, {b:.5f}, {c:.5f}"


@example("schatten.partial_norm", "partial Schatten sums")
def e_s4():
    sp = closed_spectrum(4, 1)
    hs = schatten.schatten_partial_norm(sp, 2)
    s = sp.s
    ratio = float(np.sum(s[:2000] ** 2) / np.sum(s[:200] ** 2))
    conv = schatten.schatten_partial_norm(sp, 4.5)
    zero = schatten.schatten_partial_norm(hankel.closed_form_spectrum(basis(4, 102), SymbolPoly((1,)), 100), 3)
    V = schatten.Verdict
    ok = ratio >= 2 and hs.verdict == V.DIVERGES and conv.verdict == V.CONVERGES and not any(zero.partials)
    return ok, f"S(2000)/S(200) {ratio:.3f}; p=4.5 {conv.verdict.value} (ratio {conv.ratio:.4f})"


@example("schatten.envelope", "envelope inner integral and verdicts")
def e_s5():
    w4 = power(4)
    kern = schatten.EnvelopeKernel(w4, 1.0)
    z = 1.3
    rz = float(kern.rho_field(z))
    q = 1.5
    # independent polar Gauss rule for the near branch, substituting s = t^2 to tame s^(1-q)
    x, wq = np.polynomial.legendre.leggauss(40)
    t = 0.5 * (x + 1) * math.sqrt(rz)
    near = float(np.sum(0.5 * math.sqrt(rz) * wq * (t**2) ** (1 - q) * 2 * t)) * 2 * math.pi
    exact = 2 * math.pi * rz ** (2 - q) / (2 - q)
    res = schatten.envelope_mixed_norms(w4, [3.0, 5.0])
    V = schatten.Verdict
    ok = abs(near / exact - 1) <= 1e-10 and res[0].verdict == V.DIVERGES and res[1].verdict == V.CONVERGES
    return ok, f"near branch {near:.10f} vs {exact:.10f}; p=3 {res[0].verdict.value}, p=5 {res[1].verdict.value}"


@example("schatten.classify", "three-way classification")
def e_s6():
    V = schatten.Verdict
    rep = schatten.classify(power(4), SymbolPoly.monomial(1), [3, 3.5, 4.5, 5, 6], closed_spectrum(4, 1))
    got = "".join(v.criterion.value[0] + v.spectral.value[0] for v in rep.verdicts)
    rep2 = schatten.classify(power(2), SymbolPoly.monomial(1), [3, 4, 6], closed_spectrum(2, 1))
    all_d = all(v.criterion == v.spectral == V.DIVERGES for v in rep2.verdicts)
    repc = schatten.classify(power(4), SymbolPoly((1,)), [3, 5],
                             hankel.closed_form_spectrum(basis(4, 102), SymbolPoly((1,)), 100))
    all_c = all(v.criterion == v.spectral == V.CONVERGES for v in repc.verdicts)
    ok = got == "DDDDCCCCCC" and all_d and all_c and "canonical solution operator" in rep.label
    return ok, f"m=4 {got}; m=2 all DIVERGES {all_d}; constant all CONVERGES {all_c}"


# ---------------------------------------------------------------------------
# cli examples
# ---------------------------------------------------------------------------

@example("cli.spectrum_and_schatten", "CLI artifacts")
def e_c1():
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        rc1 = main(["spectrum", "--out", tmp], environ={"FOCKSPEC_M": "2", "FOCKSPEC_N": "200"})
        rows = [ln.split(",") for ln in Path(tmp, "spectrum.csv").read_text().splitlines()
                if ln and not ln.startswith("#")][1:]
        s = np.array([float(r[1]) for r in rows])
        rc2 = main(["schatten", "--out", tmp], environ={"FOCKSPEC_M": "4", "FOCKSPEC_N": "2000"})
        rep = json.loads(Path(tmp, "schatten.json").read_text())["result"]
    ok = rc1 == 0 and rc2 == 0 and s.size == 200 and np.max(np.abs(s - 2**-0.5)) <= 1e-9 and rep["p_star"] == 4
    return ok, f"spectrum rows {s.size}; p_star {rep['p_star']}"
