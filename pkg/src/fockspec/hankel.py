"""Hankel operators H_gbar f = gbar f - P(gbar f) with analytic polynomial g.

On a radial weight every inner product of monomials is a single moment, so the
Gram matrix G_jk = <H e_j, H e_k> of the compression to span{e_0..e_(N-1)} is
assembled exactly from the moment table.  Writing g = sum_a c_a z^a:

    <gbar e_j, gbar e_k> = sum_a conj(c_a) c_(a+k-j) I_(k+a) / sqrt(I_j I_k)
    <gbar e_j, e_l>      = conj(c_(j-l)) sqrt(I_j / I_l)

and the constant term cancels, so G is banded with half-bandwidth deg g - 1.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .fock import OrthoBasis, TruncationError, basis_scaled, kernel_coefficients, radius_capturing
from .geometry import RadiusField, rho
from .numerics import linear_fit, log_abs_sum, panel_rule
from .weights import MomentTable

PSD_TOL = 1e-10


class InsufficientMomentsError(ValueError):
    """The moment table does not reach the indices the Gram needs."""


class PSDViolationError(ValueError):
    """A Gram matrix has an eigenvalue below -PSD_TOL * trace."""


@dataclass(frozen=True)
class SymbolPoly:
    """Analytic polynomial g(z) = sum_a coeffs[a] z^a."""

    coeffs: tuple

    def __post_init__(self):
        c = [complex(x) for x in self.coeffs] or [0j]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def monomial(cls, d: int, coeff: complex = 1.0) -> "SymbolPoly":
        if d < 0:
            raise ValueError("degree must be nonnegative")
        return cls(tuple([0.0] * d + [coeff]))

    @classmethod
    def parse(cls, text: str) -> "SymbolPoly":
        """Comma-separated coefficients c_0, c_1, ...; entries may be complex like ``1+2j``."""
        parts = [p.strip() for p in text.replace(";", ",").split(",") if p.strip()]
        if not parts:
            raise ValueError("empty coefficient list")
        return cls(tuple(complex(p.replace(" ", "")) for p in parts))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=complex)

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    @property
    def is_monomial(self) -> bool:
        return self.degree > 0 and all(c == 0 for c in self.coeffs[1:-1])

    def derivative(self) -> "SymbolPoly":
        if self.degree == 0:
            return SymbolPoly((0.0,))
        return SymbolPoly(tuple(a * c for a, c in enumerate(self.coeffs) if a > 0))

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), self.array)

    def label(self) -> str:
        terms = []
        for a, c in enumerate(self.coeffs):
            if c == 0:
                continue
            cs = f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}j)"
            terms.append(cs if a == 0 else (("" if c == 1 else cs + "*") + ("z" if a == 1 else f"z^{a}")))
        return " + ".join(terms) or "0"


# ---------------------------------------------------------------------------
# Gram assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandedGram:
    """Upper bands of a Hermitian matrix: bands[k][j] = G[j, j+k]."""

    bands: tuple
    n: int

    @property
    def bandwidth(self) -> int:
        return len(self.bands) - 1

    def dense(self) -> np.ndarray:
        G = np.zeros((self.n, self.n), dtype=complex)
        for k, band in enumerate(self.bands):
            idx = np.arange(self.n - k)
            G[idx, idx + k] = band
            if k:
                G[idx + k, idx] = np.conj(band)
        return G

    def upper_form(self) -> np.ndarray:
        """LAPACK upper banded storage for ``scipy.linalg.eigvals_banded``."""
        u = self.bandwidth
        ab = np.zeros((u + 1, self.n), dtype=complex)
        for k, band in enumerate(self.bands):
            ab[u - k, k:] = band
        return ab

    def trace(self) -> float:
        return float(np.sum(self.bands[0].real))

    def quadratic(self, c: np.ndarray) -> np.ndarray:
        """c^* G c for the columns of ``c`` (shape (n,) or (n, k))."""
        c = np.asarray(c)
        out = np.sum(self.bands[0].real[:, None] * np.abs(c.reshape(self.n, -1)) ** 2, axis=0)
        cc = c.reshape(self.n, -1)
        for k in range(1, len(self.bands)):
            out = out + 2 * np.real(np.sum(np.conj(cc[:-k]) * self.bands[k][:, None] * cc[k:], axis=0))
        return out if c.ndim > 1 else float(out[0])


def _check_table(b: OrthoBasis, N: int, d: int) -> MomentTable:
    if N < 1:
        raise ValueError("truncation N must be positive")
    need = N - 1 + 2 * d
    if b.n_max < need:
        raise InsufficientMomentsError(f"moment table has n_max={b.n_max}, the Gram needs {need}")
    return b.moments


def _half_ratio(t: MomentTable, lo: np.ndarray, hi_a: np.ndarray, hi_b: np.ndarray) -> np.ndarray:
    """(log I_hi_a + log I_hi_b)/2 - log I_lo computed as a mean of two log-ratios."""
    return 0.5 * (_lr(t, lo, hi_a - lo) + _lr(t, lo, hi_b - lo))


def _lr(t: MomentTable, n: np.ndarray, shift: np.ndarray) -> np.ndarray:
    n = np.asarray(n)
    shift = np.broadcast_to(np.asarray(shift), n.shape)
    out = np.empty(n.shape)
    for s in np.unique(shift):
        sel = shift == s
        out[sel] = t.log_ratio(n[sel], int(s)) if s != 0 else 0.0
    return out


def hankel_gram(b: OrthoBasis, g: SymbolPoly, N: int) -> BandedGram:
    """Exact Gram of H_gbar compressed to span{e_0..e_(N-1)}, in banded form."""
    d = g.degree
    t = _check_table(b, N, d)
    c = g.array
    if d == 0 or not np.any(c[1:]):
        return BandedGram((np.zeros(N),), N)
    bands = []
    for delta in range(d):
        j = np.arange(N - delta)
        k = j + delta
        acc = np.zeros(j.size, dtype=complex)
        # S1: pairs (b, b + delta) with both in 1..d
        for bb in range(1, d + 1 - delta):
            coef = np.conj(c[bb]) * c[bb + delta]
            if coef == 0:
                continue
            # I_(k+b) / sqrt(I_j I_k)
            logv = 0.5 * (_lr(t, j, bb + delta + 0 * j) + _lr(t, k, bb + 0 * j))
            acc += coef * np.exp(logv)
        # S2: l in [k - d, j - 1], l >= 0
        for a in range(1, d + 1 - delta):
            # a = j - l, k - l = a + delta
            l = j - a
            ok = l >= 0
            coef = np.conj(c[a]) * c[a + delta]
            if coef == 0 or not ok.any():
                continue
            val = np.zeros(j.size)
            val[ok] = np.exp(_half_ratio(t, l[ok], j[ok], k[ok]))
            acc -= coef * val
        # the diagonal of a Gram is real; drop roundoff imaginary parts
        bands.append(acc.real if delta == 0 else acc)
    return BandedGram(tuple(bands), N)


@dataclass(frozen=True)
class HankelSpectrum:
    weight_id: str
    symbol: str
    N: int
    s: np.ndarray
    method: str
    degree: int = 0
    min_eigenvalue: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.s, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "s", arr)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,s_n\n")
        for n, v in enumerate(self.s):
            buf.write(f"{n},{v:.17g}\n")
        return buf.getvalue()

    def to_record(self, decay_fit_ref: float | None = None) -> dict:
        return {
            "weight": self.weight_id,
            "symbol": self.symbol,
            "N": self.N,
            "method": self.method,
            "s0": float(self.s[0]) if self.s.size else 0.0,
            "decay_fit_ref": decay_fit_ref,
        }

    def to_json(self, decay_fit_ref: float | None = None) -> str:
        return json.dumps(self.to_record(decay_fit_ref), indent=2, sort_keys=True)


def singular_values(gram: BandedGram, weight_id: str = "", symbol: SymbolPoly | None = None) -> HankelSpectrum:
    """Singular values of the compressed operator from its Gram matrix."""
    tr = gram.trace()
    if gram.bandwidth == 0:
        ev = np.asarray(gram.bands[0], dtype=float).real.copy()
    else:
        try:
            ev = linalg.eigvals_banded(gram.upper_form(), lower=False)
        except linalg.LinAlgError as exc:
            raise RuntimeError(f"banded eigensolver failed: {exc}") from exc
    lo = float(ev.min()) if ev.size else 0.0
    if lo < -PSD_TOL * max(tr, 0.0) or (tr <= 0 and lo < 0):
        raise PSDViolationError(f"eigenvalue {lo:.3e} below -{PSD_TOL:g} * trace ({tr:.3e})")
    s = np.sort(np.sqrt(np.clip(ev, 0.0, None)))[::-1]
    label = symbol.label() if symbol is not None else ""
    deg = symbol.degree if symbol is not None else 0
    return HankelSpectrum(weight_id, label, gram.n, s, "eigensolver", deg, lo)


def closed_form_spectrum(b: OrthoBasis, g: SymbolPoly, N: int) -> HankelSpectrum:
    """s_n^2 = |c|^2 (I_(n+d)/I_n - I_n/I_(n-d)) for g = c z^d, the second term absent for n < d."""
    if g.is_constant:
        return HankelSpectrum(b.weight.weight_id, g.label(), N, np.zeros(N), "closed_form", 0)
    if not g.is_monomial:
        raise ValueError("closed form needs a monomial symbol")
    d = g.degree
    t = _check_table(b, N, d)
    n = np.arange(N)
    A = t.log_ratio(n, d)
    s2 = np.exp(A)
    hi = n >= d
    B = t.log_ratio(n[hi] - d, d)
    s2[hi] = np.exp(A[hi]) * -np.expm1(B - A[hi])
    s = abs(g.coeffs[-1]) * np.sqrt(np.clip(s2, 0.0, None))
    order = np.argsort(-s, kind="stable")
    return HankelSpectrum(b.weight.weight_id, g.label(), N, s[order], "closed_form", d)


def spectrum(b: OrthoBasis, g: SymbolPoly, N: int, method: str = "auto") -> HankelSpectrum:
    if method == "auto":
        method = "closed_form" if (g.is_monomial or g.is_constant) else "eigensolver"
    if method == "closed_form":
        return closed_form_spectrum(b, g, N)
    if method == "eigensolver":
        return singular_values(hankel_gram(b, g, N), b.weight.weight_id, g)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Boundedness / compactness indicator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthIndicator:
    sup_value: float
    exponent: float
    stderr: float
    bounded: bool
    compact: bool

    @property
    def verdict(self) -> str:
        return "COMPACT" if self.compact else ("BOUNDED" if self.bounded else "UNBOUNDED")


def symbol_growth_indicator(w, g: SymbolPoly, r_lo: float = 10.0, r_hi: float = 1000.0, n: int = 25,
                            n_angle: int = 16, slack: float = 0.05) -> GrowthIndicator:
    """sup |g'| rho over samples and the fitted exponent of max_theta |g'(r e^it)| rho at large r."""
    if r_hi < 100 * r_lo:
        raise ValueError("radius range must span at least two decades")
    dg = g.derivative()
    r = np.geomspace(r_lo, r_hi, n)
    lam = r[:, None] * np.exp(2j * np.pi * np.arange(n_angle) / n_angle)[None, :]
    vals = np.abs(dg(lam)) * np.asarray(rho(w, lam))
    prof = vals.max(axis=1)
    inner = np.abs(dg(np.linspace(0, r_lo, 64))) * np.asarray(rho(w, np.linspace(0, r_lo, 64)))
    sup = float(max(prof.max(), inner.max()))
    if g.is_constant or not np.any(prof > 0):
        return GrowthIndicator(0.0, -math.inf, 0.0, True, True)
    slope, _, err = linear_fit(np.log(r), np.log(prof))
    return GrowthIndicator(sup, slope, err, bool(slope <= slack), bool(slope < -slack))


# ---------------------------------------------------------------------------
# Pointwise action
# ---------------------------------------------------------------------------

def projection_coefficients(b: OrthoBasis, g: SymbolPoly, f: np.ndarray) -> np.ndarray:
    """Coefficients of P(gbar f) for f = sum f_j e_j: (Qf)_l = sum_a conj(c_a) sqrt(I_(l+a)/I_l) f_(l+a)."""
    f = np.asarray(f, dtype=complex)
    n = f.size
    out = np.conj(g.coeffs[0]) * f.copy()
    t = b.table(n)
    for a in range(1, g.degree + 1):
        ca = g.coeffs[a]
        if ca == 0 or n <= a:
            continue
        l = np.arange(n - a)
        out[: n - a] += np.conj(ca) * np.exp(0.5 * t.log_ratio(l, a)) * f[a:]
    return out


def eval_series(b: OrthoBasis, f: np.ndarray, z) -> np.ndarray:
    """sum f_n e_n(z) (unscaled)."""
    z = np.asarray(z, dtype=complex)
    E = basis_scaled(b, np.asarray(f).size, z.ravel())
    phi = np.asarray(b.phi(z.ravel()))
    return ((np.asarray(f) @ E) * np.exp(phi)).reshape(z.shape)


def hankel_apply(b: OrthoBasis, g: SymbolPoly, f: np.ndarray, z) -> np.ndarray:
    """(H_gbar f)(z) = conj(g(z)) f(z) - P(gbar f)(z)."""
    z = np.asarray(z, dtype=complex)
    return np.conj(g(z)) * eval_series(b, f, z) - eval_series(b, projection_coefficients(b, g, f), z)


def kernel_image_check(b: OrthoBasis, g: SymbolPoly, lam: complex, points, N: int | None = None) -> float:
    """max_z |H k_lam(z) - (conj g(z) - conj g(lam)) k_lam(z)| exp(-phi(z)) rho(z).

    The factor exp(-phi) rho makes |k_lam| of order one, so the residual is
    relative to the kernel scale.
    """
    N = b.n_max + 1 - g.degree if N is None else N
    c = kernel_coefficients(b, lam, N)
    if abs(c[-1]) > 1e-12:
        raise TruncationError(f"k_lambda not resolved by {N} terms (last coefficient {abs(c[-1]):.2e})")
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    scale = np.exp(-np.asarray(b.phi(z))) * np.asarray(rho(b.weight, z))
    lhs = hankel_apply(b, g, c, z)
    rhs = (np.conj(g(z)) - np.conj(g(lam))) * eval_series(b, c, z)
    return float(np.max(np.abs(lhs - rhs) * scale))


def dbar_residual(b: OrthoBasis, g: SymbolPoly, f: np.ndarray, z: complex, h: float) -> float:
    """|dbar_h u(z) - conj(g'(z)) f(z)| for u = H_gbar f with the central difference dbar = (Dx + i Dy)/2."""
    if not h > 0:
        raise ValueError("h must be positive")
    z = complex(z)
    pts = np.array([z + h, z - h, z + 1j * h, z - 1j * h])
    u = hankel_apply(b, g, f, pts)
    dbar = 0.5 * ((u[0] - u[1]) / (2 * h) + 1j * (u[2] - u[3]) / (2 * h))
    rhs = np.conj(g.derivative()(z)) * eval_series(b, f, np.array([z]))[0]
    return float(abs(dbar - rhs))


# ---------------------------------------------------------------------------
# Integral forms
# ---------------------------------------------------------------------------

def radial_nodes(b: OrthoBasis, n_terms: int, panels_per_rho: float = 2.0, order: int = 16,
                 r_max: float | None = None):
    """Composite Gauss nodes on [0, r_max] with panel width rho/panels_per_rho; returns (r, weights*2*pi*r)."""
    rf = RadiusField(b.weight)
    r_max = radius_capturing(b, n_terms) if r_max is None else r_max
    edges = [0.0]
    while edges[-1] < r_max:
        edges.append(min(r_max, edges[-1] + float(rf(edges[-1])) / panels_per_rho))
    r, wr = panel_rule(np.array(edges), order)
    return r, wr * 2 * np.pi * r, rf


def weighted_log_moments(b: OrthoBasis, log_f, n_terms: int, panels_per_rho: float = 2.0) -> np.ndarray:
    """log int f(|z|) |z|^(2n) exp(-2 phi) dm for n < n_terms, with f given by its log on radii."""
    r, wq, _ = radial_nodes(b, n_terms, panels_per_rho)
    base = np.log(wq) + np.asarray(log_f(r)) - 2 * np.asarray(b.weight.phi_radial(r))
    n = np.arange(n_terms)[:, None]
    return log_abs_sum(base[None, :] + 2 * n * np.log(r)[None, :])[0]


@dataclass(frozen=True)
class SpIneq:
    lhs: float
    rhs: float
    ratio: float
    R: float
    N: int


def hankel_norms_on_kernels(b: OrthoBasis, g: SymbolPoly, lam: np.ndarray, N: int, gram: BandedGram | None = None) -> np.ndarray:
    """||H_gbar k_lam||^2 at matched truncation: c^* G c with c the coefficients of k_lam."""
    gram = gram or hankel_gram(b, g, N)
    C = np.stack([kernel_coefficients(b, l, N) for l in np.ravel(lam)], axis=1)
    return np.asarray(gram.quadratic(C)).reshape(np.shape(lam))


def reliable_radius(b: OrthoBasis, N: int, tol: float = 1e-12) -> float:
    """Largest |lambda| whose normalized kernel has last coefficient (index N-1) below ``tol``."""
    lo, hi = 0.0, 1.0
    while abs(kernel_coefficients(b, hi, N)[-1]) < tol:
        lo, hi = hi, 2 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if abs(kernel_coefficients(b, mid, N)[-1]) < tol:
            lo = mid
        else:
            hi = mid
    return lo


def spineq_check(b: OrthoBasis, spec: HankelSpectrum, g: SymbolPoly, p: float, R: float | None = None,
                 panels_per_rho: float = 2.0, n_theta: int | None = None) -> SpIneq:
    """lhs = int_{|lam|<=R} ||H k_lam||^p / rho^2 dm, rhs = sum s_n^p, both at truncation spec.N."""
    if p < 2:
        raise ValueError("spineq needs p >= 2")
    N = spec.N
    rhs = float(np.sum(spec.s**p))
    if g.is_constant:
        return SpIneq(0.0, rhs, 0.0 if rhs == 0 else 0.0, 0.0, N)
    R = reliable_radius(b, N) if R is None else R
    rf = RadiusField(b.weight)
    edges = [0.0]
    while edges[-1] < R:
        edges.append(min(R, edges[-1] + float(rf(edges[-1])) / panels_per_rho))
    r, wr = panel_rule(np.array(edges), 8)
    n_theta = (1 if g.is_monomial else 8 * g.degree + 8) if n_theta is None else n_theta
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    lam = r[:, None] * np.exp(1j * th)[None, :]
    gram = hankel_gram(b, g, N)
    q = hankel_norms_on_kernels(b, g, lam, N, gram)
    integrand = np.clip(q, 0, None) ** (p / 2) / np.asarray(rf(lam)) ** 2
    lhs = float(np.sum(integrand.mean(axis=1) * wr * 2 * np.pi * r))
    return SpIneq(lhs, rhs, lhs / rhs if rhs > 0 else math.inf, R, N)


@dataclass(frozen=True)
class TraceBound:
    trace_sum: float
    integral_bound: float
    N: int

    @property
    def holds(self) -> bool:
        return self.trace_sum <= self.integral_bound * (1 + 1e-3)


def toeplitz_gram(b: OrthoBasis, g: SymbolPoly, N: int, panels_per_rho: float = 2.0) -> BandedGram:
    """<G e_j, e_k> for G = |g'|^2 rho^2, banded with half-bandwidth deg g - 1."""
    dg = g.derivative()
    d = dg.degree
    c = dg.array
    rf = RadiusField(b.weight)
    n_need = N + d
    logR = weighted_log_moments(b, lambda r: 2 * np.log(rf(r)), n_need, panels_per_rho)
    lm = b.log_moments(n_need)
    bands = []
    for delta in range(d + 1):
        j = np.arange(N - delta)
        acc = np.zeros(j.size, dtype=complex)
        # z^a zbar^b e_j conj(e_k) survives when j + a = k + b, k = j + delta
        for a in range(delta, d + 1):
            bb = a - delta
            coef = c[a] * np.conj(c[bb])
            if coef == 0:
                continue
            acc += coef * np.exp(logR[j + a] - 0.5 * (lm[j] + lm[j + delta]))
        bands.append(acc.real if delta == 0 else acc)
    return BandedGram(tuple(bands), N)


def toeplitz_trace_bound(b: OrthoBasis, g: SymbolPoly, p: float, N: int, panels_per_rho: float = 2.0,
                         n_theta: int | None = None) -> TraceBound:
    """Sum of lambda_n^(p/2) for the compressed Toeplitz operator with symbol |g'|^2 rho^2, against
    int G^(p/2) K_N(z,z) exp(-2 phi) dm."""
    if not p > 2:
        raise ValueError("trace bound needs p > 2")
    if g.is_constant:
        return TraceBound(0.0, 0.0, N)
    T = toeplitz_gram(b, g, N, panels_per_rho)
    ev = T.bands[0] if T.bandwidth == 0 else linalg.eigvals_banded(T.upper_form())
    trace_sum = float(np.sum(np.clip(ev, 0, None) ** (p / 2)))
    # K_N(z,z) exp(-2 phi) = sum_n |z|^(2n) exp(-2 phi) / I_n, integrated against the angular mean of G^(p/2)
    r, wq, rf = radial_nodes(b, N, panels_per_rho)
    n_theta = (1 if g.is_monomial else 8 * g.degree + 16) if n_theta is None else n_theta
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    z = r[:, None] * np.exp(1j * th)[None, :]
    Gp = ((np.abs(g.derivative()(z)) * np.asarray(rf(z))) ** p).mean(axis=1)
    lm = b.log_moments(N)
    n = np.arange(N)[:, None]
    logKe = log_abs_sum(2 * n * np.log(r)[None, :] - lm[:, None], axis=0)[0] - 2 * np.asarray(b.weight.phi_radial(r))
    integral = float(np.sum(Gp * np.exp(logKe) * wq))
    return TraceBound(trace_sum, integral, N)
