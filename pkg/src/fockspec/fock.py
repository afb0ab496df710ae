"""Monomial orthonormal basis, truncated Bergman kernel and kernel estimates.

For a radial weight the monomials are orthogonal, e_n = z^n / sqrt(I_n), and

    K(z, zeta) = sum_n (z conj(zeta))^n / I_n.

Kernel values grow like exp(2 phi), so everything is evaluated in log form
(log|K|, arg K) and weighted quantities such as K(z,z) rho^2 exp(-2 phi) are
formed before exponentiating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DEFAULT_RHO_TOL, RadiusField, distances_from, rho
from .numerics import log_abs_sum, panel_rule
from .weights import MomentTable, WeightSpec, build_moment_table

TRUNCATION_FLAG = 1e-12
_CHUNK = 4_000_000


class TruncationError(ValueError):
    """A sample lies outside the region where the truncated kernel is reliable."""


@dataclass(frozen=True, eq=False)
class OrthoBasis:
    """e_n = z^n exp(-log I_n / 2) for n <= n_max, backed by an immutable moment table."""

    weight: WeightSpec
    moments: MomentTable
    _ext: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, w: WeightSpec, n_max: int) -> "OrthoBasis":
        return cls(w, build_moment_table(w, n_max))

    @property
    def n_max(self) -> int:
        return self.moments.n_max

    def log_moments(self, n_terms: int) -> np.ndarray:
        """log I_n for n < n_terms, extending the table when needed."""
        if n_terms <= self.n_max + 1:
            return self.moments.log_moments[:n_terms]
        key = max(n_terms, 2 * (self.n_max + 1))
        cached = [t for t in self._ext.values() if t.n_max + 1 >= n_terms]
        if cached:
            return cached[0].log_moments[:n_terms]
        table = build_moment_table(self.weight, key - 1)
        self._ext[key] = table
        return table.log_moments[:n_terms]

    def table(self, n_terms: int) -> MomentTable:
        self.log_moments(n_terms)
        if n_terms <= self.n_max + 1:
            return self.moments
        return next(t for t in self._ext.values() if t.n_max + 1 >= n_terms)

    def phi(self, z):
        return self.weight.phi_radial(np.abs(np.asarray(z)))


@dataclass(frozen=True)
class KernelValue:
    """Truncated kernel value in log form plus truncation diagnostics."""

    log_abs: np.ndarray
    phase: np.ndarray
    trunc_err: np.ndarray
    n_terms: int

    @property
    def value(self):
        out = np.exp(self.log_abs + 1j * self.phase)
        return complex(out) if np.ndim(out) == 0 else out

    @property
    def flagged(self) -> bool:
        return bool(np.any(self.trunc_err > TRUNCATION_FLAG))


def _log_t(t: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(t))


def _klog(k: np.ndarray, log_t) -> np.ndarray:
    """k * log|t| with the convention 0 * log 0 = 0."""
    with np.errstate(invalid="ignore"):
        return np.where(k == 0, 0.0, k * log_t)


def _terms_needed(b: OrthoBasis, log_abs_t_max: float, floor: int, rel: float = 1e-17) -> int:
    """Smallest power-of-two-ish count so the last term is below ``rel`` of the peak term."""
    n = max(floor, 64)
    while True:
        lm = b.log_moments(n)
        k = np.arange(n)
        L = _klog(k, log_abs_t_max) - lm
        peak = int(np.argmax(L))
        if peak < n - 2 and L[-1] - L[peak] < math.log(rel):
            return n
        n *= 2
        if n > 2_000_000:
            raise TruncationError("kernel series needs more than 2e6 terms")


def _series(b: OrthoBasis, z: np.ndarray, zeta: np.ndarray, n_terms: int):
    """log-sum of (z conj(zeta))^n / I_n over n < n_terms, elementwise.

    Magnitude and phase are built from z and zeta separately, so swapping
    them conjugates every term exactly and K(z, zeta) = conj(K(zeta, z))
    holds bit for bit.
    """
    z, zeta = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(zeta, dtype=complex))
    shape = z.shape
    z = z.ravel()
    zeta = zeta.ravel()
    lm = b.log_moments(n_terms)
    k = np.arange(n_terms)
    la = np.empty(z.size)
    ph = np.empty(z.size)
    err = np.empty(z.size)
    step = max(1, _CHUNK // n_terms)
    for s in range(0, z.size, step):
        zz, ww = z[s:s + step], zeta[s:s + step]
        lt = (_log_t(zz) + _log_t(ww))[:, None]
        L = _klog(k[None, :], lt) - lm[None, :]
        P = k[None, :] * (np.angle(zz) - np.angle(ww))[:, None]
        a, p = log_abs_sum(L, P)
        la[s:s + step] = a
        ph[s:s + step] = p
        err[s:s + step] = np.exp(L[:, -1] - a)
    return la.reshape(shape), ph.reshape(shape), err.reshape(shape)


def log_kernel(b: OrthoBasis, z, zeta, n_max: int | None = None, extend: bool = False) -> KernelValue:
    """K(z, zeta) truncated at n_max (default: the basis size).

    With ``extend=True`` the truncation grows until the last term is negligible,
    so n_max acts as a floor.  In double precision the absolute error is about
    eps times the sum of |terms|, i.e. K(|z|, |zeta|); far off the diagonal
    that exceeds |K(z, zeta)|.
    """
    z = np.asarray(z, dtype=complex)
    zeta = np.asarray(zeta, dtype=complex)
    n_terms = (b.n_max if n_max is None else n_max) + 1
    if extend:
        lt = _log_t(z * np.conj(zeta))
        lmax = float(np.max(lt)) if lt.size else 0.0
        n_terms = _terms_needed(b, lmax if np.isfinite(lmax) else 0.0, n_terms)
    la, ph, err = _series(b, z, zeta, n_terms)
    return KernelValue(la, ph, err, n_terms)


def kernel(b: OrthoBasis, z, zeta, n_max: int | None = None, extend: bool = False) -> KernelValue:
    """Truncated Bergman kernel; ``.value`` is K(z, zeta), ``.trunc_err`` the last-term ratio."""
    return log_kernel(b, z, zeta, n_max, extend)


def log_kernel_diag(b: OrthoBasis, z, n_max: int | None = None, extend: bool = True) -> KernelValue:
    return log_kernel(b, z, z, n_max, extend)


def normalized_kernel(b: OrthoBasis, lam, z, n_max: int | None = None, extend: bool = False):
    """k_lambda(z) = K(z, lambda) / K(lambda, lambda)^(1/2); returns (value, flagged)."""
    kz = log_kernel(b, z, lam, n_max, extend)
    kl = log_kernel(b, lam, lam, n_max if not extend else kz.n_terms - 1, False)
    val = np.exp(kz.log_abs - 0.5 * kl.log_abs + 1j * kz.phase)
    flagged = kz.flagged or kl.flagged
    return (complex(val) if np.ndim(val) == 0 else val), flagged


def kernel_coefficients(b: OrthoBasis, lam: complex, n_terms: int) -> np.ndarray:
    """Coefficients of k_lambda in the basis e_0..e_(n_terms-1), normalized by the truncated K(lambda, lambda)."""
    lam = complex(lam)
    lm = b.log_moments(n_terms)
    k = np.arange(n_terms)
    la = math.log(abs(lam)) if lam != 0 else -math.inf
    L = _klog(k, la) - 0.5 * lm
    norm = 0.5 * log_abs_sum(2 * L)[0]
    return np.exp(L - norm - 1j * k * np.angle(lam))


def eval_scaled(b: OrthoBasis, coeffs: np.ndarray, z) -> np.ndarray:
    """sum_n c_n e_n(z) exp(-phi(z)), evaluated without overflow."""
    coeffs = np.asarray(coeffs, dtype=complex)
    n_terms = coeffs.size
    lm = b.log_moments(n_terms)
    k = np.arange(n_terms)
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    zf = z.ravel()
    with np.errstate(divide="ignore"):
        lc = np.log(np.abs(coeffs))
    pc = np.angle(coeffs)
    out = np.empty(zf.size, dtype=complex)
    step = max(1, _CHUNK // max(n_terms, 1))
    phis = np.asarray(b.phi(zf), dtype=float)
    for s in range(0, zf.size, step):
        zz = zf[s:s + step]
        lz = _log_t(zz)[:, None]
        L = lc[None, :] + _klog(k[None, :], lz) - 0.5 * lm[None, :] - phis[s:s + step, None]
        P = pc[None, :] + k[None, :] * np.angle(zz)[:, None]
        a, p = log_abs_sum(L, P)
        out[s:s + step] = np.exp(a + 1j * p)
    return out.reshape(shape)


def basis_scaled(b: OrthoBasis, n_terms: int, z) -> np.ndarray:
    """Matrix E[n, j] = e_n(z_j) exp(-phi(z_j))."""
    z = np.asarray(z, dtype=complex).ravel()
    lm = b.log_moments(n_terms)
    k = np.arange(n_terms)[:, None]
    lz = _log_t(z)[None, :]
    L = _klog(k, lz) - 0.5 * lm[:, None] - np.asarray(b.phi(z))[None, :]
    return np.exp(L + 1j * k * np.angle(z)[None, :])


# ---------------------------------------------------------------------------
# Quadrature against exp(-2 phi) dm
# ---------------------------------------------------------------------------

def radial_edges(w: WeightSpec, r_max: float, panels_per_rho: float = 2.0, rf: RadiusField | None = None) -> np.ndarray:
    """Panel edges on [0, r_max] with widths rho(r) / panels_per_rho."""
    rf = rf or RadiusField(w)
    edges = [0.0]
    r = 0.0
    while r < r_max:
        r = min(r_max, r + float(rf(r)) / panels_per_rho)
        edges.append(r)
    return np.array(edges)


def radius_capturing(b: OrthoBasis, n: int, drop: float = 46.0) -> float:
    """Radius beyond which r^(2n+1) exp(-2 phi) has fallen by exp(-drop) from its peak (~1e-20)."""
    w = b.weight
    r = np.geomspace(1e-3, 1.0, 64)
    while True:
        g = (2 * n + 1) * np.log(r) - 2.0 * np.asarray(w.phi_radial(r))
        peak = int(np.argmax(g))
        tail = np.nonzero((np.arange(r.size) > peak) & (g < g[peak] - drop))[0]
        if tail.size:
            return float(r[tail[0]])
        r = np.geomspace(r[-1], r[-1] * 4.0, 64)
        if r[-1] > w.r_max:
            return float(w.r_max)


@dataclass(frozen=True)
class PolarRule:
    """Nodes z_j and weights for integrals int f dm over the disc |z| <= r_max."""

    z: np.ndarray
    weights: np.ndarray
    r: np.ndarray
    r_weights: np.ndarray
    n_theta: int


def polar_rule(w: WeightSpec, r_max: float, n_theta: int, panels_per_rho: float = 2.0, order: int = 16) -> PolarRule:
    """Composite Gauss-Legendre in r times the trapezoid rule in theta.

    The trapezoid rule with n_theta points is exact for trigonometric
    polynomials of degree below n_theta.
    """
    r, wr = panel_rule(radial_edges(w, r_max, panels_per_rho), order)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    z = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    wt = ((wr * r)[:, None] * np.full(n_theta, 2 * np.pi / n_theta)[None, :]).ravel()
    return PolarRule(z, wt, r, wr * r * 2 * np.pi, n_theta)


def orthogonality_defect(b: OrthoBasis, n: int = 50) -> float:
    """max |<e_j, e_k> - delta_jk| for j, k <= n by polar quadrature."""
    rmax = radius_capturing(b, n)
    rule = polar_rule(b.weight, rmax, 2 * n + 4)
    E = basis_scaled(b, n + 1, rule.z)
    G = (E * rule.weights[None, :]) @ E.conj().T
    return float(np.max(np.abs(G - np.eye(n + 1))))


def normalized_kernel_norm(b: OrthoBasis, lam: complex, n_max: int | None = None) -> float:
    """int |k_lambda|^2 exp(-2 phi) dm by polar quadrature."""
    n_terms = (b.n_max if n_max is None else n_max) + 1
    c = kernel_coefficients(b, lam, n_terms)
    rmax = radius_capturing(b, n_terms - 1)
    rule = polar_rule(b.weight, rmax, n_terms + 2)
    step = max(1, _CHUNK // n_terms)
    return float(sum(np.sum(np.abs(eval_scaled(b, c, rule.z[s:s + step])) ** 2 * rule.weights[s:s + step])
                     for s in range(0, rule.z.size, step)))


def reproducing_defect(b: OrthoBasis, lam: complex, degree: int | None = None) -> float:
    """max over k <= degree of |<e_k, K(., lambda)> - e_k(lambda)| / K(lambda, lambda)^(1/2).

    The scale is the pointwise bound |p(lambda)| <= ||p|| K(lambda, lambda)^(1/2),
    so the defect is relative for every unit-norm polynomial p.
    """
    degree = b.n_max // 2 if degree is None else degree
    n_terms = b.n_max + 1
    lam = complex(lam)
    c = kernel_coefficients(b, lam, n_terms)
    rmax = radius_capturing(b, n_terms - 1)
    rule = polar_rule(b.weight, rmax, n_terms + degree + 2)
    inner = np.zeros(degree + 1, dtype=complex)
    step = max(1, _CHUNK // n_terms)
    for s in range(0, rule.z.size, step):
        zs = rule.z[s:s + step]
        E = basis_scaled(b, degree + 1, zs)
        inner += (E * rule.weights[s:s + step][None, :]) @ np.conj(eval_scaled(b, c, zs))
    log_k = float(log_kernel(b, lam, lam).log_abs)
    want = basis_scaled(b, degree + 1, lam)[:, 0] * np.exp(float(b.phi(lam)) - 0.5 * log_k)
    return float(np.max(np.abs(inner - want)))


def gram_min_eigenvalue(b: OrthoBasis, points) -> tuple[float, float]:
    """(min eigenvalue, trace) of the weighted Gram [K(l_i, l_j) e^{-phi(l_i)-phi(l_j)}]."""
    p = np.asarray(points, dtype=complex).ravel()
    zi, zj = np.meshgrid(p, p, indexing="ij")
    kv = log_kernel(b, zi, zj, extend=True)
    ph = np.asarray(b.phi(p))
    G = np.exp(kv.log_abs - ph[:, None] - ph[None, :] + 1j * kv.phase)
    G = 0.5 * (G + G.conj().T)
    ev = np.linalg.eigvalsh(G)
    return float(ev.min()), float(np.real(np.trace(G)))


# ---------------------------------------------------------------------------
# Kernel estimate checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    check: str
    weight: str
    params: dict
    min: float
    max: float
    passed: bool

    def to_record(self) -> dict:
        return {"check": self.check, "weight": self.weight, "params": self.params,
                "min": self.min, "max": self.max, "pass": self.passed}


def diagonal_estimate_check(b: OrthoBasis, samples, n_max: int | None = None, extend: bool = True,
                            band: float = 100.0, tol: float = DEFAULT_RHO_TOL) -> CheckReport:
    """min/max of K(z,z) rho(z)^2 exp(-2 phi(z)) over the samples.

    With ``extend=False`` samples whose truncated series is unreliable raise
    TruncationError.
    """
    z = np.atleast_1d(np.asarray(samples, dtype=complex))
    kv = log_kernel_diag(b, z, n_max, extend)
    if not extend and kv.flagged:
        bad = z[kv.trunc_err > TRUNCATION_FLAG]
        raise TruncationError(
            f"{bad.size} samples outside the reliable region (e.g. z={bad[0]}, "
            f"truncation error {kv.trunc_err[kv.trunc_err > TRUNCATION_FLAG][0]:.2e})"
        )
    rh = np.asarray(rho(b.weight, z, tol))
    ratio = np.exp(kv.log_abs + 2 * np.log(rh) - 2 * np.asarray(b.phi(z)))
    lo, hi = float(ratio.min()), float(ratio.max())
    return CheckReport("diagonal_estimate", b.weight.weight_id,
                       {"n_terms": kv.n_terms, "samples": int(z.size), "band": band},
                       lo, hi, bool(lo > 0 and np.isfinite(hi) and hi / lo <= band))


def weighted_log_kernel(b: OrthoBasis, z, zeta, extend: bool = True) -> np.ndarray:
    """log(|K(z,zeta)| rho(z) rho(zeta) exp(-phi(z) - phi(zeta)))."""
    kv = log_kernel(b, z, zeta, extend=extend)
    return (kv.log_abs + np.log(rho(b.weight, z)) + np.log(rho(b.weight, zeta))
            - np.asarray(b.phi(z)) - np.asarray(b.phi(zeta)))


@dataclass(frozen=True)
class DecayFit:
    eps_fit: float | None
    c_fit: float | None
    passed: bool
    constants: dict
    witness: tuple | None = None


def offdiagonal_decay_fit(b: OrthoBasis, pairs, eps_grid=None, c_cap: float = 100.0,
                          nodes_per_rho: float = 2.0, distances=None) -> DecayFit:
    """Largest eps on the grid with |K| <= c e^{phi+phi} / (rho rho exp(d^eps)) on all pairs and c <= c_cap."""
    eps_grid = np.round(np.arange(0.05, 1.0001, 0.05), 10) if eps_grid is None else np.asarray(eps_grid)
    pairs = [(complex(a), complex(c)) for a, c in pairs]
    z = np.array([p[0] for p in pairs])
    zeta = np.array([p[1] for p in pairs])
    A = weighted_log_kernel(b, z, zeta)
    if distances is None:
        d = np.empty(len(pairs))
        groups: dict[complex, list[int]] = {}
        for i, s in enumerate(z):
            groups.setdefault(s, []).append(i)
        rf = RadiusField(b.weight)
        for s, idx in groups.items():
            same = [i for i in idx if zeta[i] == s]
            other = [i for i in idx if zeta[i] != s]
            d[same] = 0.0
            if other:
                d[other] = distances_from(b.weight, s, zeta[other], nodes_per_rho, rho_field=rf)
    else:
        d = np.asarray(distances, dtype=float)
    consts = {float(e): float(np.exp(np.max(A + d**e))) for e in eps_grid}
    passing = [e for e in eps_grid if consts[float(e)] <= c_cap]
    if not passing:
        e0 = float(eps_grid[0])
        j = int(np.argmax(A + d**e0))
        return DecayFit(None, None, False, consts, pairs[j])
    e = float(max(passing))
    return DecayFit(e, consts[e], True, consts)


def near_diagonal_check(b: OrthoBasis, alpha: float, centers, n_radial: int = 4, n_angle: int = 8,
                        lower: float = 0.0) -> CheckReport:
    """|K(z,zeta)| / sqrt(K(z,z) K(zeta,zeta)) over zeta with |z - zeta| < alpha rho(z)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    c = np.atleast_1d(np.asarray(centers, dtype=complex))
    rc = np.atleast_1d(rho(b.weight, c))
    s = (np.arange(n_radial + 1) / n_radial)[:, None] * np.exp(2j * np.pi * np.arange(n_angle) / n_angle)[None, :]
    s = np.unique(np.clip(np.abs(s), 0, 1 - 1e-9) * np.exp(1j * np.angle(s)))
    zeta = (c[:, None] + alpha * rc[:, None] * s[None, :]).ravel()
    z = np.repeat(c, s.size)
    kzz = log_kernel(b, z, zeta, extend=True)
    kz = log_kernel(b, z, z, n_max=kzz.n_terms - 1)
    kzeta = log_kernel(b, zeta, zeta, n_max=kzz.n_terms - 1)
    ratio = np.exp(kzz.log_abs - 0.5 * kz.log_abs - 0.5 * kzeta.log_abs)
    lo, hi = float(ratio.min()), float(ratio.max())
    return CheckReport("near_diagonal", b.weight.weight_id, {"alpha": alpha, "pairs": int(z.size)},
                       lo, hi, bool(lo > lower and hi <= 1.0 + 1e-9))
