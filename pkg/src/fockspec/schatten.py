"""Schatten-class classification from three independent directions.

* the criterion integral  int |g'|^p rho^(p-2) dm  over growing discs,
* exponent arithmetic for radial powers (the integrand behaves like r^e),
* partial sums of measured singular values.

All numerical divergence tests use octave increments: when the increment
ratio between successive octaves settles below a threshold the series is
taken to converge, when increments do not decrease it diverges.
"""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RadiusField, distance_field, make_grid
from .hankel import HankelSpectrum, SymbolPoly
from .numerics import gauss_legendre, linear_fit, parallel_map
from .weights import RADIAL_POWER, TABULATED, WeightSpec

CRITERION_THRESHOLD = 0.9
# Octave ratio of a power-law spectrum is 2^(1 - p/p*); this places the
# spectral cut exactly at the edge of the +-10% band around p*.
SPECTRAL_THRESHOLD = 2.0 ** -0.1
BAND = 0.1


class Verdict(str, enum.Enum):
    CONVERGES = "CONVERGES"
    DIVERGES = "DIVERGES"
    INCONCLUSIVE = "INCONCLUSIVE"
    NOT_APPLICABLE = "NOT_APPLICABLE"


class VerdictDisagreement(AssertionError):
    """Independent verdicts disagree outside the near-threshold band."""


@dataclass(frozen=True)
class IncrementFit:
    verdict: Verdict
    ratio: float
    increments: tuple


def increment_verdict(partials, threshold: float = CRITERION_THRESHOLD, window: int = 4,
                      rel_floor: float = 1e-15) -> IncrementFit:
    """Classify a ladder of partial sums from the geometric decay of their increments."""
    p = np.asarray(partials, dtype=float)
    if p.size < 3:
        raise ValueError("need at least three partials")
    inc = np.diff(p)
    scale = max(float(np.max(np.abs(p))), 0.0)
    if scale == 0.0:
        return IncrementFit(Verdict.CONVERGES, 0.0, tuple(inc))
    tail = inc[-window:]
    if np.any(tail < 0):
        return IncrementFit(Verdict.INCONCLUSIVE, math.nan, tuple(inc))
    if np.all(tail[1:] <= rel_floor * scale):
        return IncrementFit(Verdict.CONVERGES, 0.0, tuple(inc))
    if np.any(tail <= 0):
        tail = np.maximum(tail, rel_floor * scale)
    slope, _, _ = linear_fit(np.arange(tail.size), np.log(tail))
    q = math.exp(slope)
    if q < threshold:
        v = Verdict.CONVERGES
    elif q >= 1.0 - 1e-9:  # nondecreasing up to roundoff
        v = Verdict.DIVERGES
    else:
        v = Verdict.INCONCLUSIVE
    return IncrementFit(v, q, tuple(inc))


# ---------------------------------------------------------------------------
# Exponent arithmetic
# ---------------------------------------------------------------------------

def radial_exponent(m: float, d: int, p: float) -> float:
    """e with |g'|^p rho^(p-2) r ~ r^e for phi = |z|^m and deg g = d."""
    return p * (d - 1) + (p - 2) * (2 - m) / 2 + 1


def critical_exponent(m: float, d: int) -> float:
    """p* = 2m/(m-2d) for 0 < d < m/2, infinity when d >= m/2, and 2 for constants (not applicable)."""
    if m <= 0 or d < 0:
        raise ValueError("need m > 0 and d >= 0")
    if d == 0:
        return 2.0
    if 2 * d >= m:
        return math.inf
    return 2 * m / (m - 2 * d)


def critical_status(m: float, d: int) -> str:
    if d == 0:
        return "NOT_APPLICABLE"
    return "NEVER" if 2 * d >= m else "FINITE"


def exponent_verdict(m: float, d: int, p: float) -> Verdict:
    if d == 0:
        return Verdict.CONVERGES
    return Verdict.CONVERGES if radial_exponent(m, d, p) < -1 else Verdict.DIVERGES


def _radial_power(w: WeightSpec) -> float | None:
    return w.m if w.kind == RADIAL_POWER else None


# ---------------------------------------------------------------------------
# Criterion integral
# ---------------------------------------------------------------------------

def default_ladder(k_max: int = 12) -> np.ndarray:
    return 2.0 ** np.arange(0, k_max + 1)


def _octave_nodes(ladder: np.ndarray, order: int = 32):
    """Gauss nodes on [0, R_0] and each [R_(k-1), R_k]; returns (r, weights, octave index)."""
    x, wq = gauss_legendre(order)
    edges = np.concatenate([[0.0], ladder])
    a, b = edges[:-1, None], edges[1:, None]
    r = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
    wr = 0.5 * (b - a) * wq[None, :]
    idx = np.repeat(np.arange(ladder.size), order)
    return r.ravel(), wr.ravel(), idx


@dataclass(frozen=True)
class CriterionResult:
    p: float
    radii: tuple
    partials: tuple
    verdict: Verdict
    ratio: float
    exponent: float | None
    exponent_verdict: Verdict | None

    def ladder_csv(self) -> str:
        return _ladder_csv(self.radii, self.partials)


def _ladder_csv(xs, ys) -> str:
    buf = io.StringIO()
    buf.write("R_or_N,partial\n")
    for x, y in zip(xs, ys):
        buf.write(f"{x:.17g},{y:.17g}\n")
    return buf.getvalue()


def criterion_integral(w: WeightSpec, g: SymbolPoly, p: float, ladder=None, n_theta: int | None = None,
                       threshold: float = CRITERION_THRESHOLD, rho_field: RadiusField | None = None) -> CriterionResult:
    """Partial integrals of |g'|^p rho^(p-2) over |z| <= R for R on an octave ladder."""
    if not p > 0:
        raise ValueError("p must be positive")
    ladder = default_ladder() if ladder is None else np.asarray(ladder, dtype=float)
    m = _radial_power(w)
    e = radial_exponent(m, g.degree, p) if m is not None and not g.is_constant else None
    ev = exponent_verdict(m, g.degree, p) if m is not None else None
    if g.is_constant:
        z = tuple(0.0 for _ in ladder)
        return CriterionResult(p, tuple(ladder), z, Verdict.CONVERGES, 0.0, None, ev)
    rf = rho_field or RadiusField(w)
    r, wr, idx = _octave_nodes(ladder)
    n_theta = (1 if g.is_monomial else 16 * g.degree + 16) if n_theta is None else n_theta
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    zz = r[:, None] * np.exp(1j * th)[None, :]
    rr = np.asarray(rf(r))
    ang = (np.abs(g.derivative()(zz)) ** p).mean(axis=1)
    vals = ang * rr ** (p - 2) * 2 * np.pi * r * wr
    partials = np.cumsum(np.bincount(idx, weights=vals, minlength=ladder.size))
    fit = increment_verdict(partials, threshold)
    return CriterionResult(p, tuple(ladder), tuple(partials), fit.verdict, fit.ratio, e, ev)


# ---------------------------------------------------------------------------
# Spectral side
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    alpha: float
    stderr: float
    window: tuple


def decay_fit(spec: HankelSpectrum, window: tuple | None = None) -> DecayFit:
    """alpha with s_n ~ n^-alpha, from a log-log fit over ``window`` (inclusive)."""
    N = spec.N
    guard = N - 2 * spec.degree
    if window is None:
        window = (max(1, N // 20), N // 2)
    n1, n2 = int(window[0]), int(window[1])
    if n1 < 1 or n2 > guard or n2 > spec.s.size - 1:
        raise ValueError(f"window [{n1}, {n2}] outside the guarded spectrum (n <= {guard})")
    if n2 < 2 * n1:
        raise ValueError("window must span at least one octave")
    n = np.arange(n1, n2 + 1)
    s = spec.s[n]
    if np.any(s <= 0):
        raise ValueError("spectrum has zeros inside the window")
    slope, _, err = linear_fit(np.log(n), np.log(s))
    return DecayFit(-slope, err, (n1, n2))


@dataclass(frozen=True)
class PartialNorm:
    p: float
    cutoffs: tuple
    partials: tuple
    verdict: Verdict
    ratio: float

    def ladder_csv(self) -> str:
        return _ladder_csv(self.cutoffs, self.partials)


def schatten_partial_norm(spec: HankelSpectrum, p: float, threshold: float = SPECTRAL_THRESHOLD) -> PartialNorm:
    """Partial sums of s_n^p over n < N' for N' = 1, 2, 4, ... up to the guarded length."""
    if not p > 0:
        raise ValueError("p must be positive")
    n_eff = max(1, spec.N - 2 * spec.degree)
    cut = [2**k for k in range(int(math.log2(n_eff)) + 1)]
    cs = np.concatenate([[0.0], np.cumsum(spec.s[:n_eff] ** p)])
    partials = cs[cut]
    if not np.any(partials > 0):
        return PartialNorm(p, tuple(cut), tuple(partials), Verdict.CONVERGES, 0.0)
    fit = increment_verdict(partials, threshold)
    return PartialNorm(p, tuple(cut), tuple(partials), fit.verdict, fit.ratio)


# ---------------------------------------------------------------------------
# Envelope kernel and the mixed-norm test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeKernel:
    """B(z,zeta) = |z-zeta|^-1 near the diagonal, rho(z)^-1 exp(-d^eps) beyond rho(z)."""

    weight: WeightSpec
    eps: float
    rho_field: RadiusField = field(repr=False, default=None)

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if self.rho_field is None:
            object.__setattr__(self, "rho_field", RadiusField(self.weight))

    @property
    def weight_id(self) -> str:
        return self.weight.weight_id

    def __call__(self, z: complex, zeta, dist) -> np.ndarray:
        z = complex(z)
        zeta = np.asarray(zeta, dtype=complex)
        rz = float(self.rho_field(z))
        sep = np.abs(zeta - z)
        with np.errstate(divide="ignore"):
            near = 1.0 / sep
        return np.where(sep <= rz, near, np.exp(-np.asarray(dist) ** self.eps) / rz)

    def inner_norms(self, z: complex, p_conj, tail: float = 30.0, nodes_per_rho: float = 1.5,
                    n_theta: int = 64) -> np.ndarray:
        """Rows (int B(z,.)^q dm, int B(.,z)^q dm) for each conjugate exponent q.

        The singular part |z-zeta|^-q is integrated in polar coordinates about
        z with its exact antiderivative; the far branch is a grid sum over a
        distance field covering d^eps < tail / q.
        """
        qs = np.atleast_1d(np.asarray(p_conj, dtype=float))
        if np.any(qs < 1) or np.any(qs >= 2):
            raise ValueError("conjugate exponent must lie in [1, 2)")
        rf = self.rho_field
        z = complex(z)
        rz = float(rf(z))
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        smax = _self_radius(rf, z, th, rz)
        d_cut = float((tail / qs.min()) ** (1.0 / self.eps))
        fld = _far_field(self.weight, rf, z, d_cut, nodes_per_rho)
        nodes = fld.grid.nodes()
        sep = np.abs(nodes - z)
        rn = fld.rho_nodes.reshape(nodes.shape)
        h2 = fld.grid.h**2
        out = np.empty((qs.size, 2))
        for k, q in enumerate(qs):
            near_b = 2 * np.pi * rz ** (2 - q) / (2 - q)
            near_bt = float(np.mean(smax ** (2 - q))) * 2 * np.pi / (2 - q)
            decay = np.exp(-q * fld.dist**self.eps)
            far_b = float(np.sum(decay[sep > rz])) * rz ** (-q) * h2
            far_bt = float(np.sum((decay * rn ** (-q))[sep > rn])) * h2
            out[k] = near_b + far_b, near_bt + far_bt
        return out


def _self_radius(rf: RadiusField, z: complex, theta: np.ndarray, guess: float) -> np.ndarray:
    """Smallest s > 0 with s = rho(z + s e^{i theta}) for each direction, by vectorized bisection."""
    u = np.exp(1j * np.asarray(theta))
    f = lambda s: s - np.asarray(rf(z + s * u))
    lo = np.zeros(u.size)
    hi = np.full(u.size, guess)
    while True:
        bad = f(hi) < 0
        if not bad.any():
            break
        lo = np.where(bad, hi, lo)
        hi = np.where(bad, 2 * hi, hi)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        neg = f(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def _far_field(w: WeightSpec, rf: RadiusField, z: complex, d_cut: float, nodes_per_rho: float):
    """Distance field on a box that provably contains {zeta : d(z, zeta) < d_cut}.

    For radial weights d(z, zeta) >= |D(|zeta|) - D(|z|)| with D(r) = int_0^r dt/rho,
    which confines the region to an annulus r_lo <= |zeta| <= r_hi; inside it
    rho <= rho_max, so |zeta - z| <= d_cut * rho_max as well.
    """
    a = abs(z)
    r_hi, dist, rmin_hi = a, 0.0, float(rf(a))
    while dist < d_cut:
        step = float(rf(r_hi)) / 4
        r_hi += step
        rr = float(rf(r_hi))
        rmin_hi = min(rmin_hi, rr)
        dist += step / rr
    r_lo, dist, rmax = a, 0.0, float(rf(a))
    while dist < d_cut and r_lo > 0:
        step = min(r_lo, float(rf(r_lo)) / 4)
        r_lo -= step
        rr = float(rf(r_lo))
        rmax = max(rmax, rr)
        dist += step / rr
    if r_lo > 0:
        rmax = max(rmax, float(rf(r_lo)))
    L = d_cut * rmax
    box = (max(z.real - L, -r_hi), min(z.real + L, r_hi), max(z.imag - L, -r_hi), min(z.imag + L, r_hi))
    h = min(rmin_hi, float(np.min(rf(np.linspace(r_lo, r_hi, 64))))) / nodes_per_rho
    grid = make_grid(w, box, nodes_per_rho, anchor=z, h=h)
    return distance_field(w, z, grid, rf)


@dataclass(frozen=True)
class EnvelopeResult:
    p: float
    eps: float
    radii: tuple
    partials_B: tuple
    partials_Bstar: tuple
    verdict_B: Verdict
    verdict_Bstar: Verdict
    exponent_verdict: Verdict | None
    ratio_B: float
    ratio_Bstar: float

    @property
    def verdict(self) -> Verdict:
        if self.verdict_B == self.verdict_Bstar:
            return self.verdict_B
        return Verdict.INCONCLUSIVE

    def ladder_csv(self) -> str:
        buf = io.StringIO()
        buf.write("R_or_N,partial_B,partial_Bstar\n")
        for x, a, b in zip(self.radii, self.partials_B, self.partials_Bstar):
            buf.write(f"{x:.17g},{a:.17g},{b:.17g}\n")
        return buf.getvalue()


def envelope_mixed_norms(w: WeightSpec, ps, eps: float = 1.0, ladder=None, order: int = 6,
                         threads: int = 1, threshold: float = CRITERION_THRESHOLD,
                         nodes_per_rho: float = 1.5) -> list[EnvelopeResult]:
    """Partials of ||B||_{L^p(L^p')} and of the transpose over |z| <= R, for each p.

    The weight is radial, so the inner norms depend on |z| only and the outer
    integral is one-dimensional.  One distance field per outer node serves
    every p.
    """
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    if np.any(ps <= 2):
        raise ValueError("the mixed-norm test needs p > 2")
    if w.kind not in (RADIAL_POWER, TABULATED):
        raise ValueError("envelope evaluator needs a radial weight")
    ladder = default_ladder(10) if ladder is None else np.asarray(ladder, dtype=float)
    eps = float(min(1.0, max(0.1, eps)))
    qs = ps / (ps - 1)
    kern = EnvelopeKernel(w, eps)
    r, wr, idx = _octave_nodes(ladder, order)
    inner = np.stack(parallel_map(lambda x: kern.inner_norms(complex(x), qs, nodes_per_rho=nodes_per_rho), r, threads))
    jac = 2 * np.pi * r * wr
    m = _radial_power(w)
    out = []
    for k, (p, q) in enumerate(zip(ps, qs)):
        fb = inner[:, k, 0] ** (p / q)
        fbt = inner[:, k, 1] ** (p / q)
        pb = np.cumsum(np.bincount(idx, weights=fb * jac, minlength=ladder.size))
        pbt = np.cumsum(np.bincount(idx, weights=fbt * jac, minlength=ladder.size))
        vb = increment_verdict(pb, threshold)
        vbt = increment_verdict(pbt, threshold)
        ev = exponent_verdict(m, 1, p) if m is not None else None
        out.append(EnvelopeResult(float(p), eps, tuple(ladder), tuple(pb), tuple(pbt), vb.verdict, vbt.verdict,
                                  ev, vb.ratio, vbt.ratio))
    return out


def envelope_mixed_norm(w: WeightSpec, p: float, eps: float = 1.0, ladder=None, **kw) -> EnvelopeResult:
    return envelope_mixed_norms(w, [p], eps, ladder, **kw)[0]


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PVerdict:
    p: float
    criterion: Verdict
    exponent: Verdict | None
    spectral: Verdict
    in_band: bool
    criterion_ratio: float
    spectral_ratio: float


@dataclass(frozen=True)
class SchattenReport:
    weight_id: str
    symbol: str
    label: str
    p_grid: tuple
    verdicts: tuple
    p_star: float
    p_star_status: str
    alpha: float | None
    alpha_stderr: float | None
    fit_window: tuple | None
    hs_verdict: Verdict
    N: int

    def to_record(self) -> dict:
        return {
            "weight": self.weight_id,
            "symbol": self.symbol,
            "label": self.label,
            "N": self.N,
            "p_star": _num(self.p_star),
            "p_star_status": self.p_star_status,
            "decay_alpha": _num(self.alpha),
            "decay_stderr": _num(self.alpha_stderr),
            "fit_window": list(self.fit_window) if self.fit_window else None,
            "hs_verdict": self.hs_verdict.value,
            "p_grid": [_num(p) for p in self.p_grid],
            "verdicts": [
                {
                    "p": _num(v.p),
                    "criterion_integral": v.criterion.value,
                    "exponent": v.exponent.value if v.exponent else None,
                    "spectral": v.spectral.value,
                    "near_threshold": v.in_band,
                    "criterion_ratio": _num(v.criterion_ratio),
                    "spectral_ratio": _num(v.spectral_ratio),
                }
                for v in self.verdicts
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True)


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return float(f"{x:.17g}")


def classify(w: WeightSpec, g: SymbolPoly, p_grid, spec: HankelSpectrum, ladder=None,
             strict: bool = True) -> SchattenReport:
    """Assemble criterion, exponent and spectral verdicts for every p.

    Outside the band |p - p*| <= 0.1 p* all available verdicts must agree;
    with ``strict`` a disagreement raises VerdictDisagreement.
    """
    p_grid = tuple(float(p) for p in p_grid)
    if list(p_grid) != sorted(p_grid):
        raise ValueError("p grid must be sorted")
    d = g.degree
    m = _radial_power(w)
    if m is not None:
        p_star, status = critical_exponent(m, d), critical_status(m, d)
    else:
        p_star, status = math.nan, "UNKNOWN"
    out = []
    problems = []
    for p in p_grid:
        crit = criterion_integral(w, g, p, ladder)
        part = schatten_partial_norm(spec, p)
        in_band = status == "FINITE" and abs(p - p_star) <= BAND * p_star
        ev = crit.exponent_verdict
        pv = PVerdict(p, crit.verdict, ev, part.verdict, in_band, crit.ratio, part.ratio)
        out.append(pv)
        if not in_band and not g.is_constant:
            vs = {crit.verdict, part.verdict} | ({ev} if ev else set())
            if len(vs) > 1:
                problems.append(pv)
    hs = schatten_partial_norm(spec, 2.0).verdict
    if not g.is_constant and hs != Verdict.DIVERGES:
        problems.append(PVerdict(2.0, Verdict.DIVERGES, Verdict.DIVERGES, hs, False, math.nan, math.nan))
    try:
        fit = decay_fit(spec) if not g.is_constant else None
    except ValueError:
        fit = None
    label = "Hankel operator H_conj(g) on F^2_phi"
    if d == 1 and g.coeffs[1] == 1:
        label = "canonical solution operator to dbar restricted to F^2_phi (N = H_conj(z))"
    report = SchattenReport(
        w.weight_id, g.label(), label, p_grid, tuple(out), p_star, status,
        fit.alpha if fit else None, fit.stderr if fit else None, fit.window if fit else None,
        hs, spec.N,
    )
    if strict and problems:
        lines = [f"p={v.p:g}: criterion={v.criterion.value} exponent={v.exponent.value if v.exponent else '-'} "
                 f"spectral={v.spectral.value} (ratios {v.criterion_ratio:.4g}, {v.spectral_ratio:.4g})"
                 for v in problems]
        raise VerdictDisagreement("verdicts disagree outside the near-threshold band:\n" + "\n".join(lines))
    return report
