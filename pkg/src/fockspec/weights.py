"""Radial weights phi, their Laplacian measures and monomial moments.

Conventions: the Laplacian is d^2/dx^2 + d^2/dy^2, so for phi = |z|^m the
measure mu = Delta phi has density m^2 |z|^(m-2) and centered mass
2 pi m r^m.  Moments are kept as logarithms,

    log I_n = log  int |z|^(2n) exp(-2 phi(z)) dm(z).
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .numerics import QuadratureError, log_gamma_ratio

RADIAL_POWER = "radial_power"
TABULATED = "tabulated_radial"

TWO_PI = 2.0 * math.pi


class OutOfDomainError(ValueError):
    """Evaluation outside the radial range covered by a density table."""


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """A radial weight phi with mu = Delta phi.

    Use :meth:`radial_power` or :meth:`tabulated`.  Tabulated densities are
    interpolated as piecewise power laws (linear in log r / log density), which
    is exact for power-like densities; the first interval reuses the exponent
    of the second so a density vanishing at 0 is handled.
    """

    kind: str
    m: float | None = None
    radii: np.ndarray | None = None
    density_values: np.ndarray | None = None
    _seg: dict = field(default_factory=dict, repr=False)

    @classmethod
    def radial_power(cls, m: float) -> "WeightSpec":
        m = float(m)
        if not m > 0 or not math.isfinite(m):
            raise ValueError(f"radial power needs m > 0, got {m}")
        return cls(RADIAL_POWER, m=m)

    @classmethod
    def tabulated(cls, radii, density) -> "WeightSpec":
        r = np.asarray(radii, dtype=float)
        d = np.asarray(density, dtype=float)
        if r.ndim != 1 or r.shape != d.shape or r.size < 3:
            raise ValueError("density table needs at least three (r, density) rows")
        if r[0] != 0.0:
            raise ValueError("density table radii must start at 0")
        if np.any(np.diff(r) <= 0):
            raise ValueError("density table radii must be strictly increasing")
        if np.any(d < 0):
            raise ValueError("density values must be nonnegative")
        if np.any(d[1:] <= 0):
            raise ValueError("a doubling density cannot vanish away from the origin")
        w = cls(TABULATED, radii=r, density_values=d)
        w._build_segments()
        if w.mass(r[-1]) <= 1.0:
            raise ValueError("table too short: total mass must exceed 1")
        return w

    # -- table internals -------------------------------------------------
    def _build_segments(self) -> None:
        r, d = self.radii, self.density_values
        k = np.empty(r.size - 1)
        k[1:] = np.log(d[2:] / d[1:-1]) / np.log(r[2:] / r[1:-1])
        k[0] = k[1]
        if k[0] <= -2.0:
            raise ValueError("density too singular at the origin (mass would diverge)")
        amp = d[1:] / r[1:] ** k  # density = amp * s**k on segment i (anchor r[i+1])
        mass = np.zeros(r.size)
        phi = np.zeros(r.size)
        for i in range(r.size - 1):
            a, b, e = r[i], r[i + 1], k[i] + 2.0
            mass[i + 1] = mass[i] + TWO_PI * amp[i] * _pdiff(a, b, e)
            const = mass[i] / TWO_PI - amp[i] * _pw(a, e) / e
            phi[i + 1] = phi[i] + const * (math.log(b / a) if a > 0 else 0.0) + amp[i] / e * _pdiff(a, b, e)
        self._seg.update(k=k, amp=amp, mass=mass, phi=phi)

    def _locate(self, r: np.ndarray) -> np.ndarray:
        if np.any(r > self.radii[-1] * (1 + 1e-14)) or np.any(r < 0):
            bad = r[(r > self.radii[-1]) | (r < 0)]
            raise OutOfDomainError(
                f"radius {float(bad.flat[0]):.6g} outside table range [0, {self.radii[-1]:.6g}]"
            )
        return np.clip(np.searchsorted(self.radii, r, side="right") - 1, 0, self.radii.size - 2)

    # -- radial profiles --------------------------------------------------
    @property
    def r_max(self) -> float:
        return math.inf if self.kind == RADIAL_POWER else float(self.radii[-1])

    @property
    def weight_id(self) -> str:
        if self.kind == RADIAL_POWER:
            return f"radial_power(m={self.m:g})"
        h = hashlib.sha256(np.ascontiguousarray(np.stack([self.radii, self.density_values])).tobytes())
        return f"tabulated_radial({h.hexdigest()[:12]})"

    @property
    def even_power(self) -> int | None:
        """m when phi = |z|^m with m an even integer (polynomial density)."""
        if self.kind == RADIAL_POWER and float(self.m).is_integer() and int(self.m) % 2 == 0:
            return int(self.m)
        return None

    def density(self, r):
        """Radial density of mu at |z| = r."""
        r = np.asarray(r, dtype=float)
        if self.kind == RADIAL_POWER:
            m = self.m
            with np.errstate(divide="ignore"):
                return m * m * np.power(r, m - 2.0)
        i = self._locate(r)
        return self._seg["amp"][i] * np.power(r, self._seg["k"][i])

    def mass(self, r):
        """Centered mass mu(D(0, r))."""
        r = np.asarray(r, dtype=float)
        if self.kind == RADIAL_POWER:
            return TWO_PI * self.m * np.power(r, self.m)
        i = self._locate(r)
        k, amp = self._seg["k"][i], self._seg["amp"][i]
        a = self.radii[i]
        return self._seg["mass"][i] + TWO_PI * amp * _pdiff(a, r, k + 2.0)

    def phi_radial(self, r):
        """phi as a function of |z|, normalized by phi(0) = 0."""
        r = np.asarray(r, dtype=float)
        if self.kind == RADIAL_POWER:
            return np.power(r, self.m)
        i = self._locate(r)
        k, amp = self._seg["k"][i], self._seg["amp"][i]
        a = self.radii[i]
        e = k + 2.0
        mass_a = self._seg["mass"][i]
        const = mass_a / TWO_PI - amp * _pw(a, e) / e
        with np.errstate(divide="ignore", invalid="ignore"):
            logterm = np.where(a > 0, np.log(np.where(a > 0, r / np.where(a > 0, a, 1.0), 1.0)), 0.0)
        return self._seg["phi"][i] + const * logterm + amp / e * _pdiff(a, r, e)

    def dphi_radial(self, r):
        """d phi / d r = mu(D(0, r)) / (2 pi r)."""
        r = np.asarray(r, dtype=float)
        return self.mass(r) / (TWO_PI * r)


def _pw(a, e):
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, np.power(np.where(a > 0, a, 1.0), e), 0.0)


def _pdiff(a, b, e):
    """(b^e - a^e) / e, with the log limit at e = 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    e = np.asarray(e, dtype=float)
    small = np.abs(e) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        regular = (_pw(b, e) - _pw(a, e)) / np.where(small, 1.0, e)
        limit = np.log(np.where(b > 0, b, 1.0)) - np.log(np.where(a > 0, a, 1.0))
    out = np.where(small, limit, regular)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def eval_phi(w: WeightSpec, z) -> float | np.ndarray:
    """phi(z); raises OutOfDomainError beyond a density table."""
    out = w.phi_radial(np.abs(np.asarray(z)))
    return float(out) if np.ndim(out) == 0 else out


def disc_mass_centered(w: WeightSpec, r) -> float | np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    out = w.mass(r)
    return float(out) if np.ndim(out) == 0 else out


def _even_power_disc_mass(m: int, a, r):
    # mean of |z+u|^(2j) over |u| = s is sum_i C(j,i)^2 |z|^(2(j-i)) s^(2i)
    j = (m - 2) // 2
    a = np.asarray(a, dtype=float)
    r = np.asarray(r, dtype=float)
    total = np.zeros(np.broadcast(a, r).shape)
    for i in range(j + 1):
        total = total + comb(j, i) ** 2 * a ** (2 * (j - i)) * r ** (2 * i + 2) / (2 * i + 2)
    return m * m * TWO_PI * total


def _arc_integrand(w: WeightSpec, a: float, r: float):
    def f(t):
        c = (t * t + a * a - r * r) / (2.0 * t * a)
        return w.density(t) * t * 2.0 * math.acos(min(1.0, max(-1.0, c)))

    return f


def disc_mass_quadrature(w: WeightSpec, z: complex, r: float, rtol: float = 1e-11) -> float:
    """mu(D(z, r)) by integrating the density over the arcs of |w| = t inside the disc."""
    a = abs(z)
    if r <= 0:
        raise ValueError("disc radius must be positive")
    if a == 0.0:
        return float(w.mass(r))
    inner = max(0.0, r - a)
    lo, hi = abs(a - r), a + r
    if hi > w.r_max:
        raise OutOfDomainError(f"disc D({z}, {r}) leaves the table range")
    full = float(w.mass(inner)) if inner > 0 else 0.0
    val, err = integrate.quad(
        _arc_integrand(w, a, r), lo, hi, epsabs=0.0, epsrel=rtol, limit=400, full_output=1
    )[:2]
    total = full + val
    if not math.isfinite(val) or err > 100 * rtol * max(abs(total), 1e-300):
        raise QuadratureError(f"disc mass quadrature stalled at z={z}, r={r}", err)
    return total


def disc_mass(w: WeightSpec, z, r, method: str = "auto"):
    """mu(D(z, r)).

    ``method='auto'`` uses the exact polynomial formula for even integer m and
    arc quadrature otherwise; ``'quadrature'`` forces the quadrature path.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("disc radius must be positive")
    m = w.even_power
    if method == "auto" and m is not None:
        out = _even_power_disc_mass(m, np.abs(np.asarray(z)), r_arr)
        return float(out) if np.ndim(out) == 0 else out
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    zb, rb = np.broadcast_arrays(np.asarray(z, dtype=complex), r_arr)
    out = np.array([disc_mass_quadrature(w, complex(zz), float(rr)) for zz, rr in zip(zb.ravel(), rb.ravel())])
    out = out.reshape(zb.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def moment(w: WeightSpec, n: int) -> float:
    """log I_n, the log of the squared F^2 norm of z^n."""
    if n < 0:
        raise ValueError("moment index must be nonnegative")
    if w.kind == RADIAL_POWER:
        return float(_power_log_moments(w.m, np.array([n]))[0])
    return moment_quadrature(w, n)


def _power_log_moments(m: float, n: np.ndarray) -> np.ndarray:
    x = (2.0 * n + 2.0) / m
    return math.log(TWO_PI / m) + gammaln(x) - x * math.log(2.0)


def moment_quadrature(w: WeightSpec, n: int, rtol: float = 1e-13) -> float:
    """log I_n by adaptive quadrature of 2 pi r^(2n+1) exp(-2 phi(r)).

    The integrand is rescaled by its peak value; for tables, the part beyond the
    last radius is bounded using phi(r) - phi(R) >= M(R)/(2 pi) log(r/R).
    """
    def g(r):
        return (2 * n + 1) * math.log(r) - 2.0 * float(w.phi_radial(r))

    # peak of g: (2n+1)/r = 2 phi'(r)
    def slope(r):
        return (2 * n + 1) / r - 2.0 * float(w.dphi_radial(r))

    r_hi = w.r_max
    lo_b, hi_b = 1e-300, 1.0
    while slope(hi_b) > 0:
        if hi_b * 2 > r_hi:
            hi_b = r_hi
            break
        hi_b *= 2.0
    lo_b = hi_b / 2.0
    while lo_b > 1e-12 and slope(lo_b) < 0:
        lo_b /= 2.0
    r_peak = optimize.brentq(slope, lo_b, hi_b, xtol=1e-14) if slope(hi_b) < 0 < slope(lo_b) else hi_b
    g_peak = g(r_peak)

    # right cutoff: g drops by 800 (or the table ends)
    r_end = r_peak * 1.5 + 1e-3
    while r_end < r_hi and g(r_end) - g_peak > -800.0:
        r_end = min(2.0 * r_end, r_hi)
    r_end = min(r_end, r_hi)

    def f(r):
        if r <= 0.0:
            return 0.0
        return math.exp(g(r) - g_peak)

    total = 0.0
    err_total = 0.0
    for a, b in ((0.0, r_peak), (r_peak, r_end)):
        if b <= a:
            continue
        val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=500)
        total += val
        err_total += err
    if not total > 0 or err_total > 1e3 * rtol * total:
        raise QuadratureError(f"moment quadrature failed for n={n}", err_total)
    log_val = math.log(TWO_PI) + g_peak + math.log(total)

    if math.isfinite(r_hi) and r_end >= r_hi:
        a_exp = float(w.mass(r_hi)) / math.pi
        if a_exp <= 2 * n + 2:
            raise QuadratureError(f"tail beyond table not summable for n={n}", math.inf)
        log_tail = (math.log(TWO_PI) - 2.0 * float(w.phi_radial(r_hi)) + (2 * n + 2) * math.log(r_hi)
                    - math.log(a_exp - 2 * n - 2))
        if log_tail - log_val > math.log(1e-9):
            raise QuadratureError(f"table tail bound too large for n={n}", math.exp(log_tail - log_val))
    return log_val


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Immutable table of log I_n for n = 0..n_max."""

    n_max: int
    log_moments: np.ndarray
    weight_id: str
    m: float | None = None  # set for radial powers: enables exact Gamma-ratio differences

    def __post_init__(self):
        arr = np.asarray(self.log_moments, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "log_moments", arr)
        if arr.size != self.n_max + 1 or not np.all(np.isfinite(arr)):
            raise ValueError("moment table must hold n_max + 1 finite entries")

    def __getitem__(self, n):
        return self.log_moments[n]

    def log_ratio(self, n, shift: int) -> np.ndarray:
        """log I_(n+shift) - log I_n, vectorized over n."""
        n = np.asarray(n)
        if np.any(n + shift < 0) or np.any(n + shift > self.n_max) or np.any(n > self.n_max):
            raise IndexError("moment index outside table")
        if self.m is not None:
            x = (2.0 * n + 2.0) / self.m
            a = 2.0 * shift / self.m
            return log_gamma_ratio(x, a) - a * math.log(2.0)
        return self.log_moments[n + shift] - self.log_moments[n]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,log_moment\n")
        for n, v in enumerate(self.log_moments):
            buf.write(f"{n},{v:.17g}\n")
        return buf.getvalue()


def build_moment_table(w: WeightSpec, n_max: int) -> MomentTable:
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if w.kind == RADIAL_POWER:
        logs = _power_log_moments(w.m, np.arange(n_max + 1))
        return MomentTable(n_max, logs, w.weight_id, m=w.m)
    logs = np.array([moment_quadrature(w, n) for n in range(n_max + 1)])
    return MomentTable(n_max, logs, w.weight_id)


# ---------------------------------------------------------------------------
# Config / CSV input
# ---------------------------------------------------------------------------

def read_density_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column ``r,density`` CSV; a non-numeric first row is taken as header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows or lineno > 1:
                    raise ValueError(f"{path}:{lineno}: cannot parse density row {row!r}")
    arr = np.array(rows, dtype=float)
    return arr[:, 0], arr[:, 1]


def weight_from_mapping(cfg: dict, base_dir: Path | None = None) -> WeightSpec:
    kind = str(cfg.get("kind", RADIAL_POWER)).strip().lower()
    if kind in ("radial_power", "radialpower", "power"):
        if "m" not in cfg:
            raise KeyError("m")
        return WeightSpec.radial_power(float(cfg["m"]))
    if kind in ("tabulated_radial", "tabulatedradial", "tabulated"):
        p = Path(cfg["density_table"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return WeightSpec.tabulated(*read_density_csv(p))
    raise ValueError(f"unknown weight kind {kind!r}")
