"""Shared numerical helpers: Gauss-Legendre panels, Gamma ratios, ordered parallel map."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
from scipy.special import logsumexp

T = TypeVar("T")
U = TypeVar("U")

# Bernoulli numbers B_2k / (2k (2k-1)) for the Stirling series, k = 1..8
_STIRLING = np.array([
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
])
_SHIFT = 12.0


class QuadratureError(RuntimeError):
    """Raised when an adaptive integral does not reach its tolerance."""

    def __init__(self, message: str, error_estimate: float = float("nan")):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(edges: np.ndarray, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule over consecutive panels ``edges[i]..edges[i+1]``."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def log_gamma_ratio(x, a) -> np.ndarray:
    """log Gamma(x + a) - log Gamma(x) without cancellation for large x.

    ``scipy.special.poch`` and differences of ``gammaln`` both lose about
    ``eps * x log x`` in absolute terms; this uses the Stirling difference with
    log1p/expm1 and upward recurrence for small arguments.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    x, a = np.broadcast_arrays(x, a)
    if np.any(x <= 0) or np.any(x + a <= 0):
        raise ValueError("log_gamma_ratio needs x > 0 and x + a > 0")
    shift = np.where(np.minimum(x, x + a) < _SHIFT, np.ceil(_SHIFT - np.minimum(x, x + a)), 0.0)
    correction = np.zeros_like(x)
    kmax = int(shift.max()) if shift.size else 0
    for j in range(kmax):
        active = j < shift
        correction = correction - np.where(active, np.log1p(a / (x + j)), 0.0)
    y = x + shift
    u = np.log1p(a / y)
    out = (y - 0.5) * u + a * np.log(y + a) - a
    for k, c in enumerate(_STIRLING, start=1):
        e = 1 - 2 * k
        out = out + c * y**e * np.expm1(e * u)
    out = out + correction
    return out if out.ndim else float(out)


def log_abs_sum(log_mag: np.ndarray, phase: np.ndarray | None = None, axis: int = -1):
    """Return (log|S|, arg S) for S = sum exp(log_mag + i*phase) along ``axis``.

    Terms are rescaled by their maximum so the pairwise sum never overflows.
    """
    log_mag = np.asarray(log_mag, dtype=float)
    top = np.max(log_mag, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    scaled = np.exp(log_mag - top)
    if phase is None:
        s = np.sum(scaled, axis=axis)
        return np.log(s) + np.squeeze(top, axis=axis), np.zeros_like(s)
    s = np.sum(scaled * np.exp(1j * np.asarray(phase)), axis=axis)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(s)) + np.squeeze(top, axis=axis), np.angle(s)


def logsumexp_weights(log_terms: np.ndarray, weights: np.ndarray, axis: int = -1) -> np.ndarray:
    """log sum w_i exp(t_i) for positive weights."""
    return logsumexp(log_terms, b=weights, axis=axis)


def parallel_map(fn: Callable[[T], U], items: Iterable[T], threads: int = 1) -> list[U]:
    """Map preserving input order; ``threads <= 1`` runs serially."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares slope of log y against log x; returns (slope, intercept, stderr)."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return linear_fit(lx, ly)


def linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("need at least two points for a fit")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise ValueError("degenerate abscissae")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    if n > 2:
        resid = y - (intercept + slope * x)
        stderr = float(np.sqrt(np.sum(resid**2) / (n - 2) / sxx))
    else:
        stderr = 0.0
    return float(slope), float(intercept), stderr
