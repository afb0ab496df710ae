"""The radius function rho, doubling statistics and the distance d_phi.

rho(z) is the radius with mu(D(z, rho(z))) = 1.  d_phi is the length metric
|dz| / rho(z), approximated by shortest paths on an 8-neighbour grid graph.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import integrate, optimize
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .numerics import linear_fit, loglog_slope
from .weights import RADIAL_POWER, OutOfDomainError, WeightSpec, _even_power_disc_mass, disc_mass

DEFAULT_RHO_TOL = 1e-10
MAX_BRACKET_EXPANSIONS = 60


class BracketError(RuntimeError):
    """No radius bracket found: the weight is not doubling or the table is too short."""


class GridTooLargeError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# rho
# ---------------------------------------------------------------------------

def _rho_centered(w: WeightSpec) -> float:
    if w.kind == RADIAL_POWER:
        return (2.0 * math.pi * w.m) ** (-1.0 / w.m)
    return optimize.brentq(lambda r: float(w.mass(r)) - 1.0, 1e-300, w.r_max, xtol=1e-16, rtol=4 * np.finfo(float).eps)


def _rho_guess(w: WeightSpec, a: np.ndarray) -> np.ndarray:
    """Local-density radius 1/sqrt(pi density), capped by the centered radius plus |z|.

    Inside the centered radius the centered value is used: a density singular
    at 0 makes the local radius meaningless there.
    """
    r0 = _rho_centered(w)
    a = np.asarray(a, dtype=float)
    dens = np.zeros_like(a)
    pos = a > 0
    if pos.any():
        dens[pos] = w.density(a[pos])
    local = np.full_like(a, np.inf)
    ok = dens > 0
    local[ok] = 1.0 / np.sqrt(math.pi * dens[ok])
    return np.where(np.isfinite(local) & (a >= r0), np.minimum(local, r0 + a), r0)


def _rho_even_power(m: int, a: np.ndarray, tol: float) -> np.ndarray:
    w = WeightSpec.radial_power(m)
    g = _rho_guess(w, a)
    lo, hi = g / 4.0, g * 4.0
    for _ in range(MAX_BRACKET_EXPANSIONS):
        bad = _even_power_disc_mass(m, a, lo) > 1.0
        if not bad.any():
            break
        lo = np.where(bad, lo / 2.0, lo)
    else:
        raise BracketError("lower bracket for rho not found")
    for _ in range(MAX_BRACKET_EXPANSIONS):
        bad = _even_power_disc_mass(m, a, hi) < 1.0
        if not bad.any():
            break
        hi = np.where(bad, hi * 2.0, hi)
    else:
        raise BracketError("upper bracket for rho not found")
    # mass is a convex increasing polynomial in r: Newton from the upper bracket is monotone
    r = hi
    for _ in range(100):
        f = _even_power_disc_mass(m, a, r) - 1.0
        step = f / _even_power_mass_dr(m, a, r)
        r_new = np.maximum(r - step, lo)
        if np.all(np.abs(r_new - r) <= 4e-16 * r):
            r = r_new
            break
        r = r_new
    resid = np.abs(_even_power_disc_mass(m, a, r) - 1.0)
    if np.any(resid > tol):
        raise BracketError(f"rho residual {resid.max():.3e} exceeds tol {tol:.1e}")
    return r


def _even_power_mass_dr(m: int, a, r):
    j = (m - 2) // 2
    total = np.zeros(np.broadcast(a, r).shape)
    for i in range(j + 1):
        total = total + comb(j, i) ** 2 * a ** (2 * (j - i)) * r ** (2 * i + 1)
    return m * m * 2.0 * math.pi * total


def _rho_scalar(w: WeightSpec, z: complex, tol: float) -> float:
    a = abs(z)
    g = float(_rho_guess(w, np.array(a)))
    lo, hi = g / 4.0, g * 4.0

    def f(r):
        return float(disc_mass(w, z, r, method="quadrature" if w.even_power is None else "auto")) - 1.0

    n = 0
    while f(lo) > 0:
        lo /= 2.0
        n += 1
        if n > MAX_BRACKET_EXPANSIONS:
            raise BracketError(f"lower bracket for rho({z}) not found")
    n = 0
    while True:
        try:
            if f(hi) >= 0:
                break
        except OutOfDomainError as exc:
            raise BracketError(f"rho({z}) bracket leaves the density table") from exc
        lo, hi = hi, hi * 2.0
        n += 1
        if n > MAX_BRACKET_EXPANSIONS:
            raise BracketError(f"upper bracket for rho({z}) not found")
    r = optimize.brentq(f, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=200)
    resid = abs(f(r))
    if resid > tol:
        raise BracketError(f"rho({z}) residual {resid:.3e} exceeds tol {tol:.1e}")
    return r


def rho(w: WeightSpec, z, tol: float = DEFAULT_RHO_TOL):
    """rho(z) for scalar or array z with |mu(D(z, rho)) - 1| <= tol.

    All supported weights are radial, so rho is solved once per distinct |z|.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    z_arr = np.asarray(z)
    a = np.abs(z_arr).astype(float)
    uniq, inv = np.unique(a.ravel(), return_inverse=True)
    m = w.even_power
    if m is not None:
        vals = _rho_even_power(m, uniq, tol)
    else:
        vals = np.array([_rho_scalar(w, complex(x), tol) for x in uniq])
    out = vals[inv].reshape(a.shape)
    return float(out) if out.ndim == 0 else out


@dataclass
class RadiusField:
    """rho with a per-radius cache; reusable across grid fills."""

    weight: WeightSpec
    tol: float = DEFAULT_RHO_TOL
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def weight_id(self) -> str:
        return self.weight.weight_id

    def __call__(self, z):
        if self.weight.even_power is not None:
            return rho(self.weight, z, self.tol)
        a = np.abs(np.asarray(z)).astype(float)
        uniq = np.unique(a.ravel())
        missing = [x for x in uniq if x not in self._cache]
        if missing:
            for x, v in zip(missing, np.atleast_1d(rho(self.weight, np.array(missing), self.tol))):
                self._cache[x] = float(v)
        out = np.vectorize(self._cache.__getitem__, otypes=[float])(a) if a.ndim else np.array(self._cache[float(a)])
        return float(out) if out.ndim == 0 else out

    def grid_csv(self, points) -> str:
        pts = np.asarray(points, dtype=complex).ravel()
        vals = np.atleast_1d(self(pts))
        buf = io.StringIO()
        buf.write("x,y,rho\n")
        for p, v in zip(pts, vals):
            buf.write(f"{p.real:.17g},{p.imag:.17g},{v:.17g}\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Doubling statistics and comparability checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DoublingStats:
    C_doubling: float
    gamma_fit: float
    delta_fit: float
    samples: dict


def doubling_stats(w: WeightSpec, centers, radii, pair_points=None, tol: float = DEFAULT_RHO_TOL) -> DoublingStats:
    """Empirical doubling constant and exponents.

    gamma_fit: each center gives a mass dimension D (slope of log mu(D(z,r)) in
    log r); the two-sided disc inequality holds with gamma = min(D, 1/D) over
    all centers.  delta_fit: 1 - slope of the upper envelope of
    log(rho(z)/rho(zeta)) against log(|z-zeta|/rho(zeta)) over pairs with
    zeta outside D(z).
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if centers.size * radii.size < 2:
        raise ValueError("doubling statistics need more than one sample")
    ratios = []
    dims = []
    for z in centers:
        mass = np.atleast_1d(disc_mass(w, z, radii))
        mass2 = np.atleast_1d(disc_mass(w, z, 2 * radii))
        ratios.append(mass2 / mass)
        if radii.size >= 2:
            dims.append(loglog_slope(radii, mass)[0])
    ratios = np.concatenate(ratios)
    if dims:
        dims = np.array(dims)
        gamma = float(min(dims.min(), 1.0 / dims.max()))
    else:
        gamma = float(min(np.log2(ratios).min(), 1.0 / np.log2(ratios).max()))

    pts = centers if pair_points is None else np.asarray(pair_points, dtype=complex)
    delta = _fit_delta(w, pts, tol)
    return DoublingStats(
        C_doubling=float(ratios.max()),
        gamma_fit=gamma,
        delta_fit=delta,
        samples={"centers": int(centers.size), "r_min": float(radii.min()), "r_max": float(radii.max())},
    )


def _fit_delta(w: WeightSpec, pts: np.ndarray, tol: float) -> float:
    rh = np.atleast_1d(rho(w, pts, tol))
    zi, zj = np.meshgrid(np.arange(pts.size), np.arange(pts.size), indexing="ij")
    zi, zj = zi.ravel(), zj.ravel()
    dist = np.abs(pts[zi] - pts[zj])
    keep = dist > rh[zi]
    if keep.sum() < 3:
        return 0.5
    x = np.log(dist[keep] / rh[zj][keep])
    y = np.log(rh[zi][keep] / rh[zj][keep])
    edges = np.quantile(x, np.linspace(0, 1, 9))
    bx, by = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (x >= lo) & (x <= hi)
        if sel.any():
            k = np.argmax(np.where(sel, y, -np.inf))
            bx.append(x[k])
            by.append(y[k])
    if len(set(bx)) < 2:
        return 0.5
    slope = linear_fit(np.array(bx), np.array(by))[0]
    return float(np.clip(1.0 - slope, 0.01, 0.99))


def rho_comparability(w: WeightSpec, r_mult: float, centers, n_radial: int = 8, n_angle: int = 16,
                      tol: float = DEFAULT_RHO_TOL) -> float:
    """max of rho(z)/rho(zeta) and its inverse over zeta in D(z, r_mult rho(z))."""
    if not r_mult > 0:
        raise ValueError("r_mult must be positive")
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    rz = np.atleast_1d(rho(w, centers, tol))
    s = np.linspace(0, 1, n_radial + 1)[1:]
    th = np.linspace(0, 2 * np.pi, n_angle, endpoint=False)
    offs = (s[:, None] * np.exp(1j * th)[None, :]).ravel()
    zeta = centers[:, None] + r_mult * rz[:, None] * offs[None, :]
    rzeta = np.asarray(rho(w, zeta, tol))
    ratio = rz[:, None] / rzeta
    return float(np.max(np.maximum(ratio, 1.0 / ratio)))


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    stderr: float
    beta_fit: float
    gamma_fit: float
    C: float
    ok: bool


def growth_exponents(w: WeightSpec, r_lo: float = 10.0, r_hi: float = 1000.0, n: int = 41,
                     tol: float = DEFAULT_RHO_TOL) -> GrowthFit:
    """Slope of log rho(|z|) against log |z| and power-law envelope constants."""
    if r_hi / r_lo < 100:
        raise ValueError("radius range must span at least two decades")
    r = np.geomspace(r_lo, r_hi, n)
    rh = np.asarray(rho(w, r, tol))
    slope, intercept, stderr = loglog_slope(r, rh)
    local = np.diff(np.log(rh)) / np.diff(np.log(r))
    beta = max(0.0, float(local.max()))
    gamma = max(0.0, float(-local.min()))
    # C^-1 |z|^-gamma <= rho <= C |z|^beta on the sample
    c_env = float(max(np.max(rh / r**beta), np.max(r**gamma / rh) if gamma > 0 else np.max(1 / rh)))
    ok = -gamma - 1e-12 <= slope <= beta + 1e-12 and math.isfinite(c_env)
    return GrowthFit(slope, intercept, stderr, beta, gamma, c_env, ok)


# ---------------------------------------------------------------------------
# Distance on an 8-neighbour grid graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform grid x0 + i h, y0 + j h for 0 <= i < nx, 0 <= j < ny."""

    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def nodes(self) -> np.ndarray:
        x = self.x0 + self.h * np.arange(self.nx)
        y = self.y0 + self.h * np.arange(self.ny)
        return x[:, None] + 1j * y[None, :]

    def contains(self, p: complex) -> bool:
        eps = 1e-9 * self.h
        return (self.x0 - eps <= p.real <= self.x0 + (self.nx - 1) * self.h + eps
                and self.y0 - eps <= p.imag <= self.y0 + (self.ny - 1) * self.h + eps)


def make_grid(w: WeightSpec, box, nodes_per_rho: float = 8.0, anchor: complex = 0j,
              max_nodes: int = 4_000_000, tol: float = DEFAULT_RHO_TOL, h: float | None = None) -> GridSpec:
    """Grid over ``box = (xmin, xmax, ymin, ymax)`` with spacing min(rho)/nodes_per_rho.

    ``anchor`` is placed on a node so that axis-aligned segments through it
    are grid lines.  An explicit spacing ``h`` skips the rho probe.
    """
    xmin, xmax, ymin, ymax = map(float, box)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("empty box")
    if h is None:
        xs = np.linspace(xmin, xmax, 17)
        ys = np.linspace(ymin, ymax, 17)
        probe = (xs[:, None] + 1j * ys[None, :]).ravel()
        near = complex(np.clip(0.0, xmin, xmax), np.clip(0.0, ymin, ymax))
        probe = np.append(probe, near)
        h = float(np.min(rho(w, probe, tol))) / nodes_per_rho
    ax, ay = anchor.real, anchor.imag
    x0 = ax - math.ceil((ax - xmin) / h - 1e-9) * h
    y0 = ay - math.ceil((ay - ymin) / h - 1e-9) * h
    nx = int(math.floor((xmax - x0) / h + 1e-9)) + 2
    ny = int(math.floor((ymax - y0) / h + 1e-9)) + 2
    if nx * ny > max_nodes:
        raise GridTooLargeError(f"grid needs {nx * ny} nodes (> max_nodes={max_nodes}); coarsen or shrink the box")
    return GridSpec(x0, y0, h, nx, ny)


def _grid_edges(grid: GridSpec, rho_nodes: np.ndarray):
    nx, ny, h = grid.nx, grid.ny, grid.h
    idx = np.arange(nx * ny).reshape(nx, ny)
    rn = rho_nodes.reshape(nx, ny)
    src, dst, wt = [], [], []
    for (a, b, length) in (
        (idx[:-1, :], idx[1:, :], h),
        (idx[:, :-1], idx[:, 1:], h),
        (idx[:-1, :-1], idx[1:, 1:], h * math.sqrt(2)),
        (idx[1:, :-1], idx[:-1, 1:], h * math.sqrt(2)),
    ):
        a, b = a.ravel(), b.ravel()
        src.append(a)
        dst.append(b)
        wt.append(length * 2.0 / (rn.ravel()[a] + rn.ravel()[b]))
    return np.concatenate(src), np.concatenate(dst), np.concatenate(wt)


def _attach(grid: GridSpec, rho_flat: np.ndarray, p: complex, rho_p: float, new_index: int):
    """Edges from an off-grid point to the corners of its cell, or the coincident node index."""
    if not grid.contains(p):
        raise ValueError(f"point {p} outside the distance grid")
    fx = (p.real - grid.x0) / grid.h
    fy = (p.imag - grid.y0) / grid.h
    ri, rj = round(fx), round(fy)
    if abs(fx - ri) < 1e-9 and abs(fy - rj) < 1e-9:
        return int(ri * grid.ny + rj), None
    i = min(int(math.floor(fx)), grid.nx - 2)
    j = min(int(math.floor(fy)), grid.ny - 2)
    corners = np.array([i * grid.ny + j, (i + 1) * grid.ny + j, i * grid.ny + j + 1, (i + 1) * grid.ny + j + 1])
    cpos = grid.x0 + grid.h * (corners // grid.ny) + 1j * (grid.y0 + grid.h * (corners % grid.ny))
    wt = np.abs(cpos - p) * 2.0 / (rho_flat[corners] + rho_p)
    return new_index, (np.full(4, new_index), corners, wt)


def _cell_of(grid: GridSpec, p: complex) -> tuple[int, int]:
    i = min(int(math.floor((p.real - grid.x0) / grid.h)), grid.nx - 2)
    j = min(int(math.floor((p.imag - grid.y0) / grid.h)), grid.ny - 2)
    return i, j


def _graph(grid: GridSpec, rho_flat: np.ndarray, extra: list[complex], rho_extra: list[float]):
    src, dst, wt = _grid_edges(grid, rho_flat)
    srcs, dsts, wts = [src], [dst], [wt]
    indices = []
    n = grid.size
    for p, rp in zip(extra, rho_extra):
        k, edges = _attach(grid, rho_flat, p, rp, n)
        if edges is not None:
            srcs.append(edges[0])
            dsts.append(edges[1])
            wts.append(edges[2])
            n += 1
        indices.append(k)
    # two off-grid points sharing a cell also get a direct edge
    for a in range(len(extra)):
        for b in range(a + 1, len(extra)):
            ia, ib = indices[a], indices[b]
            if ia >= grid.size and ib >= grid.size and _cell_of(grid, extra[a]) == _cell_of(grid, extra[b]):
                srcs.append(np.array([ia]))
                dsts.append(np.array([ib]))
                wts.append(np.array([abs(extra[a] - extra[b]) * 2.0 / (rho_extra[a] + rho_extra[b])]))
    s = np.concatenate(srcs)
    d = np.concatenate(dsts)
    wv = np.concatenate(wts)
    wv = np.maximum(wv, 1e-300)
    mat = csr_matrix((np.concatenate([wv, wv]), (np.concatenate([s, d]), np.concatenate([d, s]))), shape=(n, n))
    return mat, indices


@dataclass
class DistanceField:
    """Graph distances from ``source`` to every grid node."""

    weight_id: str
    grid: GridSpec
    source: complex
    rho_nodes: np.ndarray
    dist: np.ndarray  # shape (nx, ny)
    _rho: RadiusField = field(repr=False, default=None)

    def query(self, points) -> np.ndarray:
        """Distance to arbitrary points: min over the corners of the enclosing cell."""
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        out = np.empty(pts.shape, dtype=float)
        rp = np.atleast_1d(self._rho(pts))
        rflat = self.rho_nodes
        dflat = self.dist.ravel()
        g = self.grid
        for k, p in enumerate(pts.ravel()):
            if p == self.source:
                out.flat[k] = 0.0
                continue
            idx, edges = _attach(g, rflat, complex(p), float(rp.flat[k]), -1)
            if edges is None:
                out.flat[k] = dflat[idx]
                continue
            best = float(np.min(dflat[edges[1]] + edges[2]))
            if not _on_node(g, self.source) and _cell_of(g, self.source) == _cell_of(g, complex(p)):
                rs = float(self._rho(self.source))
                best = min(best, abs(p - self.source) * 2.0 / (rs + float(rp.flat[k])))
            out.flat[k] = best
        return out

    def boundary_min(self) -> float:
        d = self.dist
        return float(min(d[0, :].min(), d[-1, :].min(), d[:, 0].min(), d[:, -1].min()))

    def to_csv(self) -> str:
        nodes = self.grid.nodes().ravel()
        buf = io.StringIO()
        buf.write("x,y,dist\n")
        for p, v in zip(nodes, self.dist.ravel()):
            buf.write(f"{p.real:.17g},{p.imag:.17g},{v:.17g}\n")
        return buf.getvalue()


def _on_node(grid: GridSpec, p: complex) -> bool:
    fx = (p.real - grid.x0) / grid.h
    fy = (p.imag - grid.y0) / grid.h
    return abs(fx - round(fx)) < 1e-9 and abs(fy - round(fy)) < 1e-9


def distance_field(w: WeightSpec, source: complex, grid: GridSpec, rho_field: RadiusField | None = None) -> DistanceField:
    rf = rho_field or RadiusField(w)
    nodes = grid.nodes().ravel()
    rflat = np.asarray(rf(nodes)).ravel()
    mat, (si,) = _graph(grid, rflat, [complex(source)], [float(rf(source))])
    dist = dijkstra(mat, directed=True, indices=si)
    return DistanceField(w.weight_id, grid, complex(source), rflat, dist[: grid.size].reshape(grid.nx, grid.ny), rf)


def default_box(w: WeightSpec, z: complex, zeta: complex, tol: float = DEFAULT_RHO_TOL):
    sep = abs(z - zeta)
    margin = max(0.25 * sep, 4.0 * float(max(rho(w, z, tol), rho(w, zeta, tol))))
    return (min(z.real, zeta.real) - margin, max(z.real, zeta.real) + margin,
            min(z.imag, zeta.imag) - margin, max(z.imag, zeta.imag) + margin)


def bergman_distance(w: WeightSpec, z: complex, zeta: complex, grid: GridSpec | None = None,
                     nodes_per_rho: float = 8.0, max_nodes: int = 4_000_000) -> float:
    """d_phi(z, zeta) as a shortest path on the grid with both endpoints attached.

    Edge weight is Euclidean length times 2 / (rho(a) + rho(b)).
    """
    z, zeta = complex(z), complex(zeta)
    if z == zeta:
        return 0.0
    if grid is None:
        grid = make_grid(w, default_box(w, z, zeta), nodes_per_rho, anchor=0j, max_nodes=max_nodes)
    if not (grid.contains(z) and grid.contains(zeta)):
        raise ValueError("endpoints outside the distance grid")
    rf = RadiusField(w)
    rflat = np.asarray(rf(grid.nodes().ravel())).ravel()
    mat, (iz, izeta) = _graph(grid, rflat, [z, zeta], [float(rf(z)), float(rf(zeta))])
    dist = dijkstra(mat, directed=True, indices=iz)
    return float(dist[izeta])


def radial_distance(w: WeightSpec, r_end: float, r_start: float = 0.0) -> float:
    """int dr / rho(r) along a ray (radial lines are geodesics for radial weights)."""

    val, _ = integrate.quad(lambda r: 1.0 / rho(w, r), r_start, r_end, epsrel=1e-10, limit=200)
    return float(val)


def adaptive_field(w: WeightSpec, source: complex, d_cut: float, nodes_per_rho: float = 2.0,
                   half_width: float | None = None, max_nodes: int = 4_000_000,
                   rho_field: RadiusField | None = None) -> DistanceField:
    """Distance field on a square around ``source`` grown until every boundary node is at distance >= d_cut."""
    rf = rho_field or RadiusField(w)
    L = half_width if half_width is not None else 4.0 * float(rf(source))
    while True:
        box = (source.real - L, source.real + L, source.imag - L, source.imag + L)
        grid = make_grid(w, box, nodes_per_rho, anchor=source, max_nodes=max_nodes)
        fld = distance_field(w, source, grid, rf)
        if fld.boundary_min() >= d_cut:
            return fld
        L *= 1.6


# ---------------------------------------------------------------------------
# Distance envelope and decay checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeFit:
    delta_fit: float
    C_r: float
    C_near: float
    C_far: float
    passed: bool
    witness: tuple | None = None


def distance_envelope_check(w: WeightSpec, pairs, r: float = 1.0, delta_grid=None, cap: float = 10.0,
                            nodes_per_rho: float = 4.0, max_nodes: int = 4_000_000) -> EnvelopeFit:
    """Two-sided linear bounds inside D(z, r rho(z)) and power bounds outside.

    Far pairs need C^-1 x^delta <= d <= C x^(2-delta) with x = |z-zeta|/rho(z).
    Smaller delta only loosens both bounds, so the reported delta is the largest
    grid value whose constant stays below ``cap``.
    """
    delta_grid = np.linspace(0.05, 0.95, 19) if delta_grid is None else np.asarray(delta_grid)
    pairs = [(complex(a), complex(b)) for a, b in pairs]
    pairs = [(a, b) for a, b in pairs if a != b]
    by_source: dict[complex, list[int]] = {}
    for i, (z, _) in enumerate(pairs):
        by_source.setdefault(z, []).append(i)
    ds = np.empty(len(pairs))
    rf = RadiusField(w)
    for z, idx in by_source.items():
        ds[idx] = distances_from(w, z, [pairs[i][1] for i in idx], nodes_per_rho, max_nodes, rf)
    xs = np.array([abs(z - zeta) / float(rf(z)) for z, zeta in pairs])
    near = xs <= r
    c_near = 1.0
    if near.any():
        q = ds[near] / xs[near]
        c_near = float(max(q.max(), (1 / q).max()))
    far = ~near
    c_far, delta = 1.0, float(delta_grid[0])
    witness = None
    if far.any():
        x, d = xs[far], ds[far]
        consts = np.array([max(np.max(x**dl / d), np.max(d / x ** (2 - dl))) for dl in delta_grid])
        ok = np.nonzero(consts <= cap)[0]
        k = int(ok.max()) if ok.size else int(np.argmin(consts))
        c_far, delta = float(consts[k]), float(delta_grid[k])
        if c_far > cap:
            j = int(np.argmax(np.maximum(x**delta / d, d / x ** (2 - delta))))
            witness = [p for p, f in zip(pairs, far) if f][j]
    c_r = max(c_near, c_far)
    return EnvelopeFit(delta, c_r, c_near, c_far, bool(c_r <= cap), witness)


@dataclass(frozen=True)
class DecayIntegral:
    ratio: float
    ratio_half: float
    tail_increment: float
    R: float


def integral_decay_check(w: WeightSpec, zeta: complex, k: int, eps: float, tail_exp: float = 20.0,
                         nodes_per_rho: float = 2.0, max_nodes: int = 4_000_000,
                         field_: DistanceField | None = None) -> DecayIntegral:
    """int |z-zeta|^k exp(-d_phi(z,zeta)^eps) dmu(z) / rho(zeta)^k.

    The domain is a square around zeta grown until d_phi >= tail_exp^(1/eps) on
    its boundary.  ``ratio_half`` is the same sum over the disc of half the
    radius, so ``tail_increment`` measures stability under R -> 2R.
    """
    if k < 0 or not eps > 0:
        raise ValueError("need k >= 0 and eps > 0")
    zeta = complex(zeta)
    d_cut = tail_exp ** (1.0 / eps)
    fld = field_ or adaptive_field(w, zeta, d_cut, nodes_per_rho, max_nodes=max_nodes)
    nodes = fld.grid.nodes()
    sep = np.abs(nodes - zeta)
    dens = w.density(np.abs(nodes))
    dens = np.where(np.isfinite(dens), dens, 0.0)
    integrand = sep**k * np.exp(-fld.dist**eps) * dens * fld.grid.h**2
    R = float(min(zeta.real - fld.grid.x0, fld.grid.x0 + (fld.grid.nx - 1) * fld.grid.h - zeta.real,
                  zeta.imag - fld.grid.y0, fld.grid.y0 + (fld.grid.ny - 1) * fld.grid.h - zeta.imag))
    rz = float(rho(w, zeta)) ** k
    full = float(np.sum(integrand[sep <= R])) / rz
    half = float(np.sum(integrand[sep <= R / 2])) / rz
    return DecayIntegral(full, half, abs(full - half) / full if full else 0.0, R)


def distances_from(w: WeightSpec, source: complex, targets, nodes_per_rho: float = 4.0,
                   max_nodes: int = 4_000_000, rho_field: RadiusField | None = None) -> np.ndarray:
    """d_phi from one source to many targets using a single field over their bounding box."""
    targets = np.atleast_1d(np.asarray(targets, dtype=complex))
    source = complex(source)
    rf = rho_field or RadiusField(w)
    pts = np.append(targets, source)
    sep = float(np.max(np.abs(targets - source))) if targets.size else 0.0
    margin = max(0.25 * sep, 4.0 * float(np.max(rf(pts))))
    box = (pts.real.min() - margin, pts.real.max() + margin, pts.imag.min() - margin, pts.imag.max() + margin)
    grid = make_grid(w, box, nodes_per_rho, anchor=0j, max_nodes=max_nodes)
    fld = distance_field(w, source, grid, rf)
    return fld.query(targets)
