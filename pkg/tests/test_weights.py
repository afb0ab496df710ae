import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fockspec import weights as W

mpmath.mp.dps = 30


def mp_log_moment(m, n):
    """log of int |z|^(2n) exp(-2|z|^m) dA by direct mpmath quadrature."""
    f = lambda r: 2 * mpmath.pi * r ** (2 * n + 1) * mpmath.exp(-2 * r**m)
    peak = ((2 * n + 1) / (2 * m)) ** (1 / m)
    return float(mpmath.log(mpmath.quad(f, [0, peak, 4 * peak + 4, mpmath.inf])))


@pytest.mark.parametrize("m,n", [(2, 0), (2, 7), (3, 5), (4, 1), (4, 30), (1.5, 12), (6, 50)])
def test_moment_against_mpmath_quadrature(m, n):
    table = W.build_moment_table(W.WeightSpec.radial_power(m), n)
    assert table[n] == pytest.approx(mp_log_moment(m, n), abs=1e-12)


@given(st.floats(0.5, 8.0), st.integers(1, 2000))
def test_moments_log_convex(m, n):
    t = W.build_moment_table(W.WeightSpec.radial_power(m), n + 1)
    assert t[n - 1] + t[n + 1] >= 2 * t[n]
    assert t.log_ratio(n, 1) >= t.log_ratio(n - 1, 1)


@given(st.floats(0.5, 8.0), st.integers(0, 3000), st.integers(1, 6))
def test_log_ratio_matches_table_difference(m, n, shift):
    t = W.build_moment_table(W.WeightSpec.radial_power(m), n + shift)
    assert t.log_ratio(n, shift) == pytest.approx(t[n + shift] - t[n], abs=1e-9)


@pytest.mark.parametrize("m", [2, 4, 1.5])
def test_quadrature_moments_agree(m):
    w = W.WeightSpec.radial_power(m)
    exact = W.build_moment_table(w, 200)
    for n in (0, 1, 10, 57, 200):
        assert W.moment_quadrature(w, n) == pytest.approx(exact[n], abs=1e-9)


def test_laplacian_convention_by_finite_differences():
    w = W.WeightSpec.radial_power(3)
    z, h = 0.7 + 0.4j, 1e-4
    lap = (W.eval_phi(w, z + h) + W.eval_phi(w, z - h) + W.eval_phi(w, z + 1j * h)
           + W.eval_phi(w, z - 1j * h) - 4 * W.eval_phi(w, z)) / h**2
    assert lap == pytest.approx(float(w.density(abs(z))), rel=1e-6)
    assert float(w.density(abs(z))) == pytest.approx(9 * abs(z), rel=1e-14)


@given(st.floats(0.5, 6.0), st.floats(-4, 0))
def test_centered_mass_matches_off_center_at_origin(m, log_r):
    w = W.WeightSpec.radial_power(m)
    r = 10**log_r
    assert W.disc_mass(w, 0j, r, method="quadrature") == pytest.approx(W.disc_mass_centered(w, r), rel=1e-8)


def test_centered_mass_closed_form():
    assert W.disc_mass_centered(W.WeightSpec.radial_power(4), 2.0) == pytest.approx(2 * math.pi * 4 * 16)


def test_tabulated_reproduces_power():
    r = np.linspace(0, 10, 41)
    w = W.WeightSpec.tabulated(r, 16 * r**2)
    for x in (0.3, 1.0, 2.7):
        assert W.eval_phi(w, x) == pytest.approx(x**4, rel=1e-9)


@pytest.mark.parametrize("radii,dens", [
    ([0.1, 1, 2], [1, 1, 1]),
    ([0, 2, 1], [1, 1, 1]),
    ([0, 1, 2], [1, -1, 1]),
    ([0, 0.1, 0.2], [0.1, 0.1, 0.1]),
])
def test_tabulated_rejects_bad_tables(radii, dens):
    with pytest.raises(ValueError):
        W.WeightSpec.tabulated(radii, dens)


@pytest.mark.parametrize("m", [0, -1, math.inf])
def test_radial_power_rejects_bad_m(m):
    with pytest.raises(ValueError):
        W.WeightSpec.radial_power(m)


def test_read_density_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("r,density\n0,0\n1,16\n2,64\n4,256\n")
    w = W.weight_from_mapping({"kind": "tabulated", "density_table": "d.csv"}, tmp_path)
    assert W.eval_phi(w, 1.5) == pytest.approx(1.5**4, rel=1e-9)


def test_moment_table_csv_roundtrip():
    t = W.build_moment_table(W.WeightSpec.radial_power(2), 3)
    rows = t.to_csv().splitlines()
    assert rows[0] == "n,log_moment" and len(rows) == 5
    assert float(rows[2].split(",")[1]) == t[1]
