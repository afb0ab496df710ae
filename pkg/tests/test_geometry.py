import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fockspec import geometry as G
from fockspec.weights import WeightSpec, disc_mass

coords = st.floats(-6, 6)


@given(st.sampled_from([1.5, 2.0, 3.0, 4.0]), coords, coords)
def test_rho_solves_unit_mass(m, x, y):
    w = WeightSpec.radial_power(m)
    z = complex(x, y)
    r = G.rho(w, z, 1e-10)
    assert r > 0
    assert disc_mass(w, z, r) == pytest.approx(1.0, abs=1e-10)


def test_rho_unattainable_tolerance_raises():
    # off-center masses for odd m come from quadrature with rtol 1e-11
    with pytest.raises(G.BracketError):
        G.rho(WeightSpec.radial_power(3.0), 4.28125 + 5.25j, 1e-15)


def test_rho_gaussian_closed_form():
    w = WeightSpec.radial_power(2)
    assert G.rho(w, 3 + 4j) == pytest.approx(1 / (2 * math.sqrt(math.pi)), rel=1e-12)


def test_rho_local_density_limit():
    w = WeightSpec.radial_power(4)
    r = 200.0
    assert G.rho(w, r) * math.sqrt(math.pi * 16 * r**2) == pytest.approx(1.0, rel=1e-3)


def test_growth_slopes():
    assert G.growth_exponents(WeightSpec.radial_power(4)).slope == pytest.approx(-1.0, abs=1e-3)
    assert G.growth_exponents(WeightSpec.radial_power(2)).slope == pytest.approx(0.0, abs=1e-9)


def test_doubling_stats_positive():
    s = G.doubling_stats(WeightSpec.radial_power(4), [0.0, 3.0, 30.0], [0.5, 1.0, 2.0])
    assert s.C_doubling >= 1
    assert s.gamma_fit > 0 and math.isfinite(s.gamma_fit)
    assert 0 < s.delta_fit and math.isfinite(s.delta_fit)


def test_rho_comparability_gaussian_is_one():
    assert G.rho_comparability(WeightSpec.radial_power(2), 1.0, [0, 2j]) == pytest.approx(1.0)


def test_distance_zero_and_gaussian_straight_line():
    w = WeightSpec.radial_power(2)
    assert G.bergman_distance(w, 1j, 1j) == 0.0
    d = G.bergman_distance(w, 0, 1.0)
    assert d == pytest.approx(2 * math.sqrt(math.pi), rel=1e-9)


def test_distance_symmetry_and_triangle():
    w = WeightSpec.radial_power(4)
    pts = [0.3 + 0.1j, -0.5 + 0.6j, 0.9 - 0.4j]
    grid = G.make_grid(w, (-1.2, 1.2, -1.2, 1.2), 6)
    d = {(a, b): G.bergman_distance(w, pts[a], pts[b], grid=grid) for a in range(3) for b in range(3) if a != b}
    for (a, b), v in d.items():
        assert v == pytest.approx(d[(b, a)], rel=1e-6)
    for a, b, c in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        assert d[(a, c)] <= d[(a, b)] + d[(b, c)] + 1e-6


def test_distance_refinement_within_two_percent():
    w = WeightSpec.radial_power(4)
    d1 = G.bergman_distance(w, 0.2, 1.1 + 0.7j, nodes_per_rho=4)
    d2 = G.bergman_distance(w, 0.2, 1.1 + 0.7j, nodes_per_rho=8)
    assert abs(d1 - d2) <= 0.02 * d2


def test_radial_distance_matches_grid():
    w = WeightSpec.radial_power(4)
    exact = G.radial_distance(w, 2.0)
    assert G.bergman_distance(w, 0, 2.0, nodes_per_rho=8) == pytest.approx(exact, rel=1e-3)


def test_distance_field_csv_and_query():
    w = WeightSpec.radial_power(2)
    grid = G.make_grid(w, (-1, 1, -1, 1), 4)
    fld = G.distance_field(w, 0j, grid)
    assert fld.query([0j])[0] == pytest.approx(0.0, abs=1e-12)
    lines = fld.to_csv().splitlines()
    assert lines[0] == "x,y,dist" and len(lines) == grid.size + 1


def test_grid_cap_raises():
    with pytest.raises(G.GridTooLargeError):
        G.make_grid(WeightSpec.radial_power(2), (-50, 50, -50, 50), 8, max_nodes=1000)


def test_integral_decay_stable():
    r = G.integral_decay_check(WeightSpec.radial_power(2), 0.3 + 0.2j, 0, 1.0, tail_exp=30, nodes_per_rho=4)
    assert r.tail_increment <= 1e-4 and math.isfinite(r.ratio)
