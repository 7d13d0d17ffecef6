import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcwqd.errors import Unreachable, ValidationError
from pcwqd.geometry import (
    PRESETS,
    PcwGeometry,
    PurcellEnvelope,
    _disks_area,
    _union_area_exact,
    area_fraction,
    disk_rect_area,
    monte_carlo_fraction,
    purcell_envelope,
    read_geometry_spec,
    solve_distance,
    write_geometry_spec,
)

G1 = PRESETS["first-row"]
D_NM = st.floats(0.5, 150.0)


@pytest.mark.parametrize("rect, expected", [
    ((-2, 2, -2, 2), math.pi),  # disk fully inside
    ((0, 2, -2, 2), math.pi / 2),  # half plane
    ((0, 2, 0, 2), math.pi / 4),  # quadrant
    ((2, 3, -1, 1), 0.0),  # disjoint
    ((-0.5, 0.5, -0.5, 0.5), 1.0),  # rectangle inside the disk
])
def test_disk_rect_area_exact_cases(rect, expected):
    assert disk_rect_area(0.0, 0.0, 1.0, *rect) == pytest.approx(expected, abs=1e-14)


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.1, 2.0), st.floats(0.1, 2.0))
def test_disk_rect_area_additive(x0, y0, w, h):
    # splitting the rectangle at its midline conserves area
    whole = disk_rect_area(0.0, 0.0, 1.0, x0, x0 + w, y0, y0 + h)
    xm = x0 + w / 2
    halves = disk_rect_area(0.0, 0.0, 1.0, x0, xm, y0, y0 + h) + disk_rect_area(0.0, 0.0, 1.0, xm, x0 + w, y0, y0 + h)
    assert whole == pytest.approx(halves, abs=1e-12)


@given(D_NM)
def test_union_equals_disk_sum_while_disjoint(d_nm):
    rd = G1.r + d_nm * 1e-9
    if rd < 0.5 * G1.a:
        assert _union_area_exact(G1, rd) == pytest.approx(_disks_area(G1, rd), rel=1e-11)


def test_continuous_across_regime_boundary():
    d_b = 0.5 * G1.a - G1.r
    below, above = area_fraction(G1, d_b * (1 - 1e-12)), area_fraction(G1, d_b * (1 + 1e-12))
    assert abs(below - above) < 1e-9


@given(D_NM, D_NM)
def test_monotone_non_increasing(d1, d2):
    lo, hi = sorted((d1, d2))
    assert area_fraction(G1, hi * 1e-9) <= area_fraction(G1, lo * 1e-9) + 1e-12


@given(st.floats(0.2, 5.0), D_NM)
def test_scale_invariance(s, d_nm):
    for g in PRESETS.values():
        assert area_fraction(g.scaled(s), s * d_nm * 1e-9) == pytest.approx(area_fraction(g, d_nm * 1e-9), abs=1e-10)


@given(st.floats(0.02, 0.98))
def test_inverse_round_trip(f):
    for g in PRESETS.values():
        d = solve_distance(g, f)
        assert area_fraction(g, d) == pytest.approx(f, abs=1e-9)
        # the inverse is tight in distance too
        assert abs(solve_distance(g, area_fraction(g, d)) - d) < 0.1e-9


def test_endpoints():
    assert area_fraction(G1, 0.0) == 1.0
    assert area_fraction(G1, 1e-6) == 0.0
    assert solve_distance(G1, 1.0) == 0.0
    with pytest.raises(ValueError):
        area_fraction(G1, -1e-9)
    with pytest.raises(ValueError):
        solve_distance(G1, 0.0)


def test_unreachable_below_floor():
    d_max = 20e-9
    floor = area_fraction(G1, d_max)
    with pytest.raises(Unreachable):
        solve_distance(G1, 0.5 * floor, d_max=d_max)
    assert solve_distance(G1, floor, d_max=d_max) == d_max


def test_reference_fraction_at_43_nm():
    # golden value of the exact area, cross-checked by Monte Carlo below
    assert area_fraction(G1, 43e-9) == pytest.approx(0.72874, abs=2e-5)


@pytest.mark.parametrize("d_nm", [5.0, 43.0, 60.0, 100.0])
def test_monte_carlo_agrees(d_nm):
    f = area_fraction(G1, d_nm * 1e-9)
    mc, sig = monte_carlo_fraction(G1, d_nm * 1e-9, 200_000, seed=int(d_nm))
    assert abs(mc - f) < 4 * sig


def test_monte_carlo_is_worker_independent():
    a = monte_carlo_fraction(G1, 43e-9, 100_000, seed=3)
    b = monte_carlo_fraction(G1, 43e-9, 100_000, seed=3, workers=3)
    assert a == b


def test_monte_carlo_needs_samples():
    with pytest.raises(ValueError):
        monte_carlo_fraction(G1, 43e-9, 100)


def test_presets_solve_in_range():
    for g in PRESETS.values():
        assert 25e-9 <= solve_distance(g, 51 / 79) <= 60e-9


@pytest.mark.parametrize("kwargs", [
    {"r": 0.0}, {"r": 130e-9}, {"rows_per_side": 0}, {"halfwidth": -1e-9},
])
def test_geometry_validation(kwargs):
    with pytest.raises(ValueError):
        PcwGeometry(**kwargs)


def test_spec_file_round_trip(tmp_path):
    g = PcwGeometry(a=250e-9, r=65e-9, rows_per_side=2, halfwidth=300e-9)
    write_geometry_spec(g, tmp_path / "g.txt")
    assert read_geometry_spec(tmp_path / "g.txt") == g


@pytest.mark.parametrize("text", ["a_nm = 248\nradius = 70\n", "a_nm = abc\n", "r_nm = 200\n"])
def test_spec_file_errors(tmp_path, text):
    p = tmp_path / "g.txt"
    p.write_text(text)
    with pytest.raises(ValidationError):
        read_geometry_spec(p)
    with pytest.raises(ValidationError):
        read_geometry_spec(tmp_path / "missing.txt")


def test_purcell_envelope():
    p = PurcellEnvelope()
    lam = np.linspace(944e-9, 950.19e-9, 200)
    env = purcell_envelope(p, lam)
    assert np.all(np.diff(env) >= 0)
    assert env.max() == pytest.approx(p.gamma_hom * p.cap)
    with pytest.raises(ValueError):
        purcell_envelope(p, 951e-9)
