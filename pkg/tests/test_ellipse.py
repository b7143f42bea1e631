import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from radcomp.ellipse import (ball_contains, build_ellipse, ellipse_point, focal_sum, level_distance_monotone,
                             phi_grid, star_shaped_check, tangency_check)
from radcomp.errors import InputError
from radcomp.surface import SurfacePoint


def conic(a, c, phi):
    return (a * a - c * c) / (2 * (a - c * np.cos(phi)))


def test_flat_point(flat_surface):
    x = ellipse_point(flat_surface, SurfacePoint(1.0, 0.0), 3.0, 0.0)
    assert abs(x.r - 2.0) <= 1e-8


@pytest.mark.parametrize("name,p", [("flat", (1.0, 0.4)), ("sphere", (1.0, -0.3)), ("vm", (1.5, 2.0))])
def test_max_on_p_meridian(name, p, request):
    s = request.getfixturevalue({"flat": "flat_surface", "sphere": "sphere_surface", "vm": "vm_surface"}[name])
    pt = SurfacePoint(*p)
    a = pt.r + 0.9
    x = ellipse_point(s, pt, a, pt.theta)
    assert abs(x.r - 0.5 * (a + pt.r)) <= 1e-8


def test_sphere_point_two_ways(sphere_surface):
    p = SurfacePoint(math.pi / 2, 0.0)
    x = ellipse_point(sphere_surface, p, math.pi, math.pi / 2)
    rs = np.linspace(0.0, math.pi, 20001)
    g = np.array([r + sphere_surface.dist(p, SurfacePoint(r, math.pi / 2)) for r in rs])
    # g is monotone, so the dense sample brackets the root
    k = int(np.searchsorted(g, math.pi))
    r_dense = rs[k - 1] + (math.pi - g[k - 1]) * (rs[k] - rs[k - 1]) / (g[k] - g[k - 1])
    assert abs(x.r - r_dense) <= 1e-8


def test_sum_out_of_range(sphere_surface, flat_surface):
    p = SurfacePoint(1.0, 0.0)
    with pytest.raises(InputError):
        ellipse_point(sphere_surface, p, 0.9, 0.0)
    with pytest.raises(InputError):
        ellipse_point(sphere_surface, p, 2 * math.pi - 0.9, 0.0)
    with pytest.raises(InputError):
        ellipse_point(flat_surface, p, 1.0, 0.0)


def test_flat_conic(flat_surface):
    e = build_ellipse(flat_surface, SurfacePoint(1.0, 0.0), 3.0, n_phi=65)
    assert np.max(np.abs(e.r - conic(3.0, 1.0, e.phi))) <= 1e-7


@pytest.mark.parametrize("name", ["flat", "sphere", "vm"])
def test_invariants(name, request):
    s = request.getfixturevalue({"flat": "flat_surface", "sphere": "sphere_surface", "vm": "vm_surface"}[name])
    p = SurfacePoint(1.0, 0.5)
    e = build_ellipse(s, p, 2.4, n_phi=65)
    c = e.checks
    assert c["max_residual"] <= 1e-6
    assert c["symmetry"] <= 1e-8
    assert c["monotone_violation"] <= 1e-9
    assert c["max_r_error"] <= 1e-6
    assert abs(c["argmax_phi"]) <= 1e-12
    assert abs(c["argmin_phi"] - math.pi) <= 1e-12
    assert level_distance_monotone(e, 10) <= 1e-9
    t = tangency_check(e, 61)
    assert abs(t["sum_error"]) <= 1e-6 and t["theta_offset"] <= 1e-9


def test_degenerate_sum(flat_surface):
    c = 1.0
    a = c + 2e-3
    e = build_ellipse(flat_surface, SurfacePoint(c, 0.0), a, n_phi=65)
    assert np.max(np.abs(e.r - conic(a, c, e.phi))) <= 1e-7
    assert np.max(e.r) == pytest.approx(0.5 * (a + c), abs=1e-9)
    # hugs the segment from o to p: the half width is the minor semi-axis
    half = math.sqrt(a * a - c * c) / 2
    assert np.max(e.r * np.abs(np.sin(e.phi))) <= half + 1e-9
    x = e.r * np.cos(e.phi)
    assert np.min(x) >= -(a - c) / 2 - 1e-9 and np.max(x) <= c + (a - c) / 2 + 1e-9


def test_ball_contains(sphere_surface):
    p = SurfacePoint(1.0, 0.0)
    e = build_ellipse(sphere_surface, p, 2.0, n_phi=33)
    assert ball_contains(e, p)
    assert not ball_contains(e, SurfacePoint(2.0, 1.0))
    x = e.points()[7]
    assert ball_contains(e, x)
    assert abs(focal_sum(e, x) - 2.0) <= 1e-8


@pytest.mark.parametrize("name", ["flat", "sphere", "vm"])
def test_star_shaped(name, request):
    s = request.getfixturevalue({"flat": "flat_surface", "sphere": "sphere_surface", "vm": "vm_surface"}[name])
    e = build_ellipse(s, SurfacePoint(0.8, 0.0), 2.2, n_phi=65)
    rep = star_shaped_check(e, 16)
    assert rep.ok and rep.n_boundary == 16


def test_phi_grid():
    g = phi_grid(0.3, 65)
    assert len(g) == 65 and np.all(np.diff(g) > 0)
    assert g[0] == pytest.approx(0.3 - math.pi) and g[-1] == pytest.approx(0.3 + math.pi)
    assert g[32] == pytest.approx(0.3)
    assert np.allclose(g - 0.3, -(g[::-1] - 0.3))


@given(st.floats(0.2, 2.0), st.floats(0.05, 2.0), st.floats(-math.pi, math.pi))
def test_flat_point_matches_conic(c, extra, phi):
    from radcomp.profile import flat
    from radcomp.surface import Surface
    s = _F.setdefault("s", Surface(flat()))
    a = c + extra
    x = ellipse_point(s, SurfacePoint(c, 0.0), a, phi)
    assert abs(x.r - conic(a, c, phi)) <= 1e-7


_F = {}
