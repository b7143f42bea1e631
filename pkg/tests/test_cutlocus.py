import math

import numpy as np
import pytest

from radcomp.cutlocus import (Crossing, classify_crossing, cut_locus, cut_time, extremal_segments,
                              make_oracle)
from radcomp.errors import InputError
from radcomp.profile import flat, oblate, von_mangoldt
from radcomp.surface import Order, PolarCurve, Surface, SurfacePoint, reduce_angle

P_SPH = SurfacePoint(math.pi / 2, 0.0)
P_OBL = SurfacePoint(0.9, 0.0)


@pytest.fixture(scope="module")
def sphere_locus(sphere_surface):
    return cut_locus(sphere_surface, P_SPH, 64, resolution=256)


@pytest.fixture(scope="module")
def oblate_surface():
    return Surface(oblate(0.3))


@pytest.fixture(scope="module")
def oblate_locus(oblate_surface):
    return cut_locus(oblate_surface, P_OBL, 64, resolution=256)


def test_sphere_cut_time(sphere_surface):
    o = make_oracle(sphere_surface, P_SPH, 256)
    for a in (0.3, 1.5, 2.9):
        assert abs(cut_time(sphere_surface, P_SPH, a, o) - math.pi) <= 2e-2


def test_flat_cut_time_infinite():
    s = Surface(flat(r_max=8.0))
    assert math.isinf(cut_time(s, SurfacePoint(1.0, 0.0), 1.0, make_oracle(s, SurfacePoint(1.0, 0.0), 256)))


def test_sphere_locus_is_antipode(sphere_locus):
    pts = sphere_locus.points[sphere_locus.finite]
    assert len(pts) == 64
    assert np.max(np.abs(pts[:, 0] - math.pi / 2)) <= 2e-2
    assert np.max(np.abs(np.abs([reduce_angle(t) for t in pts[:, 1]]) - math.pi)) <= 2e-2
    assert np.all(sphere_locus.conjugate[sphere_locus.finite])


def test_flat_locus_empty():
    cl = cut_locus(Surface(flat(r_max=8.0)), SurfacePoint(1.0, 0.0), 64, resolution=256)
    assert cl.is_empty and not cl.edges


def test_von_mangoldt_locus_on_opposite_meridian():
    s = Surface(von_mangoldt())
    cl = cut_locus(s, SurfacePoint(1.0, 0.0), 64, resolution=512)
    pts = cl.points[cl.finite]
    assert len(pts) > 0
    assert len(cl.interior_points()) == 0
    dev = np.abs(np.abs([reduce_angle(t) for t in pts[:, 1]]) - math.pi)
    assert np.max(dev) <= 2e-2


def test_locus_invariants(oblate_surface, oblate_locus):
    cl = oblate_locus
    fin = cl.finite
    assert np.count_nonzero(cl.interior) > 20
    # cut before conjugate
    assert np.all(cl.cut_times[fin] <= cl.conjugate_times[fin] + 1e-6)
    # oracle agrees with the cut time
    o = make_oracle(oblate_surface, P_OBL, 256)
    d = o.field.values_at(cl.points[fin])
    assert np.max(np.abs(d - cl.cut_times[fin]) / cl.cut_times[fin]) <= 5e-3
    # the cut locus of a point on an oblate surface lies on the antipodal parallel
    assert np.max(np.abs(cl.interior_points()[:, 0] - (math.pi - P_OBL.r))) <= 2e-2
    assert len(cl.edges) == 1


def test_cut_time_continuity(oblate_locus):
    cl = oblate_locus
    step = cl.alphas[1] - cl.alphas[0]
    t = cl.cut_times
    both = np.isfinite(t[:-1]) & np.isfinite(t[1:])
    branch = cl.multiplicity[:-1] != cl.multiplicity[1:]
    jumps = np.abs(np.diff(t))[both & ~branch]
    assert np.all(jumps < 10 * step * math.pi)


def test_locus_csv(oblate_locus, tmp_path):
    path = tmp_path / "cut.csv"
    oblate_locus.to_csv(str(path))
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (64, 6)


def test_cut_locus_rejects(sphere_surface):
    with pytest.raises(InputError):
        cut_locus(sphere_surface, P_SPH, 32)
    with pytest.raises(InputError):
        cut_locus(sphere_surface, SurfacePoint(0.0, 0.0), 64)


# ------------------------------------------------------------ extremal pair

def test_extremal_flat_unique():
    s = Surface(flat())
    ep = extremal_segments(s, SurfacePoint(1.0, 0.0), SurfacePoint(2.0, 1.0))
    assert ep.unique and ep.upper is ep.lower
    assert ep.order() is Order.EQ


def test_extremal_sphere_antipode(sphere_surface):
    ep = extremal_segments(sphere_surface, P_SPH, SurfacePoint(math.pi / 2, math.pi))
    mid_u = ep.upper.trace[len(ep.upper.trace) // 2]
    mid_l = ep.lower.trace[len(ep.lower.trace) // 2]
    assert abs(mid_u[1] - math.pi) <= 2e-2  # through the far vertex
    assert abs(mid_l[1]) <= 2e-2  # through o
    with pytest.raises(InputError):
        extremal_segments(sphere_surface, P_SPH, SurfacePoint(0.0, 0.0))


def test_extremal_von_mangoldt_on_cut_locus():
    s = Surface(von_mangoldt())
    p = SurfacePoint(1.0, 0.0)
    q = SurfacePoint(9.0, math.pi)
    d = s.dist(p, q)
    ep = extremal_segments(s, p, q)
    assert not ep.unique
    # mirror images: same unsigned angle, opposite sides of the meridian of p
    assert abs(ep.upper.signed_angle - ep.lower.signed_angle) > 1e-3
    assert abs(ep.upper.length - d) <= 1e-6 and abs(ep.lower.length - d) <= 1e-6


def _inner_cut_points(cl, n, seed):
    pts = cl.interior_points()
    keep = pts[(pts[:, 1] > 1.75) & (pts[:, 1] < 2.95)]
    rng = np.random.default_rng(seed)
    return keep[rng.choice(len(keep), size=min(n, len(keep)), replace=False)]


def test_ellipse_limits_match_alpha_extremes(oblate_surface, oblate_locus):
    for r, th in _inner_cut_points(oblate_locus, 20, 0):
        q = SurfacePoint(r, th)
        ep = extremal_segments(oblate_surface, P_OBL, q)
        al = [g.initial_angle for g in oblate_surface.distance(P_OBL, q).paths]
        assert abs(ep.upper.initial_angle - max(al)) <= 2e-2
        assert abs(ep.lower.initial_angle - min(al)) <= 2e-2
        assert ep.order() in (Order.LE, Order.EQ)


def test_upper_extension_crosses_positively(oblate_surface, oblate_locus):
    for r, th in _inner_cut_points(oblate_locus, 5, 1):
        q = SurfacePoint(r, th)
        ep = extremal_segments(oblate_surface, P_OBL, q)
        ext = oblate_surface.shoot(P_OBL, ep.upper.initial_angle, ep.upper.length + 0.2)
        assert classify_crossing(ext.polar_curve(), oblate_locus, q) is Crossing.POSITIVE
        ext = oblate_surface.shoot(P_OBL, ep.lower.initial_angle, ep.lower.length + 0.2)
        assert classify_crossing(ext.polar_curve(), oblate_locus, q) is Crossing.NEGATIVE


def test_classify_crossing_synthetic(oblate_locus):
    edge = oblate_locus.edges[0]
    x_th = 2.2
    x = SurfacePoint(float(edge(x_th)), x_th)
    th = np.linspace(1.9, 2.5, 61)
    above = PolarCurve(th, edge(th) + (x_th - th))
    below = PolarCurve(th, edge(th) - (x_th - th))
    assert classify_crossing(above, oblate_locus, x) is Crossing.POSITIVE
    assert classify_crossing(below, oblate_locus, x) is Crossing.NEGATIVE
    assert classify_crossing(PolarCurve(th, edge(th)), oblate_locus, x) is Crossing.TANGENTIAL
    with pytest.raises(InputError):
        classify_crossing(above, oblate_locus, SurfacePoint(0.5, 2.2))
