import json
import math
import warnings

import numpy as np
import pytest

from radcomp.comparison import (BatchConfig, Certificate, Order, Status, Tolerances, TriangleReport,
                                check_alexandrov_convexity, check_angle_comparison, check_positional_relation,
                                comparison_triangle, cut_point_certificate, delta_stabilized_run, halton_points,
                                perimeter_diameter_audit, reference_angle_monotonicity, verify_batch,
                                verify_triangle)
from radcomp.errors import InputError, PerimeterViolation
from radcomp.manifolds import TestManifold
from radcomp.profile import flat, oblate, solve_profile, sphere, von_mangoldt
from radcomp.reference import reference_curve
from radcomp.surface import Surface, SurfacePoint

ACOS = math.acos(math.sqrt(2) - 1)
O = (0.0, 0.0)


@pytest.fixture(scope="module")
def sphere4():
    return TestManifold("revolution", profile=sphere(0.5))


@pytest.fixture(scope="module")
def vm_plus():
    ref = von_mangoldt()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prof = solve_profile(lambda r: np.asarray(ref.K(r), float) + 0.2, r_stop=16.0)
    return TestManifold("revolution", profile=prof), ref


def run_triangle(m, surface, p, q, choice="L", n=65):
    tol = Tolerances().resolved(m)
    sides = (m.dist_o(p), m.dist_o(q), m.distance(p, q))
    seg = m.segment(p, q, n)
    tri = comparison_triangle(sides, surface, choice, n)
    rep = TriangleReport(0, q, sides)
    check_alexandrov_convexity(m, seg, tri, rep, tol.tau_cmp)
    check_angle_comparison(m, O, p, q, seg, tri, rep, tol.tau_ang, n)
    fwd = reference_curve(m, seg, surface, "forward", tri.p_tilde)
    rev = reference_curve(m, seg, surface, "reverse", tri.p_tilde)
    rep.positional = check_positional_relation(fwd, rev, tri.pair, tri.segment, tol.tau_order)
    return rep, tri, fwd


# ---------------------------------------------------------- construction

def test_triangle_examples(flat_surface, sphere_surface):
    tri = comparison_triangle((1.0, 1.0, math.sqrt(3)), flat_surface)
    assert tri.q_tilde.r == pytest.approx(1.0) and tri.q_tilde.theta == pytest.approx(2 * math.pi / 3, abs=1e-9)
    tri = comparison_triangle((math.pi / 4,) * 3, sphere_surface)
    assert abs(tri.q_tilde.theta - ACOS) <= 1e-9
    tri = comparison_triangle((1.0, 1.0, 0.0), sphere_surface)
    assert tri.q_tilde == tri.p_tilde and tri.segment is None


def test_triangle_errors(sphere_surface):
    with pytest.raises(InputError):
        comparison_triangle((1.0, 1.0, 3.0), sphere_surface)
    with pytest.raises(InputError):
        comparison_triangle((1.0, 1.0, 1.0), sphere_surface, choice="X")
    with pytest.raises(PerimeterViolation):
        comparison_triangle((2.5, 2.5, 2.0), sphere_surface)


def test_comparison_angles_flat(flat_surface):
    tri = comparison_triangle((3.0, 4.0, 5.0), flat_surface)
    a_o, a_p, a_q = tri.angles
    assert a_o == pytest.approx(math.pi / 2, abs=1e-9)
    assert a_p == pytest.approx(math.atan2(4, 3), abs=1e-8)
    assert a_q == pytest.approx(math.atan2(3, 4), abs=1e-8)


# ----------------------------------------------------------- convexity

def test_identity_equalities(sphere_surface):
    m = TestManifold("revolution", profile=sphere())
    rep, tri, _ = run_triangle(m, sphere_surface, (1.0, 0.0), (1.4, 2.1))
    assert np.max(np.abs(rep.convexity_gaps)) <= 1e-6
    assert np.max(np.abs(np.subtract(rep.angles_M, rep.angles_ref))) <= 1e-6
    assert rep.positional["T_vs_chosen"] == Order.EQ.value


def test_sphere4_equilateral(sphere4, sphere_surface):
    rep, tri, _ = run_triangle(sphere4, sphere_surface, (math.pi / 4, 0.0), (math.pi / 4, math.pi / 2))
    g = np.array(rep.convexity_gaps)
    assert g.min() >= -1e-6
    assert np.all(g[1:-1] > 0)
    assert rep.angles_M[0] == pytest.approx(math.pi / 2, abs=1e-9)
    assert rep.angles_ref[0] == pytest.approx(ACOS, abs=1e-9)
    assert all(a >= b - 1e-6 for a, b in zip(rep.angles_M, rep.angles_ref))
    assert rep.positional["T_vs_chosen"] == Order.GE.value
    assert rep.positional["equivalence_consistent"]


def test_cylinder_locally_isometric(flat_surface):
    m = TestManifold("flat_cylinder", radius=1.0, x_range=(-4, 4))
    rep, _, _ = run_triangle(m, flat_surface, (1.0, 0.3), (-0.5, 1.2))
    assert np.max(np.abs(rep.convexity_gaps)) <= 2e-6
    assert np.max(np.abs(np.subtract(rep.angles_M, rep.angles_ref))) <= 1e-6


def test_flat_345(flat_surface):
    m = TestManifold("revolution", profile=flat())
    rep, _, _ = run_triangle(m, flat_surface, (3.0, 0.0), (4.0, math.pi / 2))
    assert rep.angles_M[0] == pytest.approx(math.pi / 2, abs=1e-9)
    assert np.allclose(rep.angles_M, rep.angles_ref, atol=1e-6)


def test_positional_von_mangoldt(vm_plus):
    m, ref = vm_plus
    surface = Surface(ref)
    cfg = BatchConfig(m, ref, O, (1.0, 0.0), n_triangles=50, seed=3, r_range=(0.0, 4.0), n_samples=33,
                      angle_monotone_nodes=0)
    for i, q in enumerate(halton_points(cfg, cfg.n_triangles)):
        rep = verify_triangle(cfg, surface, q, i)
        assert rep.status == Status.PASS.value, rep.checks
        assert rep.positional["T_vs_chosen"] in (Order.GE.value, Order.EQ.value)
        assert rep.positional["equivalence_consistent"]
        assert rep.checks["chain_implied"]


# ---------------------------------------------------------- certificates

def _certificates(m, surface, p, q, limit=4):
    sides = (m.dist_o(p), m.dist_o(q), m.distance(p, q))
    tri = comparison_triangle(sides, surface)
    out = []
    for seg in m.min_segments(p, q, 65)[:limit]:
        fwd = reference_curve(m, seg, surface, "forward", tri.p_tilde)
        out.append(cut_point_certificate(fwd, tri.pair, m, p, q))
    return out


def test_certificate_no_claim(sphere_surface):
    m = TestManifold("revolution", profile=sphere())
    (c,) = _certificates(m, sphere_surface, (1.0, 0.0), (1.3, 2.0))
    assert c.status is Certificate.NO_CLAIM


def test_certificate_cut_point_identity():
    # on M = reference the lower segment is its own reference curve, which is not above U
    m = TestManifold("revolution", profile=oblate(0.3))
    q = (2.2415926629802567, 1.7703831206296627)  # interior cut point of (0.9, 0)
    certs = _certificates(m, m.surface, (0.9, 0.0), q)
    st = sorted(c.status.value for c in certs)
    assert st == [Certificate.CERTIFIED_CUT.value, Certificate.NO_CLAIM.value]
    cut = [c for c in certs if c.status is Certificate.CERTIFIED_CUT][0]
    assert cut.validated and cut.n_segments == 2


def test_certificate_antipode_identity(sphere_surface):
    m = TestManifold("revolution", profile=sphere())
    certs = _certificates(m, sphere_surface, (1.0, 0.0), (math.pi - 1.0, math.pi), limit=2)
    assert all(c.status is Certificate.CERTIFIED_CUT and c.conjugate for c in certs)


def test_certificate_silent_under_toponogov(flat_surface, sphere4, sphere_surface):
    # with the hypotheses holding and U = L unique, every segment has T~ >= U
    cyl = TestManifold("flat_cylinder", base_o=(0.0, 2.5), radius=1.0, x_range=(-4, 4))
    for c in _certificates(cyl, flat_surface, (1.0, 0.0), (1.0, math.pi)):
        assert c.status is Certificate.NO_CLAIM
    for c in _certificates(sphere4, sphere_surface, (0.6, 0.0), (math.pi / 2 - 0.6, math.pi)):
        assert c.status is Certificate.NO_CLAIM


# ---------------------------------------------------------------- audits

def test_audit_sphere4(sphere4):
    a = perimeter_diameter_audit(sphere4, sphere(), 2000, seed=1)
    assert a.passed
    assert a.max_perimeter <= 2 * math.pi + 1e-6
    assert a.max_distance == pytest.approx(math.pi / 2, abs=1e-6)
    assert not a.maximal_diameter


def test_audit_sphere_equality():
    a = perimeter_diameter_audit(TestManifold("revolution", profile=sphere()), sphere(), 500)
    assert a.passed and a.maximal_diameter
    assert abs(a.diameter_ratio - 1) <= 1e-6


def test_audit_flat_reference(sphere4):
    a = perimeter_diameter_audit(sphere4, flat(), 200)
    assert a.passed and a.perimeter_ratio == 0.0
    json.dumps(a.to_dict())


def test_o_angle_monotone(sphere4, sphere_surface):
    assert reference_angle_monotonicity(sphere4, sphere_surface, O, (0.6, 0.0), (1.0, 2.0)) <= 1e-6


# ----------------------------------------------------------------- batch

def test_halton_rejects_degenerate(sphere4):
    cfg = BatchConfig(sphere4, sphere(), O, (0.6, 0.0), n_triangles=64, seed=0)
    qs = halton_points(cfg, 64)
    assert len(qs) == 64
    for q in qs:
        s = sorted((0.6, sphere4.dist_o(q), sphere4.distance((0.6, 0.0), q)))
        assert s[0] >= 1e-3 and s[0] + s[1] - s[2] >= 1e-3
    assert np.array_equal(qs, halton_points(cfg, 64))


def test_batch_determinism_and_equality(tmp_path):
    m = TestManifold("revolution", profile=sphere())
    cfg = BatchConfig(m, sphere(), O, (1.0, 0.0), n_triangles=6, seed=2, n_samples=17, angle_monotone_nodes=9)
    a = verify_batch(cfg, {"name": "eq"})
    b = verify_batch(cfg, {"name": "eq"})
    assert a.to_json() == b.to_json()
    assert a.all_pass and a.violations == 0
    for t in a.triangles:
        # equality of gaps comes with equality of angles
        assert t.flags["equality_detected"]
        assert np.max(np.abs(np.subtract(t.angles_M, t.angles_ref))) <= 1e-6
        assert t.checks["o_angle_increase"] <= 1e-6
    d = json.loads(a.to_json())
    assert d["aggregate"]["counts"] == {"PASS": 6} and len(d["scenario_hash"]) == 64
    a.to_csv(str(tmp_path / "s.csv"))
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 7


def test_counterexample_status():
    cyl = TestManifold("flat_cylinder", radius=0.41, x_range=(-3, 3))
    cfg = BatchConfig(cyl, oblate(0.1), O, (-1.0, 0.0), n_triangles=4, seed=0, n_samples=17,
                      r_range=(-3, 3), hypothesis_ok=False, positional=False)
    rep = verify_batch(cfg)
    assert all(t.status in (Status.PASS.value, Status.COUNTEREXAMPLE_EXPECTED.value,
                            Status.PERIMETER_VIOLATION.value) for t in rep.triangles)
    assert Status.FAIL.value not in rep.counts


# ----------------------------------------------------------------- delta

def test_delta_zero_is_baseline(sphere4):
    cfg = BatchConfig(sphere4, sphere(), O, (0.6, 0.0), n_triangles=4, seed=0, n_samples=17)
    run = delta_stabilized_run(cfg, [0.0])
    surface = Surface(sphere())
    base = [verify_triangle(cfg, surface, q, i).convexity_gaps for i, q in enumerate(halton_points(cfg, 4))]
    assert run.deltas == [0.0]
    assert np.allclose(run.gaps[0], np.array(base), atol=1e-12)
    with pytest.raises(InputError):
        delta_stabilized_run(cfg, [-0.1])


def test_delta_flat_reference_gaps_increase(sphere4):
    cfg = BatchConfig(sphere4, flat(r_max=8.0), O, (0.6, 0.0), n_triangles=6, seed=1, n_samples=17)
    run = delta_stabilized_run(cfg, [0.1, 0.01])
    # deltas run 0.1, 0.01, 0: a more negative reference curvature only raises the gaps
    for hi, lo in zip(run.gaps, run.gaps[1:]):
        assert np.nanmin(hi - lo) >= -1e-9
