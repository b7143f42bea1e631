import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from radcomp.errors import DomainError, InputError
from radcomp.profile import (constant_curvature, flat, from_warping, gauss_curvature, perturb_profile,
                             profile_from_config, solve_profile, sphere, von_mangoldt)

R05 = np.linspace(0.0, 5.0, 201)


def test_sphere_from_curvature():
    p = solve_profile(lambda r: np.ones_like(np.asarray(r, float)), r_stop=4.0)
    assert p.closed
    assert abs(p.ell - math.pi) <= 1e-8
    r = np.linspace(0, p.ell, 301)
    assert np.max(np.abs(p.f_interp(r) - np.sin(r))) <= 1e-8
    assert abs(p.fp_nodes[-1] + 1.0) <= 1e-6


@pytest.mark.parametrize("kappa,ref", [(0.0, lambda r: r), (-1.0, np.sinh)])
def test_open_profiles(kappa, ref):
    p = solve_profile(lambda r, k=kappa: k * np.ones_like(np.asarray(r, float)), r_stop=6.0)
    assert not p.closed
    assert p.ell == 6.0
    assert np.max(np.abs(p.f_interp(R05) - ref(R05)) / np.maximum(1, np.abs(ref(R05)))) <= 1e-8


def test_closed_form_constructors():
    assert abs(sphere().ell - math.pi) < 1e-14
    assert abs(sphere(0.5).ell - 0.5 * math.pi) < 1e-14
    assert not flat().closed
    h = constant_curvature(-1.0, r_max=5.0)
    assert np.max(np.abs(h.f_interp(R05) - np.sinh(R05))) <= 1e-8


def test_vertex_data():
    for p in (sphere(), flat(), von_mangoldt()):
        assert abs(p.f_interp(0.0)) < 1e-12
        assert abs(p.fp_interp(0.0) - 1.0) < 1e-9


@pytest.mark.parametrize("prof", [sphere(), von_mangoldt(), constant_curvature(-1.0, r_max=5.0)],
                         ids=["sphere", "von_mangoldt", "hyperbolic"])
def test_jacobi_relation_random_nodes(prof):
    rng = np.random.default_rng(1)
    r = rng.uniform(0.01, prof.ell - 0.01, 100)
    f = prof.f_interp(r)
    assert np.all(prof.jacobi_residual(r) <= 1e-6 * (1 + np.abs(f)))


def test_positive_interior():
    p = von_mangoldt()
    assert np.all(p.f_nodes[1:] > 0)


def test_perturb_identity_and_closed_forms():
    s = sphere()
    assert perturb_profile(s, 0.0) is s
    p = perturb_profile(s, 1.0)
    r = np.linspace(0, 3, 50)
    assert np.max(np.abs(p.f_interp(r) - r)) <= 1e-8
    q = perturb_profile(flat(8.0), 0.25)
    assert np.max(np.abs(q.f_interp(r) - 2 * np.sinh(r / 2))) <= 1e-8


@pytest.mark.parametrize("delta", [1e-3, 1e-2, 1e-1])
def test_perturbed_profile_dominates(delta):
    s = sphere()
    p = perturb_profile(s, delta)
    r = s.sample_grid[1:-1]
    assert np.all(p.f_interp(r) >= s.f_interp(r) - 1e-12)


def test_perturb_negative_delta():
    with pytest.raises(InputError):
        perturb_profile(sphere(), -0.1)


def test_gauss_curvature_examples():
    assert gauss_curvature(sphere(), 1.0) == pytest.approx(1.0)
    assert gauss_curvature(flat(), 2.0) == pytest.approx(0.0)
    p = solve_profile(lambda r: 1.0 / (1.0 + np.asarray(r, float) ** 2), r_stop=6.0)
    assert gauss_curvature(p, 1.0) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        gauss_curvature(sphere(), 4.0)


def test_deterministic():
    K = lambda r: 1.0 / (1.0 + np.asarray(r, float) ** 2) ** 2  # noqa: E731
    a, b = solve_profile(K), solve_profile(K)
    assert np.array_equal(a.f_nodes, b.f_nodes) and np.array_equal(a.fp_nodes, b.fp_nodes)


def test_bad_inputs():
    with pytest.raises(InputError):
        solve_profile(lambda r: np.full_like(np.asarray(r, float), np.nan))
    with pytest.raises(InputError):
        solve_profile(lambda r: r, tol=0.0)


def test_config_forms():
    s = profile_from_config({"kind": "constant", "curvature": 1.0})
    assert abs(s.ell - math.pi) < 1e-12
    t = profile_from_config({"kind": "curvature", "table": [[0, 1], [2, 1], [4, 1]], "r_max": 4})
    assert abs(t.ell - math.pi) < 1e-8
    w = profile_from_config({"kind": "warping", "expression": "sin(r)", "derivative": "cos(r)",
                             "ell": math.pi})
    assert w.closed
    with pytest.raises(InputError):
        profile_from_config({"kind": "curvature", "table": [[0, 1], [0, 2]]})
    with pytest.raises(InputError):
        profile_from_config({"kind": "curvature", "expression": "__import__('os')"})
    with pytest.raises(InputError):
        profile_from_config({"kind": "nope"})


def test_cone_point_warns():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        profile_from_config({"kind": "curvature", "expression": "1/(1+r**2)**2", "shift": 0.2})
    assert any("cone point" in str(w.message) for w in rec)


def test_from_warping_derives_curvature():
    p = from_warping(np.sin, np.cos, ell=math.pi)
    assert gauss_curvature(p, 1.0) == pytest.approx(1.0, abs=1e-5)


@given(st.floats(0.1, 3.0))
def test_sphere_f_matches_sine(r):
    assert abs(float(sphere().f_interp(r)) - math.sin(r)) <= 1e-8
