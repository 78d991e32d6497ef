import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardycone import geometry as geo
from hardycone import verifier as vf
from hardycone.bounds import AgmonParams, lambda_a
from hardycone.cone_profile import BoundaryCone, solve_lambda
from hardycone.errors import GeometryError, NormalizationError, OutsideDomainError
from hardycone.estimator import GridField
from hardycone.params import ProblemParams


def delta_field(dd):
    return GridField(dd, np.where(dd.inside, dd.delta, 0.0))


# agmon_composite

@settings(max_examples=50)
@given(c=st.floats(1e-6, 0.5), nu=st.floats(0.05, 0.9), gap=st.floats(0.01, 1.0))
def test_composite_constant_field(c, nu, gap):
    dd = geo.build_grid(geo.unit_square(), 1 / 4)
    U = GridField(dd, np.full(dd.shape, c))
    w = vf.agmon_composite(U, nu, nu + gap)
    v = w.values[dd.inside]
    np.testing.assert_allclose(v, c ** nu - c ** (nu + gap), rtol=1e-14)
    assert np.all(v > 0)


def test_composite_rejects_bad_input():
    dd = geo.build_grid(geo.unit_square(), 1 / 4)
    with pytest.raises(ValueError):
        vf.agmon_composite(GridField(dd, np.full(dd.shape, 0.3)), 0.5, 0.5)
    with pytest.raises(NormalizationError):
        vf.agmon_composite(GridField(dd, np.full(dd.shape, 0.8)), 0.5, 0.9)
    with pytest.raises(NormalizationError):
        vf.agmon_composite(GridField(dd, np.zeros(dd.shape)), 0.5, 0.9)


def test_composite_square_pipeline_positive(square_128):
    U = vf.normalize_field(delta_field(square_128))
    assert U.values.max() == pytest.approx(0.5)
    w = vf.agmon_composite(U, 0.5, 0.9)
    assert np.all(w.values[square_128.inside] > 0)


def test_agmon_cap_keeps_composite_increasing():
    nu, eta = 0.501, 0.9
    cap = vf.agmon_cap(nu, eta)
    assert cap == pytest.approx(0.5 * (nu / eta) ** (1 / (eta - nu)))
    t = np.linspace(1e-6, cap, 10001)
    assert np.all(np.diff(t ** nu - t ** eta) > 0)
    assert vf.agmon_cap(0.1, 0.2) < 0.5 and vf.agmon_cap(0.4, 0.41) < 0.5


# measure_lambda

@pytest.mark.parametrize("make", [geo.unit_square, geo.unit_disk])
def test_lambda_of_distance_is_one(make):
    dd = geo.build_grid(make(), 1 / 64)
    assert vf.measure_lambda(delta_field(dd)) == pytest.approx(1.0, abs=2 * dd.h)


# weak_residual

def test_residual_linear_harmonic_half_plane():
    dd = geo.build_grid(geo.half_plane(), 1 / 32)
    X, Y = dd.coords()
    u = GridField(dd, np.where(dd.inside, Y, 0.0))
    rep = vf.weak_residual(u, 0.0, 2.0, 0.0)
    assert rep.passed and rep.nodes_tested > 0
    assert rep.Lambda_measured == pytest.approx(1.0, abs=1e-12)


def test_residual_cone_harmonic_on_square(laplace_pi_profile):
    dd = geo.build_grid(geo.unit_square(), 1 / 64)
    cone = BoundaryCone([0.5, -0.5], [0.0, 1.0], math.pi)
    H, _ = vf.eval_translated(laplace_pi_profile, cone, dd.points())
    vals = np.zeros(dd.shape)
    vals[dd.inside] = H
    # the 5-point stencil is exact only for linear data; allow O(h^2) truncation
    rep = vf.weak_residual(GridField(dd, vals), 0.0, 2.0, 0.0, tol=dd.h ** 2)
    assert rep.passed


def test_residual_fails_above_sharp_constant(square_128):
    u = GridField.from_function(square_128, lambda d, X, Y: np.sqrt(d))
    rep = vf.weak_residual(u, 0.0, 2.0, 0.5)
    assert rep.min_weak_residual < 0 and not rep.passed
    assert rep.failing_nodes and rep.failing_nodes[0]["value"] == rep.min_weak_residual


def test_residual_requires_positive(square_128):
    with pytest.raises(ValueError):
        vf.weak_residual(GridField(square_128, -np.ones(square_128.shape)), 0.0, 2.0, 0.1)


@pytest.mark.parametrize("dnu", [1e-1, 1e-2, 1e-3])
def test_supersolution_threshold_passes(square_128, dnu):
    rep = vf.agmon_supersolution(square_128, 0.0, 2.0, 0.5 + dnu, 0.9)
    assert rep.passed, rep.min_weak_residual
    ap = AgmonParams(0.0, 0.5 + dnu, 0.9, 2.0)
    assert rep.mu == pytest.approx(ap.lambda_nu * rep.Lambda_measured ** 2)
    json.dumps(rep.to_dict())


def test_supersolution_fails_at_point_three(square_128):
    rep = vf.agmon_supersolution(square_128, 0.0, 2.0, 0.501, 0.9, mu=0.3)
    assert not rep.passed


def test_supersolution_mu_approaches_quarter(square_128):
    mus = [vf.agmon_supersolution(square_128, 0.0, 2.0, 0.5 + d, 0.9).mu
           for d in (1e-1, 1e-2, 1e-3)]
    assert mus[0] < mus[1] < mus[2] < 0.25


# min_construction

def test_min_construction_half_plane(halfspace_profile):
    dd = geo.build_grid(geo.half_plane(), 1 / 32)
    cones = [BoundaryCone([s, 0.0], [0.0, 1.0], math.pi / 2)
             for s in np.linspace(-1, 1, 9)]
    u, rep = vf.min_construction(dd, geo.half_plane(), math.pi / 2, halfspace_profile,
                                 epsilon=0.1, cones=cones)
    X, Y = dd.coords()
    np.testing.assert_allclose(u.values[dd.inside], Y[dd.inside], atol=1e-8)
    assert rep.essinf_ratio == pytest.approx(1.0, abs=1e-6)
    assert rep.passed


def test_min_construction_square(square_128, laplace_3pi4_profile):
    u, rep = vf.min_construction(square_128, geo.unit_square(), 3 * math.pi / 4,
                                 laplace_3pi4_profile, n_cones=64, epsilon=0.1)
    assert rep.essinf_ratio >= rep.claimed - 1e-3
    assert rep.nodes_tested > 0 and rep.n_cones == 64
    assert np.all(u.values[square_128.inside] > 0)
    json.dumps(rep.to_dict())


def test_min_construction_single_far_cone(laplace_3pi4_profile):
    dd = geo.build_grid(geo.unit_square(), 1 / 32)
    cone = BoundaryCone([0.5, -5.0], [0.0, 1.0], laplace_3pi4_profile.gamma)
    gr = vf.gradient_ratio(dd, laplace_3pi4_profile, [cone])
    r = np.linalg.norm(gr.points - cone.vertex, axis=1)
    delta = dd.delta[dd.inside]
    lower = laplace_3pi4_profile.lam * delta / r
    t = gr.tested
    assert t.any()
    assert np.all(gr.ratio[t] >= lower[t] * (1 - 1e-6))


def test_min_construction_monotone_in_gamma(square_128):
    vals = []
    for g in (3 * math.pi / 4, 0.85 * math.pi, 0.95 * math.pi):
        prof = solve_lambda(g, ProblemParams(2, 2.0))
        vals.append(vf.min_construction(square_128, geo.unit_square(), g, prof)[1].essinf_ratio)
    assert vals[0] >= vals[1] >= vals[2]


def test_min_construction_errors(laplace_3pi4_profile, halfspace_profile):
    dd = geo.build_grid(geo.unit_square(), 1 / 16)
    with pytest.raises(ValueError):
        vf.min_construction(dd, geo.unit_square(), 1.0, halfspace_profile)
    with pytest.raises(ValueError):
        vf.min_construction(dd, geo.unit_square(), 2.0, laplace_3pi4_profile)
    bad = [BoundaryCone([0.5, 0.0], [0.0, -1.0], laplace_3pi4_profile.gamma)]
    with pytest.raises(GeometryError):
        vf.min_construction(dd, geo.unit_square(), laplace_3pi4_profile.gamma,
                            laplace_3pi4_profile, cones=bad)


# projection_window

def test_window_half_plane_unit_epsilon():
    tau = vf.projection_window(geo.half_plane(), [0.0, 1.0], 1.0)
    assert tau < 1 / 3 and tau == pytest.approx(0.33)
    assert vf.check_projection_window(geo.half_plane(), [0.0, 1.0], 1.0).passed


def test_window_square_center():
    assert vf.check_projection_window(geo.unit_square(), [0.5, 0.5], 0.5).passed


def test_window_center_point_is_tight():
    spec = geo.unit_disk()
    x = np.array([0.2, 0.1])
    d, P = geo.distance(spec, x)
    assert np.linalg.norm(x - P) == pytest.approx(d, rel=1e-15)


def test_window_precondition():
    with pytest.raises(OutsideDomainError):
        vf.projection_window(geo.unit_square(), [0.5, 0.1], 0.5)
    with pytest.raises(ValueError):
        vf.window_fraction(0.0)


@settings(max_examples=40, deadline=None)
@given(eps=st.floats(0.01, 3.0))
def test_window_fraction_strict(eps):
    t = vf.window_fraction(eps)
    assert 0 < t < 1 and 2 * t / (1 - t) < eps


@pytest.mark.parametrize("make", [geo.unit_square, geo.unit_disk, geo.l_shape,
                                  lambda: geo.sector(3 * math.pi / 4)])
def test_window_random_points(make):
    spec = make()
    rng = np.random.default_rng(5)
    lo, hi = np.asarray(spec.window[0]), np.asarray(spec.window[1])
    pts = rng.uniform(lo, hi, (200, 2))
    pts = pts[spec.contains(pts)][:40]
    for x in pts:
        for eps in (0.1, 0.5, 1.0):
            assert vf.check_projection_window(spec, x, eps, samples=200,
                                              require_margin=False).passed


# appendix inequality

def test_appendix_exact_example():
    res = vf.appendix_inequality(0.0, 0.5, 0.75, 2.0)
    assert res.lhs == pytest.approx(3 / 16) and res.rhs == pytest.approx(1 / 4) and res.holds


def test_appendix_rejects():
    with pytest.raises(OutsideDomainError):
        vf.appendix_inequality(0.0, 0.6, 0.6, 2.0)
    with pytest.raises(OutsideDomainError):
        vf.appendix_inequality(0.0, 0.3, 0.6, 2.0)
    with pytest.raises(OutsideDomainError):
        vf.appendix_inequality(-1.0, 0.3, 0.6, 2.0)


def test_appendix_negative_branch():
    # a + p < 1: exponents in [(a+p-1)/p, 0]
    res = vf.appendix_inequality(-2.0, -0.15, -0.05, 2.5)
    assert res.holds


@settings(max_examples=300)
@given(p=st.floats(1.01, 30), s=st.floats(-5, 8).filter(lambda s: abs(s) > 1e-6),
       t0=st.floats(0, 1), t1=st.floats(0, 1))
def test_appendix_matches_closed_form(p, s, t0, t1):
    a = 1 - p + s
    lo, hi = vf.admissible_interval(a, p)
    nu, eta = sorted((lo + t0 * (hi - lo), lo + t1 * (hi - lo)))
    if not nu < eta:
        return
    res = vf.appendix_inequality(a, nu, eta, p)
    w = abs(nu) ** (p - 2)
    k_nu = a + (1 - nu) * (p - 1)
    gap = (p - 1) * w * (eta - nu) * (k_nu - eta)
    # rounding scale: magnitudes of the summed terms, since K(eta) may cancel
    scale = w * (abs(eta) * (abs(p - 2) * abs(k_nu) + abs(a) + abs(1 - eta) * (p - 1))
                 + (p - 1) * abs(nu) * (abs(a) + abs(1 - nu) * (p - 1)))
    assert res.lhs - res.rhs == pytest.approx(gap, abs=1e-12 * scale)
    assert res.holds or abs(gap) <= 1e-12 * scale
    if nu != 0 and eta != 0:
        direct = ((p - 2) * lambda_a(nu, a, p) * eta / nu
                  + lambda_a(eta, a, p) * abs(nu) ** (p - 2) / abs(eta) ** (p - 2))
        assert res.lhs == pytest.approx(direct, abs=1e-12 * scale)


def test_appendix_gap_negative_near_diagonal():
    a, p = 0.3, 3.0
    lo, hi = vf.admissible_interval(a, p)
    nu = 0.5 * (lo + hi)
    for d in (1e-2, 1e-4, 1e-6, 1e-8):
        res = vf.appendix_inequality(a, nu, nu + d, p)
        assert res.lhs - res.rhs < 0


def test_appendix_property_small():
    out = vf.appendix_property(5000, seed=1)
    assert out["samples"] > 4000 and out["violations"] == 0
