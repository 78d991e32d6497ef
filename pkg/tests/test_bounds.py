import json
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from hypothesis import given, settings, strategies as st

from hardycone import bounds as bd
from hardycone.cone_profile import solve_lambda
from hardycone.errors import ApertureOrderError, EigenvalueVanishesError
from hardycone.params import ProblemParams


def P(N, p, alpha=0.0):
    return ProblemParams(N, p, alpha)


def laplace_g(gamma, beta):
    # closed-form N=p=2 objective: lam = pi/(2 gamma), Phi = cos(lam theta)
    lam = math.pi / (2 * gamma)
    return lam * math.cos(lam * beta) ** (1 / lam)


# mu_easy

def test_mu_easy_examples():
    assert bd.mu_easy(1.0, P(2, 2.0)).value == pytest.approx(0.25)
    assert bd.mu_easy(1.0, P(2, 3.0, -1.0)).value == pytest.approx(1 / 27)
    rep = bd.mu_easy(1.0, P(2, 2.0, 1.0))
    assert not rep.valid and rep.value is None


def test_mu_easy_precondition():
    with pytest.raises(ValueError):
        bd.mu_easy(0.0, P(2, 2.0))


def test_large_p_does_not_overflow():
    rep = bd.mu_easy(1.0, P(2, 50.0))
    assert rep.valid and rep.value == pytest.approx((49 / 50) ** 50, rel=1e-12)
    rep = bd.mu_easy(40.0, P(2, 50.0))
    assert math.isfinite(rep.value) and rep.value > 1e50


def test_report_rejects_inconsistent_state():
    with pytest.raises(ValueError):
        bd.LowerBoundReport("easy", False, P(2, 2.0), 0.1)
    with pytest.raises(ValueError):
        bd.LowerBoundReport("easy", True, P(2, 2.0), None)
    with pytest.raises(ValueError):
        bd.LowerBoundReport("easy", True, P(2, 2.0), -1.0)


def test_report_serialization_fields():
    d = bd.mu_easy(1.0, P(2, 2.0)).to_dict()
    assert set(d) >= {"method", "value", "valid", "params", "details"}
    assert set(d["details"]) >= {"gamma_star", "lambda", "phi_beta"}
    assert d["params"] == {"N": 2, "p": 2.0, "alpha": 0.0}
    json.dumps(d)


# mu_cone

@pytest.mark.parametrize("beta", [math.pi / 4, math.pi / 2, 3 * math.pi / 4])
def test_mu_cone_full_plane_formula(laplace_pi_profile, beta):
    rep = bd.mu_cone(beta, laplace_pi_profile, P(2, 2.0))
    assert rep.value == pytest.approx(math.cos(beta / 2) ** 4 / 16, rel=1e-6)


def test_mu_cone_one_sixty_fourth(laplace_pi_profile):
    assert bd.mu_cone(math.pi / 2, laplace_pi_profile, P(2, 2.0)).value == pytest.approx(
        1 / 64, rel=1e-8)


def test_mu_cone_small_beta_limit(laplace_3pi4_profile):
    prm = P(2, 2.0)
    prof = laplace_3pi4_profile
    rep = bd.mu_cone(1e-8, prof, prm)
    assert rep.value == pytest.approx(((prof.lam * (prm.p - 1)) / prm.p) ** prm.p, rel=1e-6)


def test_mu_cone_aperture_order(laplace_3pi4_profile):
    with pytest.raises(ApertureOrderError):
        bd.mu_cone(laplace_3pi4_profile.gamma, laplace_3pi4_profile, P(2, 2.0))
    with pytest.raises(ApertureOrderError):
        bd.mu_cone(3.0, laplace_3pi4_profile, P(2, 2.0))


def test_mu_cone_gate(laplace_pi_profile):
    beta = math.pi / 2
    ratio = bd.cone_ratio(laplace_pi_profile.lam, float(laplace_pi_profile.phi_at(beta)))
    assert not bd.mu_cone(beta, laplace_pi_profile, P(2, 2.0, ratio)).valid
    assert not bd.mu_cone(beta, laplace_pi_profile, P(2, 2.0, -1.01 * ratio)).valid
    assert bd.mu_cone(beta, laplace_pi_profile, P(2, 2.0, 0.99 * ratio)).valid


@settings(max_examples=40, deadline=None)
@given(beta=st.floats(0.05, 2.3), alpha=st.floats(-0.5, 0.5))
def test_mu_cone_agrees_with_mu_easy(laplace_3pi4_profile, beta, alpha):
    prof = laplace_3pi4_profile
    prm = P(2, 2.0, alpha)
    Lam = bd.cone_ratio(prof.lam, float(prof.phi_at(beta)))
    a, b = bd.mu_cone(beta, prof, prm), bd.mu_easy(Lam, prm)
    assert a.valid == b.valid and a.value == b.value


# best_cone_bound

def test_best_cone_laplace_against_grid():
    beta = math.pi / 2
    rep = bd.best_cone_bound(beta, P(2, 2.0))
    grid = np.linspace(beta + 1e-3, math.pi, 200)
    grid_best = max(laplace_g(g, beta) for g in grid)
    fine = minimize_scalar(lambda g: -laplace_g(g, beta), bounds=(beta + 1e-3, math.pi),
                           method="bounded", options={"xatol": 1e-10})
    assert rep.value >= 1 / 64 - 1e-12
    assert rep.details["ratio"] >= grid_best - 1e-12
    assert rep.value == pytest.approx((-fine.fun / 2) ** 2, rel=1e-8)
    assert {"g_lower_end", "g_upper_end", "g_pi", "gamma_star"} <= set(rep.details)


def test_best_cone_three_dimensions_positive():
    beta = math.pi / 2
    prm = P(3, 2.0)
    rep = bd.best_cone_bound(beta, prm)
    assert rep.valid and rep.value > 0
    # grid oracle through sampled profiles, a different code path from the optimizer
    best = 0.0
    for g in np.linspace(beta + 0.02, math.pi - 0.02, 25):
        prof = solve_lambda(g, prm, n_samples=257, check_residual=False)
        best = max(best, bd.cone_ratio(prof.lam, float(prof.phi_at(beta))))
    assert rep.details["ratio"] >= best - 1e-6


@pytest.mark.parametrize("beta", [0.2, 0.6, 1.0, math.pi / 2, 2.0, 2.5, 3.0])
def test_best_cone_below_laptev_sobolev(beta):
    rep = bd.best_cone_bound(beta, P(2, 2.0))
    assert rep.value <= math.pi ** 2 / (16 * beta ** 2) + 1e-9


def test_best_cone_monotone_in_beta_and_alpha():
    vals = [bd.best_cone_bound(b, P(2, 2.0)).value for b in (0.5, 1.0, 1.5, 2.0, 2.5)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    vals = [bd.best_cone_bound(1.2, P(2, 2.0, a)).value or 0.0 for a in (0.0, -0.1, 0.2, -0.3)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_best_cone_gate_fails_everywhere():
    rep = bd.best_cone_bound(math.pi / 2, P(2, 2.0, 5.0))
    assert not rep.valid and rep.value is None


def test_best_cone_no_pi_endpoint_when_p_plus_one_le_N():
    rep = bd.best_cone_bound(math.pi / 2, P(3, 2.0))
    assert "g_pi" not in rep.details and rep.details["gamma_star"] < math.pi


# known_bounds

def test_known_any_domain():
    rep = bd.known_bounds(P(2, 3.0), bd.DomainFlags())[0]
    assert rep.valid and rep.value == pytest.approx(1 / 27)
    assert not bd.known_bounds(P(2, 2.0), bd.DomainFlags())[0].valid


def test_known_convex_equality():
    reps = bd.known_bounds(P(2, 2.0, -0.5), bd.DomainFlags(convex=True))
    conv = [r for r in reps if r.provenance == bd.PROV_CONVEX][0]
    assert conv.value == pytest.approx(1 / 16) and conv.details["equality"]


def test_known_laptev_sobolev_and_ancona():
    beta = 2.0
    reps = bd.known_bounds(P(2, 2.0), bd.DomainFlags(simply_connected_2d=True,
                                                       exterior_cone_beta=beta))
    by = {r.provenance: r for r in reps}
    assert by[bd.PROV_LS].value == pytest.approx(math.pi ** 2 / (16 * beta ** 2))
    assert by[bd.PROV_ANCONA].value == 1 / 16
    reps = bd.known_bounds(P(2, 3.0), bd.DomainFlags(exterior_cone_beta=beta))
    assert not [r for r in reps if r.provenance == bd.PROV_LS][0].valid


def test_known_flags_consistency():
    with pytest.raises(ValueError):
        bd.known_bounds(P(3, 2.0), bd.DomainFlags(simply_connected_2d=True))


@settings(max_examples=60)
@given(p=st.floats(1.05, 20), t=st.floats(0.001, 1.0))
def test_mean_convex_sharpness(p, t):
    alpha = (1 - p) * (1 - t)
    prm = P(2, p, alpha)
    mc = [r for r in bd.known_bounds(prm, bd.DomainFlags(convex=True, mean_convex=True))]
    by = {r.provenance: r for r in mc}
    assert bd.mu_easy(1.0, prm).value == by[bd.PROV_CONVEX].value
    assert by[bd.PROV_MEAN_CONVEX].value == by[bd.PROV_CONVEX].value


# vertex_hardy_bound

@pytest.mark.parametrize("N,p", [(2, 2.0), (3, 2.5), (4, 1.5)])
def test_vertex_half_space(N, p):
    assert bd.vertex_hardy_bound(math.pi / 2, P(N, p)).value == pytest.approx(
        ((p - 1) / p) ** p, rel=1e-8)


def test_vertex_full_plane():
    assert bd.vertex_hardy_bound(math.pi, P(2, 2.0)).value == pytest.approx(1 / 16, rel=1e-8)


@pytest.mark.parametrize("beta", [0.5, 1.5, 2.5, math.pi])
def test_vertex_lower_estimate(beta):
    N, p = 2, 3.0
    floor = ((p - 1) / p) ** p * ((p + 1 - N) / p) ** p
    assert bd.vertex_hardy_bound(beta, P(N, p)).value >= floor - 1e-12


def test_vertex_vanishing():
    with pytest.raises(EigenvalueVanishesError):
        bd.vertex_hardy_bound(math.pi, P(3, 2.0))


# lambda_a and Agmon parameters

def test_lambda_a_examples():
    ah, p = -0.3, 2.5
    lo, hi = bd.exponent_interval(ah, p)
    assert bd.lambda_a(lo, ah, p) == pytest.approx(abs((ah + p - 1) / p) ** p, rel=1e-12)
    assert bd.lambda_a(hi, ah, p) == pytest.approx(0.0, abs=1e-14)
    assert bd.lambda_a(0.5, 0.0, 2.0) == 0.25
    assert bd.lambda_a(0.0, 0.0, 1.5) == 0.0


@settings(max_examples=40)
@given(p=st.floats(1.05, 12), frac=st.floats(0.0, 0.95))
def test_lambda_a_strictly_decreasing(p, frac):
    ah = -frac * (p - 1)
    lo, hi = bd.exponent_interval(ah, p)
    a = np.linspace(lo, hi, 1000)
    v = np.array([bd.lambda_a(x, ah, p) for x in a])
    assert np.all(np.diff(v) < 0)
    assert np.all(v >= -1e-12)


def test_agmon_params():
    ap = bd.AgmonParams(0.0, 0.501, 0.9, 2.0)
    assert ap.lambda_nu == pytest.approx(0.501 * 0.499)
    assert ap.lambda_eta == pytest.approx(0.9 * 0.1)
    assert ap.A == pytest.approx(ap.lambda_eta)
    with pytest.raises(ValueError):
        bd.AgmonParams(0.0, 0.9, 0.6, 2.0)
    with pytest.raises(ValueError):
        bd.AgmonParams(0.0, 0.4, 0.6, 2.0)


# complement of a ray (slit-plane analogue)

def test_ray_complement_planar():
    rep = bd.ray_complement_bound(P(2, 2.0))
    assert rep.valid and rep.value == pytest.approx(1 / 16, rel=1e-6)


def test_ray_complement_p_equals_N_three():
    rep = bd.ray_complement_bound(P(3, 3.0))
    assert rep.valid and rep.value > 0
