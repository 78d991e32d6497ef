"""Lower bounds for the weighted Hardy constant.

Every bound has the shape ``|(L (p-1) - |alpha|) / p|**p`` for some ratio
``L`` that bounds ``|grad U| delta / U`` from below. Values are computed in
log space so that large ``p`` neither underflows nor overflows.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .cone_profile import (
    ConeProfile,
    _check_gamma,
    _integration_end,
    cone_exponent,
    series_start,
    solve_lambda,
)
from .errors import ApertureOrderError, HardyError
from .params import ProblemParams

log = logging.getLogger(__name__)

GAMMA_MARGIN = 1e-3
GOLDEN_XTOL = 1e-7

PROV_EASY = "superharmonic-gradient-bound"
PROV_CONE = "cone-exterior-bound"
PROV_ANY = "any-domain"
PROV_CONVEX = "convex-exact"
PROV_MEAN_CONVEX = "mean-convex-exact"
PROV_ANCONA = "ancona"
PROV_LS = "laptev-sobolev"
PROV_VERTEX = "vertex-hardy"
PROV_RAY = "ray-complement"


def _pow_abs(x: float, p: float) -> float:
    if x == 0.0:
        return 0.0
    return math.exp(p * math.log(abs(x)))


@dataclass(frozen=True)
class LowerBoundReport:
    method: str
    valid: bool
    params: ProblemParams
    value: float | None = None
    provenance: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.valid and self.value is not None:
            raise ValueError("an invalid report carries no value")
        if self.valid and (self.value is None or self.value < 0.0):
            raise ValueError("a valid report needs a nonnegative value")

    def to_dict(self) -> dict:
        details = {"gamma_star": None, "lambda": None, "phi_beta": None}
        details.update(self.details)
        return {
            "method": self.method,
            "value": self.value,
            "valid": self.valid,
            "params": self.params.as_dict(),
            "details": details,
            "provenance": self.provenance,
        }


def _gate(ratio: float, params: ProblemParams) -> tuple[bool, float | None]:
    base = ratio * (params.p - 1.0) - abs(params.alpha)
    if not base > 0.0:
        return False, None
    return True, _pow_abs(base / params.p, params.p)


def mu_easy(Lambda: float, params: ProblemParams) -> LowerBoundReport:
    """Bound from a positive p-superharmonic U with ``|grad U| delta / U >= Lambda``."""
    if not Lambda > 0.0:
        raise ValueError("Lambda must be positive")
    valid, value = _gate(Lambda, params)
    return LowerBoundReport("easy", valid, params, value, PROV_EASY, {"Lambda": float(Lambda)})


def cone_ratio(lam: float, phi_beta: float) -> float:
    """``lam * Phi(beta)**(1/lam)``."""
    if phi_beta <= 0.0:
        return 0.0
    return lam * math.exp(math.log(phi_beta) / lam)


def mu_cone(beta: float, profile: ConeProfile, params: ProblemParams) -> LowerBoundReport:
    """Bound for the (beta, inf) exterior cone condition using cones of aperture gamma."""
    if not 0.0 < beta < profile.gamma:
        raise ApertureOrderError(f"need 0 < beta < gamma, got beta={beta:g}, "
                                 f"gamma={profile.gamma:g}")
    phi_b = float(profile.phi_at(beta))
    ratio = cone_ratio(profile.lam, phi_b)
    valid, value = _gate(ratio, params)
    details = {"beta": float(beta), "gamma_star": profile.gamma, "lambda": profile.lam,
               "phi_beta": phi_b}
    return LowerBoundReport("cone", valid, params, value, PROV_CONE, details)


def _phi_value(lam: float, beta: float, params: ProblemParams) -> float:
    # one integration from the axis to beta; cheaper than sampling a profile
    rtol = atol = params.tol / 10.0
    t0, w0, dw0 = series_start(lam, params)
    if beta <= t0:
        return 1.0
    t_end, _ = _integration_end(beta, params)
    tr = _kernels.integrate_profile(lam, params.N, params.p, t0, w0, dw0, t_end,
                                    rtol, atol, stop_at_zero=False)
    return max(tr.w, 0.0)


def cone_objective(gamma: float, beta: float, params: ProblemParams) -> tuple[float, float, float]:
    """``(g, lam, Phi(beta))`` with ``g(gamma) = lam(gamma) Phi_gamma(beta)**(1/lam(gamma))``."""
    lam = cone_exponent(gamma, params)
    phi_b = _phi_value(lam, beta, params)
    return cone_ratio(lam, phi_b), lam, phi_b


def _golden_max(f, a: float, b: float, xtol: float):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc[0] >= fd[0]:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (c, fc) if fc[0] >= fd[0] else (d, fd)


def best_cone_bound(beta: float, params: ProblemParams,
                    xtol: float = GOLDEN_XTOL) -> LowerBoundReport:
    """Maximize the cone bound over the free aperture ``gamma in (beta, pi]``."""
    if not 0.0 < beta < math.pi:
        raise ValueError("beta must lie in (0, pi)")
    candidates = []
    lo, hi = beta + GAMMA_MARGIN, math.pi - GAMMA_MARGIN
    details: dict = {"beta": float(beta)}
    if lo < hi:
        f = lambda g: cone_objective(g, beta, params)  # noqa: E731
        g_lo, g_hi = f(lo), f(hi)
        log.info("cone objective at gamma=%.6g: %.12g", lo, g_lo[0])
        log.info("cone objective at gamma=%.6g: %.12g", hi, g_hi[0])
        details["g_lower_end"] = g_lo[0]
        details["g_upper_end"] = g_hi[0]
        g_star, val = _golden_max(f, lo, hi, xtol)
        candidates.extend([(lo, g_lo), (hi, g_hi), (g_star, val)])
    if params.p + 1.0 > params.N:
        g_pi = cone_objective(math.pi, beta, params)
        log.info("cone objective at gamma=pi: %.12g", g_pi[0])
        details["g_pi"] = g_pi[0]
        candidates.append((math.pi, g_pi))
    if not candidates:
        return LowerBoundReport("cone", False, params, None, PROV_CONE, details)
    gamma_star, (ratio, lam, phi_b) = max(candidates, key=lambda c: c[1][0])
    details.update(gamma_star=gamma_star, **{"lambda": lam}, phi_beta=phi_b, ratio=ratio)
    valid, value = _gate(ratio, params)
    return LowerBoundReport("cone", valid, params, value, PROV_CONE, details)


@dataclass(frozen=True)
class DomainFlags:
    convex: bool = False
    simply_connected_2d: bool = False
    mean_convex: bool = False
    exterior_cone_beta: float | None = None


def known_bounds(params: ProblemParams, flags: DomainFlags) -> list[LowerBoundReport]:
    """Literature bounds, each with its applicability gate evaluated."""
    if flags.simply_connected_2d and params.N != 2:
        raise ValueError("simply_connected_2d requires N = 2")
    N, p, a = params.N, params.p, params.alpha
    out = []
    base = (a + p) - N
    ok = base > 0.0
    out.append(LowerBoundReport("known", ok, params, _pow_abs(base / p, p) if ok else None,
                                PROV_ANY, {"name": "any-domain"}))
    if flags.convex:
        base = (p - 1.0) + a
        ok = base > 0.0
        out.append(LowerBoundReport("known", ok, params, _pow_abs(base / p, p) if ok else None,
                                    PROV_CONVEX, {"name": "convex", "equality": True}))
    if flags.mean_convex:
        ok = 1.0 - p < a <= 0.0
        rep = mu_easy(1.0, params)
        out.append(LowerBoundReport("known", ok and rep.valid, params,
                                    rep.value if ok and rep.valid else None,
                                    PROV_MEAN_CONVEX, {"name": "mean-convex", "equality": True}))
    laplace = N == 2 and p == 2.0 and a == 0.0
    if flags.simply_connected_2d:
        out.append(LowerBoundReport("known", laplace, params, 1.0 / 16.0 if laplace else None,
                                    PROV_ANCONA, {"name": "ancona"}))
    if flags.exterior_cone_beta is not None and N == 2:
        b = float(flags.exterior_cone_beta)
        out.append(LowerBoundReport("known", laplace, params,
                                    math.pi ** 2 / (16.0 * b * b) if laplace else None,
                                    PROV_LS, {"name": "laptev-sobolev", "beta": b}))
    return out


def vertex_hardy_bound(beta: float, params: ProblemParams) -> LowerBoundReport:
    """Constant for the Hardy inequality with weight ``|x - x0|**(-p)`` at a cone vertex."""
    if not 0.0 < beta <= math.pi:
        raise ValueError("beta must lie in (0, pi]")
    _check_gamma(beta, params)
    lam = cone_exponent(beta, params)
    p = params.p
    value = _pow_abs((p - 1.0) / p * lam, p)
    return LowerBoundReport("vertex", True, params, value, PROV_VERTEX,
                            {"beta": float(beta), "lambda": lam})


def lambda_a(a: float, alpha_hat: float, p: float) -> float:
    """``|a|**(p-2) a [alpha_hat + (p-1)(1-a)]``."""
    if not p > 1.0:
        raise ValueError("p must exceed 1")
    if a == 0.0:
        return 0.0
    return math.copysign(math.exp((p - 1.0) * math.log(abs(a))), a) * (
        alpha_hat + (p - 1.0) * (1.0 - a))


def exponent_interval(alpha_hat: float, p: float) -> tuple[float, float]:
    """``((alpha_hat+p-1)/p, (alpha_hat+p-1)/(p-1)]``, the admissible Agmon exponents."""
    s = alpha_hat + p - 1.0
    return s / p, s / (p - 1.0)


@dataclass(frozen=True)
class AgmonParams:
    alpha_hat: float
    nu: float
    eta: float
    p: float
    lambda_nu: float = field(init=False)
    lambda_eta: float = field(init=False)
    A: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.alpha_hat + self.p > 1.0:
            raise ValueError("need alpha_hat + p > 1")
        lo, hi = exponent_interval(self.alpha_hat, self.p)
        if not (lo < self.nu < self.eta <= hi):
            raise ValueError(f"need {lo:g} < nu < eta <= {hi:g}, got nu={self.nu:g}, "
                             f"eta={self.eta:g}")
        ln = lambda_a(self.nu, self.alpha_hat, self.p)
        le = lambda_a(self.eta, self.alpha_hat, self.p)
        if not ln > 0.0:
            raise ValueError("lambda_nu must be positive")
        ratio = math.exp((self.p - 2.0) * (math.log(abs(self.nu)) - math.log(abs(self.eta))))
        object.__setattr__(self, "lambda_nu", ln)
        object.__setattr__(self, "lambda_eta", le)
        object.__setattr__(self, "A", (self.p - 2.0) * ln * self.eta / self.nu + le * ratio)

    @classmethod
    def from_problem(cls, params: ProblemParams, Lambda: float, nu: float, eta: float):
        return cls(-abs(params.alpha) / Lambda, nu, eta, params.p)


def ray_complement_ratio(profile: ConeProfile) -> float:
    """``inf |grad H| delta / H`` on the complement of the ray opposite the axis.

    Only meaningful for ``gamma = pi``: H is then p-harmonic on the whole
    complement of the ray, whose distance function is ``r`` in front of the
    vertex and ``r sin(theta)`` behind it.
    """
    if profile.gamma < math.pi - 1e-12:
        raise ValueError("the ray complement needs the gamma = pi profile")
    th = profile.theta_grid[:-1]
    ph = profile.phi[:-1]
    dph = profile.dphi[:-1]
    frac = np.where(th <= math.pi / 2.0, 1.0, np.sin(th))
    ratio = frac * np.sqrt(profile.lam ** 2 + (dph / ph) ** 2)
    return float(ratio.min())


def ray_complement_bound(params: ProblemParams) -> LowerBoundReport:
    """Bound for ``R^N`` minus a half-line, from the gamma = pi cone function."""
    try:
        profile = solve_lambda(math.pi, params, check_residual=False)
    except HardyError as exc:
        return LowerBoundReport("easy", False, params, None, PROV_RAY, {"error": str(exc)})
    Lam = ray_complement_ratio(profile)
    valid, value = _gate(Lam, params)
    return LowerBoundReport("easy", valid, params, value, PROV_RAY,
                            {"Lambda": Lam, "gamma_star": math.pi, "lambda": profile.lam})
