"""Separable p-harmonic functions ``r**lam * Phi(theta)`` in circular cones.

Substituting ``u = r**lam * w(theta)`` into ``div(|grad u|**(p-2) grad u) = 0``
in spherical coordinates about the cone axis gives the profile equation

    (Q**s w')' + (N-2) cot(theta) Q**s w' + lam (lam (p-1) + N - p) Q**s w = 0,

with ``Q = lam**2 w**2 + w'**2`` and ``s = (p-2)/2``. The cone exponent
``lam(gamma)`` is the value for which the solution started at the axis with
``w(0) = 1, w'(0) = 0`` first vanishes at ``theta = gamma``; it is found by
shooting.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import IO

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import _kernels
from .errors import (
    AxisSingularityError,
    BracketError,
    DegenerateStateError,
    EigenvalueVanishesError,
    NonMonotoneError,
    OutsideConeError,
    OutsideDomainError,
    SingularPointError,
)
from .params import ProblemParams

SERIES_START = 1e-6
ENDPOINT_GAP = 1e-8
LAMBDA_BRACKET = (1e-4, 50.0)
N_SAMPLES = 2049
_MONOTONE_SCAN = 9


def profile_rhs(theta: float, omega: float, domega: float, lam: float,
                params: ProblemParams) -> float:
    """Return ``w''`` from the profile ODE at ``(theta, w, w')``."""
    if theta <= 0.0:
        raise AxisSingularityError("theta must be positive; use series_start on the axis")
    if lam * lam * omega * omega + domega * domega == 0.0:
        raise DegenerateStateError("profile and derivative vanish together")
    return _kernels.rhs(theta, omega, domega, lam, params.N, params.p)


def axis_curvature(lam: float, params: ProblemParams) -> float:
    """``w''(0)`` for the normalized profile ``w(0) = 1, w'(0) = 0``."""
    N, p = params.N, params.p
    return -lam * (lam * (p - 1.0) + N - p) / (N - 1.0)


def series_start(lam: float, params: ProblemParams,
                 theta0: float = SERIES_START) -> tuple[float, float, float]:
    """Second-order Taylor start off the axis, avoiding the cot singularity."""
    c = axis_curvature(lam, params)
    return theta0, 1.0 + 0.5 * c * theta0 * theta0, c * theta0


def singular_exponent(params: ProblemParams) -> float:
    """Exponent ``k`` of the local behaviour ``w ~ A + B (pi - theta)**k`` at pi."""
    return (params.p - params.N + 1.0) / (params.p - 1.0)


def _integration_end(theta_max: float, params: ProblemParams) -> tuple[float, bool]:
    # cot(theta) blows up at pi only when N > 2
    if params.N > 2 and theta_max > math.pi - ENDPOINT_GAP:
        return math.pi - ENDPOINT_GAP, True
    return min(theta_max, math.pi), False


def _endpoint_value(w: float, dw: float, params: ProblemParams) -> float:
    # w(pi) from w ~ A + B s**k, s = pi - theta, so A = w + w' s / k;
    # for k <= 0 the solution is unbounded at pi and the raw value is used
    k = singular_exponent(params)
    if k <= 0.0:
        return w
    return w + dw * ENDPOINT_GAP / k


@dataclass(frozen=True)
class FirstZeroResult:
    """First zero ``theta_star`` of the shooting solution, or ``None``."""

    theta_star: float | None
    degraded: bool = False
    steps: int = 0

    @property
    def no_zero(self) -> bool:
        return self.theta_star is None


def shoot(lam: float, params: ProblemParams, theta_max: float = math.pi) -> FirstZeroResult:
    """Integrate from the axis and report the first zero on ``(0, theta_max]``."""
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    rtol = atol = params.tol / 10.0
    t0, w0, dw0 = series_start(lam, params)
    t_end, singular = _integration_end(theta_max, params)
    tr = _kernels.integrate_profile(lam, params.N, params.p, t0, w0, dw0, t_end,
                                    rtol, atol, stop_at_zero=True)
    if tr.status == _kernels.STATUS_ZERO:
        return FirstZeroResult(tr.t, False, tr.steps)
    if tr.status in (_kernels.STATUS_UNDERFLOW, _kernels.STATUS_DEGENERATE):
        return FirstZeroResult(tr.t, True, tr.steps)
    if tr.status == _kernels.STATUS_MAX_STEPS:
        return FirstZeroResult(None, True, tr.steps)
    if theta_max >= math.pi - ENDPOINT_GAP:
        if singular:
            # any zero left lies within ENDPOINT_GAP of pi
            if _endpoint_value(tr.w, tr.dw, params) <= params.tol:
                return FirstZeroResult(math.pi, False, tr.steps)
        elif tr.w <= params.tol:
            return FirstZeroResult(math.pi, False, tr.steps)
    return FirstZeroResult(None, False, tr.steps)


def _shooting_residual(lam: float, gamma: float, params: ProblemParams) -> float:
    # continuous in lam: theta* - gamma when the zero comes early, else w(gamma)
    rtol = atol = params.tol / 10.0
    t0, w0, dw0 = series_start(lam, params)
    t_end, singular = _integration_end(gamma, params)
    tr = _kernels.integrate_profile(lam, params.N, params.p, t0, w0, dw0, t_end,
                                    rtol, atol, stop_at_zero=True)
    if tr.status == _kernels.STATUS_ZERO:
        return tr.t - gamma
    if tr.status != _kernels.STATUS_END:
        raise BracketError(f"integration failed (status {tr.status}) at lambda={lam:g}, "
                           f"theta={tr.t:g}")
    if singular:
        return _endpoint_value(tr.w, tr.dw, params)
    return tr.w


@functools.lru_cache(maxsize=64)
def _check_monotone(N: int, p: float, tol: float, lo: float, hi: float) -> None:
    params = ProblemParams(N, p, 0.0, tol)
    prev = math.inf
    seen_zero = False
    for lam in np.geomspace(lo, hi, _MONOTONE_SCAN):
        res = shoot(float(lam), params)
        if res.no_zero:
            if seen_zero:
                raise NonMonotoneError(f"zero lost at lambda={lam:g} after appearing earlier "
                                       f"(N={N}, p={p})")
            continue
        seen_zero = True
        if res.theta_star > prev + tol:
            raise NonMonotoneError(f"first zero increases at lambda={lam:g} "
                                   f"({res.theta_star:g} > {prev:g}; N={N}, p={p})")
        prev = res.theta_star


def _check_gamma(gamma: float, params: ProblemParams) -> None:
    if not 0.0 < gamma <= math.pi:
        raise OutsideDomainError(f"gamma must lie in (0, pi], got {gamma!r}")
    if gamma >= math.pi - ENDPOINT_GAP and params.p + 1.0 <= params.N:
        raise EigenvalueVanishesError("eigenvalue vanishes (p+1 ≤ N)")


def cone_exponent(gamma: float, params: ProblemParams) -> float:
    """The exponent ``lam(gamma)`` alone, without sampling the profile."""
    _check_gamma(gamma, params)
    lo, hi = LAMBDA_BRACKET
    g_lo = _shooting_residual(lo, gamma, params)
    g_hi = _shooting_residual(hi, gamma, params)
    if not (g_lo > 0.0 > g_hi):
        lo, hi = lo / 10.0, hi * 10.0
        g_lo = _shooting_residual(lo, gamma, params)
        g_hi = _shooting_residual(hi, gamma, params)
        if not (g_lo > 0.0 > g_hi):
            raise BracketError(
                f"no sign change for gamma={gamma:g} (N={params.N}, p={params.p}): "
                f"G({lo:g})={g_lo:.3g}, G({hi:g})={g_hi:.3g}")
    _check_monotone(params.N, params.p, params.tol, lo, hi)
    return brentq(_shooting_residual, lo, hi, args=(gamma, params),
                  xtol=1e-15, rtol=1e-14, maxiter=200)


def _limited_slopes(x: np.ndarray, y: np.ndarray, m: np.ndarray) -> np.ndarray:
    # Fritsch-Carlson limiter applied to exact slopes; rarely active
    d = np.diff(y) / np.diff(x)
    m = m.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(d != 0.0, m[:-1] / d, 0.0)
        b = np.where(d != 0.0, m[1:] / d, 0.0)
    a = np.maximum(a, 0.0)
    b = np.maximum(b, 0.0)
    r = np.hypot(a, b)
    tau = np.where(r > 3.0, 3.0 / np.where(r > 0, r, 1.0), 1.0)
    scale = np.ones_like(m)
    scale[:-1] = np.minimum(scale[:-1], tau)
    scale[1:] = np.minimum(scale[1:], tau)
    m[:-1] = np.where(d * m[:-1] < 0.0, 0.0, m[:-1])
    m[1:] = np.where(d * m[1:] < 0.0, 0.0, m[1:])
    return m * scale


@dataclass(frozen=True, eq=False)
class ConeProfile:
    """Solved eigenpair for the cone of half-aperture ``gamma``."""

    gamma: float
    N: int
    p: float
    lam: float
    theta_grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    residual: float
    tol: float = 1e-9
    _spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("theta_grid", "phi", "dphi"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        slopes = _limited_slopes(self.theta_grid, self.phi, self.dphi)
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.theta_grid, self.phi, slopes))

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self.N, self.p, 0.0, self.tol)

    def _clip(self, theta):
        th = np.asarray(theta, dtype=float)
        slack = 1e-12 * max(1.0, self.gamma)
        if np.any(th < -slack) or np.any(th > self.gamma + slack):
            raise OutsideDomainError(f"theta outside [0, {self.gamma:g}]")
        return np.clip(th, 0.0, self.gamma)

    def phi_at(self, theta):
        th = self._clip(theta)
        val = np.clip(self._spline(th), 0.0, 1.0)
        return np.where(th >= self.gamma, 0.0, np.where(th <= 0.0, 1.0, val))[()]

    def dphi_at(self, theta):
        th = self._clip(theta)
        return np.minimum(self._spline(th, 1), 0.0)[()]

    def to_csv(self, fh: IO[str]) -> None:
        fh.write(f"# gamma={self.gamma:.17g}, N={self.N}, p={self.p:.17g}, "
                 f"lambda={self.lam:.17g}, residual={self.residual:.17g}\n")
        fh.write("theta,phi,dphi\n")
        for t, f, d in zip(self.theta_grid, self.phi, self.dphi):
            fh.write(f"{t:.17g},{f:.17g},{d:.17g}\n")

    @classmethod
    def from_csv(cls, fh: IO[str]) -> "ConeProfile":
        meta_line = fh.readline().lstrip("#").strip()
        meta = dict(item.strip().split("=") for item in meta_line.split(","))
        header = fh.readline().strip()
        if header != "theta,phi,dphi":
            raise ValueError(f"unexpected profile header {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
        return cls(float(meta["gamma"]), int(meta["N"]), float(meta["p"]), float(meta["lambda"]),
                   data[:, 0], data[:, 1], data[:, 2], float(meta["residual"]))


def phi_at(profile: ConeProfile, theta):
    """Monotone interpolation of the sampled profile; values in [0, 1]."""
    return profile.phi_at(theta)


def _sample_defect(lam, theta, phi, dphi, last, params) -> float:
    # re-integrate each sample interval from the stored state, compare endpoints
    rtol = atol = params.tol / 10.0
    worst = 0.0
    for k in range(1, last):
        tr = _kernels.integrate_profile(lam, params.N, params.p, theta[k], phi[k], dphi[k],
                                        theta[k + 1], rtol, atol, stop_at_zero=False)
        dw = abs(tr.w - phi[k + 1]) / (1.0 + abs(phi[k + 1]))
        dv = abs(tr.dw - dphi[k + 1]) / (1.0 + abs(dphi[k + 1]))
        worst = max(worst, dw, dv)
    return worst


def solve_lambda(gamma: float, params: ProblemParams, n_samples: int = N_SAMPLES,
                 check_residual: bool = True) -> ConeProfile:
    """Solve for ``lam(gamma)`` and sample the normalized profile on [0, gamma]."""
    if n_samples < 3:
        raise ValueError("need at least 3 samples")
    lam = cone_exponent(gamma, params)
    rtol = atol = params.tol / 10.0
    theta = np.linspace(0.0, gamma, n_samples)
    t_end, singular = _integration_end(gamma, params)
    t0, w0, dw0 = series_start(lam, params)
    samples = theta[1:-1] if singular else theta[1:]
    tr = _kernels.integrate_profile(lam, params.N, params.p, t0, w0, dw0, t_end,
                                    rtol, atol, stop_at_zero=False, samples=samples)
    phi = np.empty(n_samples)
    dphi = np.empty(n_samples)
    phi[0], dphi[0] = 1.0, 0.0
    if singular:
        phi[1:-1], dphi[1:-1] = tr.sample_w, tr.sample_dw
        dphi[-1] = tr.dw
        end_mismatch = abs(_endpoint_value(tr.w, tr.dw, params))
    else:
        phi[1:], dphi[1:] = tr.sample_w, tr.sample_dw
        end_mismatch = abs(phi[-1])
    phi[-1] = 0.0
    if not np.all(np.isfinite(phi)) or not np.all(np.isfinite(dphi)):
        raise BracketError(f"profile sampling failed (status {tr.status})")
    residual = end_mismatch
    if check_residual:
        last = n_samples - 2 if singular else n_samples - 1
        residual = max(residual, _sample_defect(lam, theta, phi, dphi, last, params))
    return ConeProfile(float(gamma), params.N, params.p, float(lam), theta, phi, dphi,
                       float(residual), params.tol)


@dataclass(frozen=True)
class BoundaryCone:
    """Cone with vertex ``z``, unit axis and half-aperture ``aperture``."""

    vertex: np.ndarray
    axis: np.ndarray
    aperture: float

    def __post_init__(self) -> None:
        v = np.array(self.vertex, dtype=float)
        a = np.array(self.axis, dtype=float)
        na = np.linalg.norm(a)
        if v.shape != a.shape or na == 0.0:
            raise ValueError("vertex and axis must be same-length vectors, axis nonzero")
        a = a / na
        v.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "vertex", v)
        object.__setattr__(self, "axis", a)
        object.__setattr__(self, "aperture", float(self.aperture))

    def angles(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Distances ``|x - z|`` and angles to the axis for points ``x`` (M, d)."""
        d = np.atleast_2d(np.asarray(x, dtype=float)) - self.vertex
        r = np.linalg.norm(d, axis=1)
        par = d @ self.axis
        perp = np.linalg.norm(d - par[:, None] * self.axis, axis=1)
        return r, np.arctan2(perp, par)


def eval_translated(profile: ConeProfile, cone: BoundaryCone, x):
    """``H(x) = |x - z|**lam * Phi(theta)`` and its gradient, for one or many points."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    r, th = cone.angles(pts)
    if np.any(r == 0.0):
        raise SingularPointError("evaluation at the cone vertex")
    if np.any(th > profile.gamma + 1e-12):
        raise OutsideConeError(f"point outside the cone of aperture {profile.gamma:g}")
    th = np.minimum(th, profile.gamma)
    lam = profile.lam
    ph = np.atleast_1d(profile.phi_at(th))
    dph = np.atleast_1d(profile.dphi_at(th))
    e_r = (pts - cone.vertex) / r[:, None]
    sin_t = np.sin(th)
    safe = sin_t > 1e-12
    e_t = np.zeros_like(e_r)
    e_t[safe] = (np.cos(th[safe])[:, None] * e_r[safe] - cone.axis) / sin_t[safe][:, None]
    rl1 = r ** (lam - 1.0)
    H = r * rl1 * ph
    grad = rl1[:, None] * (lam * ph[:, None] * e_r + dph[:, None] * e_t)
    if single:
        return float(H[0]), grad[0]
    return H, grad
