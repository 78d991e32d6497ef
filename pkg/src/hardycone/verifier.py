"""Numerical checks of the supersolution constructions behind the bounds."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import AgmonParams, cone_ratio, lambda_a
from .cone_profile import ConeProfile, eval_translated
from .errors import (
    GeometryError,
    NormalizationError,
    OutsideDomainError,
)
from .estimator import GridField, HardyForm
from .geometry import DiscreteDomain, DomainSpec, boundary_sample, cone_contains, distance

AGMON_CAP = 0.5
TIE_RTOL = 1e-9
KINK_FRACTION = 0.1
MAX_LISTED = 20


def _listed(domain: DiscreteDomain, mask_idx, values, k: int = MAX_LISTED) -> list:
    # the k smallest entries with node coordinates, for inspection
    X, Y = domain.coords()
    order = np.argsort(values, kind="stable")[:k]
    return [{"x": float(X[mask_idx][i]), "y": float(Y[mask_idx][i]), "value": float(values[i])}
            for i in order]


# -- Agmon supersolution ----------------------------------------------------------

def agmon_cap(nu: float, eta: float) -> float:
    """Largest admissible ``max U``: 1/2, lowered so that ``t^nu - t^eta`` stays increasing."""
    return min(AGMON_CAP, 0.5 * (nu / eta) ** (1.0 / (eta - nu)))


def normalize_field(U: GridField, cap: float = AGMON_CAP) -> GridField:
    m = U.domain.inside
    top = float(U.values[m].max())
    if not top > 0.0:
        raise NormalizationError("field has no positive values")
    return U.scaled(cap / top)


def agmon_composite(U: GridField, nu: float, eta: float) -> GridField:
    """Node-wise ``U^nu - U^eta`` for ``0 < U <= 1/2``."""
    if not nu < eta:
        raise ValueError("need nu < eta")
    v = U.values[U.domain.inside]
    if np.any(v <= 0.0) or np.any(v > AGMON_CAP * (1.0 + 1e-12)):
        raise NormalizationError("U must take values in (0, 1/2] on interior nodes")
    out = np.zeros(U.domain.shape)
    out[U.domain.inside] = v ** nu - v ** eta
    return GridField(U.domain, out)


@dataclass
class SupersolutionReport:
    mu: float
    min_weak_residual: float
    nodes_tested: int
    Lambda_measured: float | None
    scale: float
    tol: float
    passed: bool
    failing_nodes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.nodes_tested <= 0:
            raise ValueError("no nodes tested")

    def to_dict(self) -> dict:
        return asdict(self)


def lambda_scan(U: GridField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Node-wise ``|grad U| delta / U`` with the tested and kink masks.

    Tested nodes have ``delta > 2h`` and no kink in their stencil. A kink
    (medial-axis ridge or apex of ``delta``, say) shows up as a second difference
    of order ``h |grad U|`` instead of ``h^2``; the ratio there depends on how the
    stencil straddles it, not on ``h``, so those nodes are flagged and skipped.
    """
    dd = U.domain
    h = dd.h
    u = U.values
    # second-order central gradient at the nodes
    node_g = np.zeros(dd.shape)
    node_g[1:-1, 1:-1] = np.hypot(u[2:, 1:-1] - u[:-2, 1:-1], u[1:-1, 2:] - u[1:-1, :-2]) / (2.0 * h)
    nx, ny = dd.shape
    d2 = np.zeros(dd.shape)
    c = u[1:-1, 1:-1]
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
        fwd = u[1 + di:nx - 1 + di, 1 + dj:ny - 1 + dj]
        bwd = u[1 - di:nx - 1 - di, 1 - dj:ny - 1 - dj]
        d2[1:-1, 1:-1] = np.maximum(d2[1:-1, 1:-1], np.abs(fwd - 2.0 * c + bwd))
    kink = d2 > KINK_FRACTION * h * node_g
    deep = dd.inside & (dd.delta > 2.0 * h)
    if np.any(u[deep] <= 0.0):
        raise ValueError("U must be positive")
    tested = deep & ~kink
    ratio = np.full(dd.shape, np.nan)
    ratio[tested] = node_g[tested] * dd.delta[tested] / u[tested]
    return ratio, tested, deep & kink


def measure_lambda(U: GridField) -> float:
    """Approximate essinf of ``|grad U| delta / U`` over kink-free nodes with ``delta > 2h``."""
    ratio, tested, _ = lambda_scan(U)
    if not tested.any():
        raise ValueError("no kink-free nodes with delta > 2h")
    return float(np.min(ratio[tested]))


def weak_residual(u: GridField, alpha: float, p: float, mu: float,
                  tol: float = 1e-8) -> SupersolutionReport:
    """Hat-function residuals ``a_i`` of ``-div(delta^-alpha |grad u|^(p-2) grad u) - mu u^(p-1)/delta^(alpha+p)``."""
    form = HardyForm(u.domain, alpha, p)
    vec = form.restrict(u)
    if np.any(vec <= 0.0):
        raise ValueError("u must be positive on the active nodes")
    energy = form.numerator_grad(vec) / p
    mass = mu * form.denominator_grad(vec) / p
    a = energy - mass
    scale = float(np.max(np.abs(energy) + np.abs(mass)))
    amin = float(a.min())
    passed = amin >= -tol * scale
    failing = []
    if not passed:
        failing = [f for f in _listed(u.domain, form.active, a) if f["value"] < -tol * scale]
    Lam = None
    try:
        Lam = measure_lambda(u)
    except ValueError:
        pass
    return SupersolutionReport(float(mu), amin, form.n, Lam, scale, tol, passed, failing)


def agmon_supersolution(domain: DiscreteDomain, alpha: float, p: float, nu: float,
                        eta: float, mu: float | None = None,
                        tol: float = 1e-8) -> SupersolutionReport:
    """Full pipeline with ``U = delta``: measure Lambda, build the composite, test it."""
    U0 = GridField(domain, np.where(domain.inside, domain.delta, 0.0))
    Lam = measure_lambda(U0)
    ap = AgmonParams(-abs(alpha) / Lam, nu, eta, p)
    if mu is None:
        mu = ap.lambda_nu * Lam ** p
    cap = agmon_cap(nu, eta)
    U = normalize_field(U0, cap)
    w = agmon_composite(U, nu, eta)
    rep = weak_residual(w, alpha, p, mu, tol)
    rep.Lambda_measured = Lam
    rep.details.update(nu=nu, eta=eta, alpha_hat=ap.alpha_hat, lambda_nu=ap.lambda_nu,
                       A=ap.A, max_U=cap)
    return rep


# -- min construction ---------------------------------------------------------

@dataclass
class MinConstructionReport:
    epsilon: float
    gamma: float
    n_cones: int
    essinf_ratio: float
    claimed: float
    passed: bool
    nodes_tested: int
    tie_nodes: int
    argmin: list = field(default_factory=list)
    ties: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.n_cones < 1:
            raise ValueError("need at least one cone")

    def to_dict(self) -> dict:
        return asdict(self)


def _branch_values(profile, cones, pts):
    H = np.empty((len(cones), len(pts)))
    for k, c in enumerate(cones):
        H[k] = eval_translated(profile, c, pts)[0]
    return H


@dataclass(frozen=True, eq=False)
class GradientRatio:
    """Node-wise data of ``u = min_z H_z`` on the interior nodes."""

    points: np.ndarray
    u: np.ndarray
    ratio: np.ndarray
    branch: np.ndarray
    tie: np.ndarray
    tested: np.ndarray


def gradient_ratio(domain: DiscreteDomain, profile: ConeProfile, cones) -> GradientRatio:
    """``|grad u| delta / u`` for ``u = min_z H_z``; NaN at untested nodes."""
    pts = domain.points()
    for c in cones:
        if not np.all(cone_contains(c, pts)):
            raise GeometryError(f"cone at {c.vertex.tolist()} misses interior nodes")
    H = _branch_values(profile, cones, pts)
    j = np.argmin(H, axis=0)
    u_vals = H[j, np.arange(len(pts))]
    delta = domain.delta[domain.inside]
    h = domain.h
    deep = delta > 2.0 * h

    def branch_grad(branch, sel):
        # central differences of one branch, smooth across the stencil even
        # where the minimizing index changes
        g = np.full((len(pts), 2), np.nan)
        for k in np.unique(branch[sel]):
            s = sel & (branch == k)
            for ax in range(2):
                e = np.zeros(2)
                e[ax] = h
                fp = eval_translated(profile, cones[k], pts[s] + e)[0]
                fm = eval_translated(profile, cones[k], pts[s] - e)[0]
                g[s, ax] = (fp - fm) / (2.0 * h)
        return g

    grad = branch_grad(j, deep)
    tie = np.zeros(len(pts), dtype=bool)
    if len(cones) > 1:
        order = np.argsort(H, axis=0, kind="stable")
        j2 = order[1]
        close = H[j2, np.arange(len(pts))] - u_vals <= TIE_RTOL * u_vals
        cand = deep & close
        if cand.any():
            # a tie is a kink only if the two branches differ to first order
            g2 = branch_grad(j2, cand)
            diff = np.linalg.norm(grad - g2, axis=1)
            scale = np.linalg.norm(grad, axis=1)
            tie = cand & (diff > TIE_RTOL * scale)
    test = deep & ~tie
    grad[~test] = np.nan
    ratio = np.linalg.norm(grad, axis=1) * delta / u_vals
    return GradientRatio(pts, u_vals, ratio, j, tie, test)


def min_construction(domain: DiscreteDomain, spec: DomainSpec, gamma: float,
                     profile: ConeProfile, n_cones: int = 64, epsilon: float = 0.1,
                     tol: float = 1e-3, cones=None) -> tuple[GridField, MinConstructionReport]:
    """``u = min_z H_z`` over sampled boundary cones, and the essinf of ``|grad u| delta / u``."""
    beta = spec.metadata.exterior_cone_beta
    if beta is None or gamma < beta:
        raise ValueError(f"need gamma >= beta (beta={beta}, gamma={gamma:g})")
    if abs(profile.gamma - gamma) > 1e-12:
        raise ValueError("profile aperture differs from gamma")
    if cones is None:
        cones = [c for _, c in boundary_sample(spec, n_cones, gamma)]
    gr = gradient_ratio(domain, profile, cones)
    if not gr.tested.any():
        raise ValueError("no admissible nodes (refine the grid)")
    vals = np.zeros(domain.shape)
    vals[domain.inside] = gr.u
    r_test = gr.ratio[gr.tested]
    tested_pts = gr.points[gr.tested]
    ess = float(r_test.min())
    claimed = cone_ratio(profile.lam, float(profile.phi_at(beta))) / (1.0 + epsilon)
    order = np.argsort(r_test, kind="stable")[:MAX_LISTED]
    argmin = [{"x": float(tested_pts[i, 0]), "y": float(tested_pts[i, 1]),
               "value": float(r_test[i])} for i in order]
    ties = [{"x": float(x), "y": float(y)} for x, y in gr.points[gr.tie][:MAX_LISTED]]
    rep = MinConstructionReport(float(epsilon), float(gamma), len(cones), ess, claimed,
                                ess >= claimed - tol, int(gr.tested.sum()), int(gr.tie.sum()),
                                argmin, ties)
    return GridField(domain, vals), rep


# -- projection window ------------------------------------------------------------

def window_fraction(epsilon: float) -> float:
    """``t`` with ``2t/(1-t) < epsilon``, kept 1% inside the limit."""
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    return 0.99 * epsilon / (2.0 + epsilon)


def projection_window(spec: DomainSpec, x, epsilon: float, require_margin: bool = True) -> float:
    """Radius ``tau`` of a ball around ``x`` on which ``|y - Px| <= (1+eps) delta(y)``."""
    d, _ = distance(spec, x)
    if require_margin and d < epsilon:
        raise OutsideDomainError(f"x is not in the region delta >= {epsilon:g} (delta={d:g})")
    return window_fraction(epsilon) * d


@dataclass
class ProjectionReport:
    epsilon: float
    tau: float
    samples: int
    violations: int
    max_ratio: float
    passed: bool
    failing: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def check_projection_window(spec: DomainSpec, x, epsilon: float, samples: int = 1000,
                            seed: int = 0, require_margin: bool = True) -> ProjectionReport:
    """Sample the ball ``B_tau(x)`` and test ``delta(y) <= |y-Px| <= (1+eps) delta(y)``."""
    x = np.asarray(x, float)
    tau = projection_window(spec, x, epsilon, require_margin)
    _, Px = distance(spec, x)
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0.0, 2.0 * math.pi, samples)
    rad = tau * np.sqrt(rng.uniform(0.0, 1.0, samples))
    ys = x + np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    ys[0] = x
    dy, _ = spec.distance_many(ys)
    dist_p = np.linalg.norm(ys - Px, axis=1)
    slack = 1e-12 * np.maximum(1.0, dist_p)
    bad = (dy > dist_p + slack) | (dist_p > (1.0 + epsilon) * dy + slack)
    failing = [{"y": ys[i].tolist(), "delta": float(dy[i]), "dist": float(dist_p[i])}
               for i in np.flatnonzero(bad)[:MAX_LISTED]]
    return ProjectionReport(float(epsilon), float(tau), samples, int(bad.sum()),
                            float(np.max(dist_p / dy)), not bad.any(), failing)


# -- the scalar inequality -----------------------------------------------------------

@dataclass(frozen=True)
class InequalityResult:
    lhs: float
    rhs: float
    holds: bool


def admissible_interval(a: float, p: float) -> tuple[float, float]:
    s = a + p - 1.0
    if s > 0.0:
        return s / p, s / (p - 1.0)
    if s < 0.0:
        return s / p, 0.0
    raise OutsideDomainError("a + p = 1 has no admissible exponents")


def appendix_inequality(a: float, nu: float, eta: float, p: float) -> InequalityResult:
    """Both sides of ``(p-2) l_nu eta/nu + l_eta |nu/eta|^(p-2) < (p-1) l_nu``."""
    if not p > 1.0:
        raise OutsideDomainError("p must exceed 1")
    if not nu < eta:
        raise OutsideDomainError("need nu < eta")
    lo, hi = admissible_interval(a, p)
    if not (lo <= nu and eta <= hi):
        raise OutsideDomainError(f"nu, eta must lie in [{lo:g}, {hi:g}]")
    w = abs(nu) ** (p - 2.0)
    k_nu = a + (1.0 - nu) * (p - 1.0)
    k_eta = a + (1.0 - eta) * (p - 1.0)
    # l_nu * eta / nu and l_eta * |nu|^(p-2) / |eta|^(p-2), with the powers cancelled
    lhs = (p - 2.0) * w * eta * k_nu + w * eta * k_eta
    rhs = (p - 1.0) * lambda_a(nu, a, p)
    return InequalityResult(lhs, rhs, lhs < rhs)


def sample_admissible(n: int, seed: int = 0, p_range=(1.05, 12.0)) -> np.ndarray:
    """Random ``(a, p, nu, eta)`` rows with ``nu < eta`` in the admissible interval."""
    rng = np.random.default_rng(seed)
    p = np.exp(rng.uniform(math.log(p_range[0]), math.log(p_range[1]), n))
    s = rng.uniform(1e-3, 6.0, n)
    s = np.where(rng.random(n) < 0.8, s, -rng.uniform(1e-3, 1.0, n) * p)
    a = 1.0 - p + s
    lo = s / p
    hi = np.where(s > 0.0, s / (p - 1.0), 0.0)
    t = np.sort(rng.uniform(0.0, 1.0, (n, 2)), axis=1)
    nu = lo + t[:, 0] * (hi - lo)
    eta = lo + t[:, 1] * (hi - lo)
    keep = nu < eta
    return np.stack([a, p, nu, eta], axis=1)[keep]


def appendix_property(n: int = 100_000, seed: int = 0) -> dict:
    """Count violations of the inequality over ``n`` random admissible tuples."""
    rows = sample_admissible(n, seed)
    failures = []
    for a, p, nu, eta in rows:
        res = appendix_inequality(a, nu, eta, p)
        if not res.holds:
            failures.append({"a": a, "p": p, "nu": nu, "eta": eta, "lhs": res.lhs,
                             "rhs": res.rhs})
    return {"samples": len(rows), "violations": len(failures), "failing": failures[:MAX_LISTED]}
