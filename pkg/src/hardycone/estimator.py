"""Discrete weighted Rayleigh quotient and its minimization on gallery grids.

The numerator ``int |grad u|^p delta^-alpha`` is a sum over lattice cells
with forward differences from each cell's lower-left node; the denominator
``int |u|^p delta^-(alpha+p)`` is a node sum. Nodes with ``delta < h/2`` are
clamped to zero, so the discrete test functions live in ``{delta >= h/2}``.
"""
from __future__ import annotations

import functools
import json
import logging
from dataclasses import dataclass
from typing import IO

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import DegenerateFieldError
from .geometry import DiscreteDomain

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GridField:
    """Node values on a grid, zero outside the interior mask."""

    domain: DiscreteDomain
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != self.domain.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.domain.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v[~self.domain.inside] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, domain: DiscreteDomain, f) -> "GridField":
        """Evaluate ``f(delta, X, Y)`` on the interior nodes."""
        X, Y = domain.coords()
        vals = np.zeros(domain.shape)
        m = domain.inside
        vals[m] = f(domain.delta[m], X[m], Y[m])
        return cls(domain, vals)

    def scaled(self, c: float) -> "GridField":
        return GridField(self.domain, c * self.values)

    def to_csv(self, fh: IO[str]) -> None:
        X, Y = self.domain.coords()
        fh.write("x,y,value\n")
        for x, y, v in zip(X.ravel(), Y.ravel(), self.values.ravel()):
            fh.write(f"{x:.17g},{y:.17g},{v:.17g}\n")


class HardyForm:
    """Cell/node quadrature of the two Hardy integrals for fixed ``(alpha, p)``."""

    def __init__(self, domain: DiscreteDomain, alpha: float, p: float):
        self.domain = domain
        self.alpha = float(alpha)
        self.p = float(p)
        h = domain.h
        self.h = h
        self.active = domain.inside & (domain.delta >= 0.5 * h)
        if not self.active.any():
            raise DegenerateFieldError("no nodes with delta >= h/2")
        nx, ny = domain.shape
        idx = -np.ones(domain.shape, dtype=np.int64)
        idx[self.active] = np.arange(int(self.active.sum()))
        self.index = idx
        self.n = int(self.active.sum())
        # cell (a, b) uses nodes (a, b), (a+1, b), (a, b+1)
        c0 = idx[:-1, :-1]
        cx = idx[1:, :-1]
        cy = idx[:-1, 1:]
        used = (c0 >= 0) | (cx >= 0) | (cy >= 0)
        c0, cx, cy = c0[used], cx[used], cy[used]
        self.n_cells = int(used.sum())
        rows = np.arange(self.n_cells)
        self.Gx = self._difference(rows, c0, cx)
        self.Gy = self._difference(rows, c0, cy)
        a_idx, b_idx = np.nonzero(used)
        centers = np.stack([domain.origin[0] + h * (a_idx + 0.5),
                            domain.origin[1] + h * (b_idx + 0.5)], axis=1)
        d_center = np.zeros(self.n_cells)
        inside_c = domain.spec.contains(centers)
        if inside_c.any():
            d_center[inside_c] = domain.spec._raw_distance(centers[inside_c])[0]
        self.cell_weight = np.maximum(d_center, 0.5 * h) ** (-self.alpha)
        self.node_weight = domain.delta[self.active] ** (-(self.alpha + self.p))

    def _difference(self, rows, c0, c1) -> sp.csr_matrix:
        inv_h = 1.0 / self.h
        r, c, v = [], [], []
        for cols, sign in ((c1, inv_h), (c0, -inv_h)):
            ok = cols >= 0
            r.append(rows[ok])
            c.append(cols[ok])
            v.append(np.full(int(ok.sum()), sign))
        return sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                             shape=(self.n_cells, self.n))

    def restrict(self, u: GridField) -> np.ndarray:
        return u.values[self.active]

    def extend(self, vec: np.ndarray) -> GridField:
        vals = np.zeros(self.domain.shape)
        vals[self.active] = vec
        return GridField(self.domain, vals)

    def gradients(self, vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.Gx @ vec, self.Gy @ vec

    def numerator(self, vec: np.ndarray) -> float:
        gx, gy = self.gradients(vec)
        g2 = gx * gx + gy * gy
        return self.h ** 2 * float(np.sum(self.cell_weight * g2 ** (0.5 * self.p)))

    def denominator(self, vec: np.ndarray) -> float:
        return self.h ** 2 * float(np.sum(self.node_weight * np.abs(vec) ** self.p))

    def quotient(self, vec: np.ndarray) -> float:
        den = self.denominator(vec)
        if not den > 0.0:
            raise DegenerateFieldError("zero denominator (field vanishes on the active nodes)")
        return self.numerator(vec) / den

    def numerator_grad(self, vec: np.ndarray, eps_reg: float = 0.0) -> np.ndarray:
        """``dN/du``; ``|grad u|`` is regularized as ``sqrt(|grad u|^2 + eps_reg^2)``."""
        gx, gy = self.gradients(vec)
        mod2 = gx * gx + gy * gy + eps_reg * eps_reg
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(mod2 > 0.0, self.cell_weight * mod2 ** (0.5 * self.p - 1.0), 0.0)
        return self.h ** 2 * self.p * (self.Gx.T @ (f * gx) + self.Gy.T @ (f * gy))

    def denominator_grad(self, vec: np.ndarray) -> np.ndarray:
        a = np.abs(vec)
        with np.errstate(divide="ignore", invalid="ignore"):
            pw = np.where(a > 0.0, a ** (self.p - 2.0), 0.0)
        return self.h ** 2 * self.p * self.node_weight * pw * vec

    @functools.cached_property
    def stiffness(self) -> sp.csc_matrix:
        # p = 2 energy matrix; also the preconditioner for p != 2
        W = sp.diags(self.cell_weight)
        A = self.Gx.T @ W @ self.Gx + self.Gy.T @ W @ self.Gy
        return (self.h ** 2 * A).tocsc()

    @functools.cached_property
    def mass(self) -> sp.dia_matrix:
        return sp.diags(self.h ** 2 * self.domain.delta[self.active] ** (-(self.alpha + 2.0)))

    @functools.cached_property
    def stiffness_lu(self):
        return sla.splu(self.stiffness)


def rayleigh(u: GridField, alpha: float, p: float) -> float:
    """Discrete weighted Rayleigh quotient of ``u``."""
    form = HardyForm(u.domain, alpha, p)
    return form.quotient(form.restrict(u))


@dataclass(frozen=True, eq=False)
class RayleighEstimate:
    value: float
    h: float
    iterations: int
    residual: float
    converged: bool
    minimizer: GridField
    alpha: float
    p: float
    eigen_residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "domain": self.minimizer.domain.spec.to_config(),
            "alpha": self.alpha,
            "p": self.p,
            "h": self.h,
            "value": self.value,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _initial_guess(form: HardyForm, seed: int) -> np.ndarray:
    # positive start: delta plus a small seeded perturbation
    rng = np.random.default_rng(seed)
    d = form.domain.delta[form.active]
    return d * (1.0 + 0.01 * rng.random(form.n))


def _inverse_power(form: HardyForm, max_iter: int, tol: float, seed: int):
    A, B = form.stiffness, form.mass
    lu = form.stiffness_lu
    u = _initial_guess(form, seed)
    u /= np.sqrt(u @ (B @ u))
    mu = float(u @ (A @ u))
    rel = np.inf
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        x = lu.solve(B @ u)
        x /= np.sqrt(x @ (B @ x))
        mu_new = float(x @ (A @ x))
        rel = abs(mu_new - mu) / max(abs(mu_new), 1e-300)
        u, mu = x, mu_new
        if rel <= tol:
            Bu = B @ u
            res = float(np.linalg.norm(A @ u - mu * Bu) / np.linalg.norm(Bu))
            if res <= tol:
                break
    else:
        Bu = B @ u
        res = float(np.linalg.norm(A @ u - mu * Bu) / np.linalg.norm(Bu))
    converged = rel <= tol and res <= tol
    if u.sum() < 0.0:
        u = -u
    return mu, u, it, rel, res, converged


def _normalize(form: HardyForm, vec: np.ndarray) -> np.ndarray:
    return vec / form.denominator(vec) ** (1.0 / form.p)


def _descent(form: HardyForm, u0: np.ndarray, max_iter: int, tol: float):
    # Sobolev-preconditioned gradient descent on R = N/D on the sphere D = 1,
    # Armijo backtracking (c = 1e-4, shrink 0.5, initial step 1)
    lu = form.stiffness_lu
    u = _normalize(form, u0)
    R = form.numerator(u)
    rel = np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        gx, gy = form.gradients(u)
        eps_reg = 1e-12 * float(np.sqrt(np.max(gx * gx + gy * gy)))
        grad = form.numerator_grad(u, eps_reg) - R * form.denominator_grad(u)
        direction = -lu.solve(grad)
        slope = float(grad @ direction)
        if slope >= 0.0:
            direction, slope = -grad, -float(grad @ grad)
        step = 1.0
        while True:
            trial = _normalize(form, u + step * direction)
            R_trial = form.numerator(trial)
            if R_trial <= R + 1e-4 * step * slope or step < 1e-12:
                break
            step *= 0.5
        rel = abs(R - R_trial) / max(R_trial, 1e-300)
        u, R = trial, R_trial
        if rel <= tol:
            converged = True
            break
    if u.sum() < 0.0:
        u = -u
    return R, u, it, rel, converged


def minimize(domain: DiscreteDomain, alpha: float, p: float, max_iter: int = 5000,
             tol: float = 1e-10, seed: int = 0) -> RayleighEstimate:
    """Minimize the discrete quotient over fields vanishing outside ``{delta >= h/2}``."""
    form = HardyForm(domain, alpha, p)
    form2 = form if p == 2.0 else HardyForm(domain, alpha, 2.0)
    mu, u, it, rel, res, conv = _inverse_power(form2, max_iter, tol, seed)
    if p == 2.0:
        if not conv:
            log.warning("inverse iteration not converged after %d steps (rel=%.3g, res=%.3g)",
                        it, rel, res)
        return RayleighEstimate(mu, domain.h, it, rel, conv, form.extend(u), float(alpha),
                                2.0, res)
    R, v, it2, rel2, conv2 = _descent(form, u, max_iter, tol)
    if not conv2:
        log.warning("descent not converged after %d steps (rel=%.3g)", it2, rel2)
    return RayleighEstimate(R, domain.h, it + it2, rel2, conv2, form.extend(v), float(alpha),
                            float(p))
