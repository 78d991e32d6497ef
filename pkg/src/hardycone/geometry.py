"""Gallery of planar test domains: exact distances, projections, cones and grids."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
from scipy import ndimage

from .cone_profile import BoundaryCone
from .errors import ConeTooNarrowError, OutsideDomainError, ResolutionError
from .bounds import DomainFlags

TIE_TOL = 1e-14
ANGLE_TOL = 1e-12


# -- boundary pieces ---------------------------------------------------------
#
# Each piece maps its points to a global arc-length parameter; ``closest``
# returns (distance, point, parameter) for an (M, 2) array of points.

@dataclass(frozen=True)
class Segment:
    a: tuple
    b: tuple
    s0: float = 0.0

    @property
    def length(self) -> float:
        return math.dist(self.a, self.b)

    def closest(self, x):
        a = np.asarray(self.a, float)
        d = np.asarray(self.b, float) - a
        L2 = float(d @ d)
        t = np.clip(((x - a) @ d) / L2, 0.0, 1.0)
        P = a + t[:, None] * d
        return np.linalg.norm(x - P, axis=1), P, self.s0 + t * math.sqrt(L2)

    def point(self, s):
        t = (s - self.s0) / self.length
        return np.asarray(self.a, float) + t * (np.asarray(self.b, float) - np.asarray(self.a, float))


@dataclass(frozen=True)
class Ray:
    origin: tuple
    direction: tuple
    s0: float = 0.0

    def closest(self, x):
        o = np.asarray(self.origin, float)
        d = np.asarray(self.direction, float)
        t = np.maximum((x - o) @ d, 0.0)
        P = o + t[:, None] * d
        return np.linalg.norm(x - P, axis=1), P, self.s0 + t

    def point(self, s):
        return np.asarray(self.origin, float) + (s - self.s0) * np.asarray(self.direction, float)


@dataclass(frozen=True)
class Line:
    origin: tuple
    direction: tuple

    def closest(self, x):
        o = np.asarray(self.origin, float)
        d = np.asarray(self.direction, float)
        t = (x - o) @ d
        P = o + t[:, None] * d
        return np.linalg.norm(x - P, axis=1), P, t

    def point(self, s):
        return np.asarray(self.origin, float) + s * np.asarray(self.direction, float)


@dataclass(frozen=True)
class Arc:
    center: tuple
    radius: float
    start: float
    span: float
    s0: float = 0.0

    @property
    def length(self) -> float:
        return self.radius * self.span

    def closest(self, x):
        c = np.asarray(self.center, float)
        v = x - c
        ang = np.mod(np.arctan2(v[:, 1], v[:, 0]) - self.start, 2.0 * math.pi)
        at_center = np.hypot(v[:, 0], v[:, 1]) == 0.0
        ang = np.where(at_center, 0.0, ang)
        inside = ang <= self.span
        t_best = np.where(inside, ang, 0.0)
        if self.span < 2.0 * math.pi:
            # outside the angular range the nearest point is an endpoint
            e0 = c + self.radius * np.array([math.cos(self.start), math.sin(self.start)])
            e1 = c + self.radius * np.array([math.cos(self.start + self.span),
                                             math.sin(self.start + self.span)])
            d0 = np.linalg.norm(x - e0, axis=1)
            d1 = np.linalg.norm(x - e1, axis=1)
            t_best = np.where(inside, ang, np.where(d1 < d0 - TIE_TOL, self.span, 0.0))
        phi = self.start + t_best
        P = c + self.radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return np.linalg.norm(x - P, axis=1), P, self.s0 + self.radius * t_best

    def point(self, s):
        phi = self.start + (s - self.s0) / self.radius
        return np.asarray(self.center, float) + self.radius * np.array([math.cos(phi), math.sin(phi)])


def _chain(pieces):
    # assign cumulative arc-length offsets to finite pieces
    out, s = [], 0.0
    for pc in pieces:
        out.append(type(pc)(**{**pc.__dict__, "s0": s}))
        s += pc.length
    return out, s


def _polygon_pieces(vertices):
    n = len(vertices)
    return _chain([Segment(tuple(vertices[i]), tuple(vertices[(i + 1) % n])) for i in range(n)])


def _points_in_polygon(x, vertices) -> np.ndarray:
    # even-odd rule; boundary points are removed by the delta > 0 test
    v = np.asarray(vertices, float)
    inside = np.zeros(len(x), dtype=bool)
    px, py = x[:, 0], x[:, 1]
    for i in range(len(v)):
        (x1, y1), (x2, y2) = v[i], v[(i + 1) % len(v)]
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xint)
    return inside


def _signed_area(vertices) -> float:
    v = np.asarray(vertices, float)
    return 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))


def _is_convex(vertices) -> bool:
    v = np.asarray(vertices, float)
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool(np.all(cross > 0.0))


# -- covering arcs for cone axes ----------------------------------------------

def _angle(v) -> float:
    return math.atan2(v[1], v[0]) % (2.0 * math.pi)


def covering_arc(arcs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Smallest arc containing a union of arcs ``(start, length)``; returns (mid, half)."""
    two_pi = 2.0 * math.pi
    ivs = sorted((s % two_pi, s % two_pi + L) for s, L in arcs)
    merged = []
    for s, e in ivs:
        if merged and s <= merged[-1][1] + ANGLE_TOL:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    wrap_end = merged[-1][1] - two_pi
    gaps = []
    for (s0, e0), (s1, _) in zip(merged, merged[1:]):
        g0, g1 = max(e0, wrap_end), s1
        if g1 > g0 + ANGLE_TOL:
            gaps.append((g0, g1))
    g0, g1 = merged[-1][1], merged[0][0] + two_pi
    if g1 > g0 + ANGLE_TOL:
        gaps.append((g0, g1))
    if not gaps:
        return 0.0, math.pi
    g0, g1 = max(gaps, key=lambda g: g[1] - g[0])
    mid_gap = 0.5 * (g0 + g1)
    return (mid_gap + math.pi) % two_pi, math.pi - 0.5 * (g1 - g0)


def _polygon_direction_arcs(vertices, z) -> list:
    arcs = []
    n = len(vertices)
    z = np.asarray(z, float)
    for i in range(n):
        a = np.asarray(vertices[i], float)
        b = np.asarray(vertices[(i + 1) % n], float)
        da, db = a - z, b - z
        na, nb = np.linalg.norm(da), np.linalg.norm(db)
        cross = da[0] * db[1] - da[1] * db[0]
        if abs(cross) <= 1e-12 * max(1.0, na * nb) and float(da @ db) <= 0.0:
            # z lies on this edge: its points are seen in two opposite directions
            for d, nd in ((da, na), (db, nb)):
                if nd > 1e-14:
                    arcs.append((_angle(d), 0.0))
            continue
        scale = 1e-12 * max(1.0, na, nb)
        if min(na, nb) <= scale:
            # z sits on a vertex up to rounding; only the far endpoint has a direction
            arcs.append((_angle(db if na <= scale else da), 0.0))
            continue
        ta, tb = _angle(da), _angle(db)
        sweep = (tb - ta) % (2.0 * math.pi)
        if sweep <= math.pi:
            arcs.append((ta, sweep))
        else:
            arcs.append((tb, 2.0 * math.pi - sweep))
    return arcs


def polygon_axis(vertices, z) -> tuple[np.ndarray, float]:
    """Axis of the narrowest cone at ``z`` containing the closed polygon, and its half-angle."""
    mid, half = covering_arc(_polygon_direction_arcs(vertices, z))
    return np.array([math.cos(mid), math.sin(mid)]), half


# -- domain specification -------------------------------------------------------

SHAPES = ("unit_square", "unit_disk", "sector", "half_plane", "slit_plane",
          "convex_polygon", "l_shape")


@dataclass(frozen=True)
class DomainMetadata:
    convex: bool
    mean_convex: bool
    exterior_cone_beta: float | None
    simply_connected: bool = True


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """A gallery domain: shape name, its parameters and derived metadata."""

    shape: str
    params: dict = field(default_factory=dict)
    metadata: DomainMetadata = field(init=False)
    pieces: tuple = field(init=False, repr=False)
    perimeter: float = field(init=False, repr=False)
    window: tuple = field(init=False, repr=False)
    vertices: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; choose from {', '.join(SHAPES)}")
        getattr(self, f"_init_{self.shape}")()

    def _set(self, **kw) -> None:
        for k, v in kw.items():
            object.__setattr__(self, k, v)

    def _init_polygon(self, verts, meta) -> None:
        verts = np.asarray(verts, float)
        if _signed_area(verts) < 0.0:
            verts = verts[::-1].copy()
        verts.setflags(write=False)
        pieces, L = _polygon_pieces(verts)
        lo, hi = verts.min(axis=0), verts.max(axis=0)
        self._set(vertices=verts, pieces=tuple(pieces), perimeter=L,
                  window=(tuple(lo), tuple(hi)), metadata=meta)

    def _init_unit_square(self) -> None:
        self._init_polygon([(0, 0), (1, 0), (1, 1), (0, 1)],
                           DomainMetadata(True, True, math.pi / 2))

    def _init_convex_polygon(self) -> None:
        verts = self.params.get("vertices")
        if verts is None or len(verts) < 3:
            raise ValueError("convex_polygon needs at least 3 vertices")
        v = np.asarray(verts, float)
        if _signed_area(v) < 0.0:
            v = v[::-1]
        if not _is_convex(v):
            raise ValueError("vertices do not form a strictly convex polygon")
        self._init_polygon(v, DomainMetadata(True, True, math.pi / 2))

    def _init_l_shape(self) -> None:
        verts = [(-1, -1), (1, -1), (1, 0), (0, 0), (0, 1), (-1, 1)]
        self._init_polygon(verts, DomainMetadata(False, False, 3 * math.pi / 4))

    def _init_unit_disk(self) -> None:
        pieces, L = _chain([Arc((0.0, 0.0), 1.0, 0.0, 2 * math.pi)])
        self._set(vertices=None, pieces=tuple(pieces), perimeter=L,
                  window=((-1.0, -1.0), (1.0, 1.0)),
                  metadata=DomainMetadata(True, True, math.pi / 2))

    def _init_sector(self) -> None:
        beta = float(self.params.get("beta", math.pi / 4))
        R = float(self.params.get("radius", 1.0))
        if not 0.0 < beta <= math.pi or not R > 0.0:
            raise ValueError("sector needs 0 < beta <= pi and radius > 0")
        lo_pt = (R * math.cos(-beta), R * math.sin(-beta))
        hi_pt = (R * math.cos(beta), R * math.sin(beta))
        pieces, L = _chain([Segment((0.0, 0.0), lo_pt), Arc((0.0, 0.0), R, -beta, 2 * beta),
                            Segment(hi_pt, (0.0, 0.0))])
        convex = beta <= math.pi / 2
        self._set(vertices=None, pieces=tuple(pieces), perimeter=L,
                  window=((-R, -R), (R, R)),
                  metadata=DomainMetadata(convex, convex, max(math.pi / 2, beta)))

    def _init_half_plane(self) -> None:
        self._set(vertices=None, pieces=(Line((0.0, 0.0), (1.0, 0.0)),), perimeter=2.0,
                  window=((-1.0, 0.0), (1.0, 2.0)),
                  metadata=DomainMetadata(True, True, math.pi / 2))

    def _init_slit_plane(self) -> None:
        self._set(vertices=None, pieces=(Ray((0.0, 0.0), (1.0, 0.0)),), perimeter=1.0,
                  window=((-1.0, -1.0), (1.0, 1.0)),
                  metadata=DomainMetadata(False, False, math.pi))

    @property
    def flags(self) -> DomainFlags:
        m = self.metadata
        return DomainFlags(convex=m.convex, simply_connected_2d=m.simply_connected,
                           mean_convex=m.mean_convex, exterior_cone_beta=m.exterior_cone_beta)

    @property
    def bounded(self) -> bool:
        return self.shape not in ("half_plane", "slit_plane")

    def contains(self, x) -> np.ndarray:
        """Open-domain membership for an (M, 2) array (closure minus boundary)."""
        x = np.atleast_2d(np.asarray(x, float))
        s = self.shape
        if s == "half_plane":
            return x[:, 1] > 0.0
        if s == "slit_plane":
            return ~((x[:, 1] == 0.0) & (x[:, 0] >= 0.0))
        if s == "unit_disk":
            return np.hypot(x[:, 0], x[:, 1]) < 1.0
        if s == "sector":
            beta = float(self.params.get("beta", math.pi / 4))
            R = float(self.params.get("radius", 1.0))
            r = np.hypot(x[:, 0], x[:, 1])
            ang = np.abs(np.arctan2(x[:, 1], x[:, 0]))
            return (r < R) & (r > 0.0) & (ang < beta)
        on_boundary = self._raw_distance(x)[0] <= 0.0
        return _points_in_polygon(x, self.vertices) & ~on_boundary

    def _raw_distance(self, x):
        best_d = np.full(len(x), np.inf)
        best_p = np.zeros_like(x)
        for pc in self.pieces:
            d, P, _ = pc.closest(x)
            # pieces come in parameter order: strict improvement keeps the smallest parameter
            better = d < best_d - TIE_TOL
            best_d = np.where(better, d, best_d)
            best_p = np.where(better[:, None], P, best_p)
        return best_d, best_p

    def distance_many(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, float))
        if not np.all(self.contains(x)):
            raise OutsideDomainError(f"point outside {self.shape}")
        return self._raw_distance(x)

    def to_config(self) -> dict:
        params = {k: (np.asarray(v).tolist() if isinstance(v, (np.ndarray, list, tuple)) else v)
                  for k, v in self.params.items()}
        return {"shape": self.shape, "params": params}


def distance(domain: DomainSpec, x) -> tuple[float, np.ndarray]:
    """``(delta(x), Px)`` with ties broken by the smallest boundary parameter."""
    d, P = domain.distance_many(np.asarray(x, float)[None, :])
    return float(d[0]), P[0]


def unit_square() -> DomainSpec:
    return DomainSpec("unit_square")


def unit_disk() -> DomainSpec:
    return DomainSpec("unit_disk")


def sector(beta: float, radius: float = 1.0) -> DomainSpec:
    return DomainSpec("sector", {"beta": float(beta), "radius": float(radius)})


def half_plane() -> DomainSpec:
    return DomainSpec("half_plane")


def slit_plane() -> DomainSpec:
    return DomainSpec("slit_plane")


def convex_polygon(vertices) -> DomainSpec:
    return DomainSpec("convex_polygon", {"vertices": [list(map(float, v)) for v in vertices]})


def l_shape() -> DomainSpec:
    return DomainSpec("l_shape")


def domain_from_config(cfg: dict) -> DomainSpec:
    """Build a domain from ``{"shape": name, "params": {...}}``."""
    if "shape" not in cfg:
        raise ValueError("domain config needs a 'shape' key")
    return DomainSpec(cfg["shape"], dict(cfg.get("params", {})))


def load_domain(fh: IO[str]) -> DomainSpec:
    return domain_from_config(json.load(fh))


# -- boundary cones -------------------------------------------------------------

def boundary_points(domain: DomainSpec, n: int) -> np.ndarray:
    """``n`` boundary points equidistributed by arc length (window part if unbounded)."""
    if n < 1:
        raise ValueError("need at least one boundary point")
    if domain.shape == "half_plane":
        s = -1.0 + 2.0 * (np.arange(n) + 0.5) / n
        return np.stack([s, np.zeros(n)], axis=1)
    if domain.shape == "slit_plane":
        s = np.arange(n) / n
        return np.stack([s, np.zeros(n)], axis=1)
    s = np.arange(n) * domain.perimeter / n
    out = np.empty((n, 2))
    for k, sk in enumerate(s):
        for pc in domain.pieces:
            if sk < pc.s0 + pc.length or pc is domain.pieces[-1]:
                out[k] = pc.point(sk)
                break
    return out


def _sector_axis(domain: DomainSpec, z) -> np.ndarray:
    beta = float(domain.params.get("beta", math.pi / 4))
    R = float(domain.params.get("radius", 1.0))
    r = math.hypot(z[0], z[1])
    if r > 0.0 and abs(r - R) <= 1e-12 * R:
        return -np.asarray(z, float) / r
    if r == 0.0 or beta > math.pi / 2:
        return np.array([1.0, 0.0])
    ang = math.atan2(z[1], z[0])
    # inward normal of the straight edge
    if ang > 0.0:
        return np.array([math.sin(beta), -math.cos(beta)])
    return np.array([math.sin(beta), math.cos(beta)])


def cone_axis(domain: DomainSpec, z) -> np.ndarray:
    """Axis of the exterior cone at boundary point ``z``."""
    z = np.asarray(z, float)
    s = domain.shape
    if s in ("half_plane", "slit_plane"):
        return np.array([0.0, 1.0])
    if s == "unit_disk":
        return -z / np.linalg.norm(z)
    if s == "sector":
        return _sector_axis(domain, z)
    return polygon_axis(domain.vertices, z)[0]


def boundary_sample(domain: DomainSpec, n: int, gamma: float) -> list[tuple[np.ndarray, BoundaryCone]]:
    """``n`` boundary points with cones of half-aperture ``gamma`` containing the domain."""
    beta = domain.metadata.exterior_cone_beta
    if beta is None:
        raise ValueError(f"{domain.shape} has no exterior cone condition")
    if gamma < beta - ANGLE_TOL:
        raise ConeTooNarrowError(f"gamma={gamma:g} is narrower than beta={beta:g}")
    if gamma > math.pi + ANGLE_TOL:
        raise ConeTooNarrowError(f"gamma={gamma:g} exceeds pi; such cones are not representable")
    return [(z, BoundaryCone(z, cone_axis(domain, z), gamma))
            for z in boundary_points(domain, n)]


def cone_contains(cone: BoundaryCone, x, slack: float = ANGLE_TOL) -> np.ndarray:
    """Whether points lie in the closed cone (the vertex itself counts as inside)."""
    r, th = cone.angles(x)
    return (r == 0.0) | (th <= cone.aperture + slack)


# -- grids --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteDomain:
    """Node-centred grid over the domain window; arrays are indexed ``[i, j]`` = (x, y)."""

    spec: DomainSpec
    h: float
    origin: np.ndarray
    shape: tuple
    inside: np.ndarray
    delta: np.ndarray
    proj: np.ndarray

    @property
    def extents(self) -> tuple:
        return tuple(self.origin + self.h * (np.asarray(self.shape) - 1))

    @property
    def n_inside(self) -> int:
        return int(self.inside.sum())

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin[0] + self.h * np.arange(self.shape[0])
        ys = self.origin[1] + self.h * np.arange(self.shape[1])
        return np.meshgrid(xs, ys, indexing="ij")

    def points(self) -> np.ndarray:
        X, Y = self.coords()
        return np.stack([X[self.inside], Y[self.inside]], axis=1)

    def delta_threshold(self, eps: float) -> np.ndarray:
        """Mask of the interior region ``delta > eps``."""
        return self.inside & (self.delta > eps)

    def to_csv(self, fh: IO[str]) -> None:
        X, Y = self.coords()
        fh.write("x,y,inside,delta\n")
        for x, y, m, d in zip(X.ravel(), Y.ravel(), self.inside.ravel(), self.delta.ravel()):
            fh.write(f"{x:.17g},{y:.17g},{int(m)},{d:.17g}\n")


def build_grid(domain: DomainSpec, h: float) -> DiscreteDomain:
    """Lattice nodes over the window; ``inside`` holds the strictly interior nodes."""
    if not h > 0.0:
        raise ValueError("h must be positive")
    lo = np.asarray(domain.window[0], float)
    hi = np.asarray(domain.window[1], float)
    n = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
    if np.any(n < 3):
        raise ResolutionError(f"h={h:g} too coarse for {domain.shape}")
    xs = lo[0] + h * np.arange(n[0])
    ys = lo[1] + h * np.arange(n[1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    strict = ((pts > lo + 1e-12 * h) & (pts < hi - 1e-12 * h)).all(axis=1)
    mask = strict & domain.contains(pts)
    delta = np.zeros(len(pts))
    proj = np.full((len(pts), 2), np.nan)
    if mask.any():
        d, P = domain._raw_distance(pts[mask])
        keep = d > 0.0
        idx = np.flatnonzero(mask)
        mask[idx[~keep]] = False
        delta[idx[keep]] = d[keep]
        proj[idx[keep]] = P[keep]
    if not mask.any():
        raise ResolutionError(f"no interior nodes for {domain.shape} at h={h:g}")
    shape = (int(n[0]), int(n[1]))
    mask2 = mask.reshape(shape)
    _, ncomp = ndimage.label(mask2)
    if ncomp != 1:
        raise ResolutionError(f"interior mask has {ncomp} components at h={h:g}; refine the grid")
    for arr in (mask2, delta, proj):
        arr.setflags(write=False)
    return DiscreteDomain(domain, float(h), lo, shape, mask2, delta.reshape(shape),
                          proj.reshape(shape + (2,)))
