"""Directions, support vectors and Wulff shapes of polytopes in R^2 and R^3.

A candidate body is parametrised by support numbers ``h_i`` over a fixed
direction list; its Wulff shape is the halfspace intersection
``{x : <x, u_i> <= h_i}``.  Directions whose halfspace does not touch the
intersection in a facet of positive area are kept as *inactive* facets with
zero area, so every per-direction table stays aligned with the input.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import DegenerateBodyError, UnboundedBodyError

TOL_UNIT = 1e-12
TOL_DUPLICATE = 1e-9
TOL_DEGENERATE = 1e-12
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


# -- directions ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Unit vectors in R^n (n = 2, 3) with optional quadrature weights."""

    units: np.ndarray
    quadrature_weights: Optional[np.ndarray] = None
    symmetric: bool = field(init=False)

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.units, dtype=float))
        if u.shape[1] not in (2, 3):
            raise ValueError("only dimensions 2 and 3 are supported")
        norms = np.linalg.norm(u, axis=1)
        if np.any(np.abs(norms - 1.0) > TOL_UNIT):
            raise ValueError("direction vectors must have unit length")
        tree = cKDTree(u)
        if tree.query_pairs(TOL_DUPLICATE):
            raise ValueError("duplicate directions")
        u.setflags(write=False)
        object.__setattr__(self, "units", u)
        if self.quadrature_weights is not None:
            qw = np.asarray(self.quadrature_weights, dtype=float)
            if qw.shape != (len(u),):
                raise ValueError("one quadrature weight per direction required")
            object.__setattr__(self, "quadrature_weights", qw)
        dist, _ = tree.query(-u)
        object.__setattr__(self, "symmetric", bool(np.all(dist <= TOL_DUPLICATE)))

    @property
    def dimension(self):
        return self.units.shape[1]

    def __len__(self):
        return self.units.shape[0]

    def antipodes(self):
        """Index of -u_i for each i (requires a symmetric set)."""
        if not self.symmetric:
            raise ValueError("direction set is not closed under negation")
        _, idx = cKDTree(self.units).query(-self.units)
        return idx

    @classmethod
    def from_vectors(cls, vectors, quadrature_weights=None, normalize=True):
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        if normalize:
            nrm = np.linalg.norm(v, axis=1, keepdims=True)
            # rows already unit to rounding are kept bit-for-bit so files round-trip
            v = np.where(np.abs(nrm - 1.0) <= 4 * np.finfo(float).eps, v, v / nrm)
        return cls(v, quadrature_weights)

    @classmethod
    def uniform_circle(cls, count, offset=0.0):
        """Equally spaced angles on S^1, weights 2*pi/count."""
        theta = offset + 2.0 * math.pi * np.arange(count) / count
        return cls(np.column_stack([np.cos(theta), np.sin(theta)]), np.full(count, 2.0 * math.pi / count))

    @classmethod
    def fibonacci_sphere(cls, count):
        """Antipodally symmetric Fibonacci points on S^2, weights 4*pi/count."""
        if count % 2 or count < 8:
            raise ValueError("fibonacci_sphere needs an even count >= 8")
        half = count // 2
        k = np.arange(half)
        z = (k + 0.5) / half
        r = np.sqrt(1.0 - z * z)
        phi = GOLDEN_ANGLE * k
        top = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
        return cls(np.vstack([top, -top]), np.full(count, 4.0 * math.pi / count))

    @classmethod
    def isotropic(cls, n, count):
        return cls.uniform_circle(count) if n == 2 else cls.fibonacci_sphere(count)

    def rotated(self, R):
        return DirectionSet(self.units @ np.asarray(R).T, self.quadrature_weights)


@dataclass(frozen=True, eq=False)
class SphericalMeasure:
    """Discrete measure: positive masses on a direction set."""

    directions: DirectionSet
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.directions),):
            raise ValueError("one mass per direction required")
        bad = np.nonzero(~(v > 0))[0]
        if bad.size:
            raise ValueError(f"masses must be positive (row {int(bad[0])})")
        object.__setattr__(self, "values", v)

    @property
    def total(self):
        return float(np.sum(self.values))

    @property
    def dimension(self):
        return self.directions.dimension

    @property
    def is_even(self):
        if not self.directions.symmetric:
            return False
        anti = self.directions.antipodes()
        return bool(np.allclose(self.values, self.values[anti], rtol=1e-12, atol=0.0))

    @classmethod
    def isotropic(cls, n, count, c=1.0):
        """``c`` times the quadrature discretisation of spherical Lebesgue measure."""
        d = DirectionSet.isotropic(n, count)
        return cls(d, c * d.quadrature_weights)

    def rotated(self, R):
        return SphericalMeasure(self.directions.rotated(R), self.values)


@dataclass(frozen=True, eq=False)
class SupportVector:
    directions: DirectionSet
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.directions),):
            raise ValueError("one support number per direction required")
        if not np.all(v > 0):
            raise ValueError("support numbers must be positive (origin in the interior)")
        object.__setattr__(self, "values", v)


# -- polytopes ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Polytope:
    """Wulff shape of a support vector.

    ``normals[i]``/``support[i]`` echo the input; ``offsets[i]`` is the true
    support value of the body at ``normals[i]`` (equal to ``support[i]`` on
    active facets).  ``facets[i]`` lists vertex indices of facet ``i``
    (counter-clockwise seen from outside; empty when inactive).
    """

    normals: np.ndarray
    support: np.ndarray
    offsets: np.ndarray
    active: np.ndarray
    facet_area: np.ndarray
    vertices: np.ndarray
    facets: tuple

    @property
    def dimension(self):
        return self.normals.shape[1]

    @property
    def volume(self):
        return float(np.sum(self.offsets * self.facet_area)) / self.dimension

    @property
    def surface_area(self):
        return float(np.sum(self.facet_area))

    @property
    def closure_defect(self):
        """|sum area_i u_i| relative to the total area (zero for closed bodies)."""
        return float(np.linalg.norm(self.facet_area @ self.normals) / max(self.surface_area, 1e-300))

    def vertex_cycle(self):
        """Vertices in counter-clockwise order (n = 2)."""
        if self.dimension != 2:
            raise ValueError("vertex cycle is defined for polygons only")
        return self.vertices

    def facet_vertices(self, i):
        return self.vertices[list(self.facets[i])]


def _check_values(h):
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)) or not np.all(h > 0):
        raise ValueError("support numbers must be finite and positive")
    return h


def wulff_shape(f, values=None):
    """Halfspace intersection of ``{<x,u_i> <= h_i}``.

    Accepts a :class:`SupportVector` or ``(directions, values)``.
    """
    if values is None:
        units, h = f.directions.units, f.values
    else:
        units = f.units if isinstance(f, DirectionSet) else np.asarray(f, dtype=float)
        h = values
    h = _check_values(h)
    if units.shape[1] == 2:
        return _wulff_2d(units, h)
    if units.shape[1] == 3:
        return _wulff_3d(units, h)
    raise ValueError("only dimensions 2 and 3 are supported")


def _wulff_2d(units, h):
    N = len(units)
    ang = np.arctan2(units[:, 1], units[:, 0])
    order = np.argsort(ang, kind="stable")
    _require_bounded_2d(ang[order])
    live = order.copy()
    while True:
        m = len(live)
        if m < 3:
            raise UnboundedBodyError("fewer than three supporting lines remain")
        prev, nxt = np.roll(live, 1), np.roll(live, -1)
        gap = np.mod(ang[nxt] - ang[prev], 2 * math.pi)
        x = _intersect_lines(units[prev], h[prev], units[nxt], h[nxt])
        with np.errstate(invalid="ignore"):
            slack = np.einsum("ij,ij->i", units[live], x) - h[live]
        scale = np.maximum(np.abs(h[live]), 1.0)
        redundant = (gap < math.pi - 1e-12) & (slack <= TOL_DEGENERATE * scale)
        if not redundant.any():
            break
        # drop an independent set of redundant lines so each test stays valid
        pick = redundant & ~np.roll(redundant, 1)
        if not pick.any():
            pick = np.zeros(m, bool)
            pick[np.argmax(redundant)] = True
        live = live[~pick]
    _require_bounded_2d(ang[live])
    verts = _polygon_vertices(units, h, live)
    length = np.linalg.norm(verts - np.roll(verts, 1, axis=0), axis=1)
    keep = length > TOL_DEGENERATE * np.maximum(1.0, h[live])
    if not keep.all():
        # zero-length edges: their lines pass through a vertex of the neighbours
        live = live[keep]
        verts = _polygon_vertices(units, h, live)
        length = np.linalg.norm(verts - np.roll(verts, 1, axis=0), axis=1)
    m = len(live)
    active = np.zeros(N, bool)
    area = np.zeros(N)
    facets = [()] * N
    for k, i in enumerate(live):
        active[i] = True
        area[i] = length[k]
        facets[i] = ((k - 1) % m, k)
    offsets = np.where(active, h, np.max(units @ verts.T, axis=1))
    offsets = np.minimum(offsets, h)
    if active.sum() < 3:
        raise DegenerateBodyError("polygon has empty interior")
    return Polytope(units, h, offsets, active, area, verts, tuple(facets))


def _polygon_vertices(units, h, live):
    nxt = np.roll(live, -1)
    return _intersect_lines(units[live], h[live], units[nxt], h[nxt])


def _require_bounded_2d(sorted_angles):
    gaps = np.diff(np.concatenate([sorted_angles, sorted_angles[:1] + 2 * math.pi]))
    if len(sorted_angles) < 3 or np.max(gaps) >= math.pi - 1e-12:
        raise UnboundedBodyError("directions lie in a closed half-plane; intersection is unbounded")


def _intersect_lines(u1, h1, u2, h2):
    det = u1[:, 0] * u2[:, 1] - u1[:, 1] * u2[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (h1 * u2[:, 1] - h2 * u1[:, 1]) / det
        y = (u1[:, 0] * h2 - u2[:, 0] * h1) / det
    return np.column_stack([x, y])


def _wulff_3d(units, h):
    N = len(units)
    if N < 4 or np.linalg.matrix_rank(units) < 3:
        raise UnboundedBodyError("directions lie in a closed hemisphere; intersection is unbounded")
    dual = units / h[:, None]
    try:
        hull = ConvexHull(dual)
    except QhullError as exc:
        raise DegenerateBodyError(f"dual hull failed: {exc}") from exc
    normal, off = hull.equations[:, :3], hull.equations[:, 3]
    if np.any(off > -TOL_DEGENERATE * np.max(np.abs(off))):
        raise UnboundedBodyError("directions lie in a closed hemisphere; intersection is unbounded")
    raw = normal / (-off)[:, None]
    verts, label = _merge_points(raw, 1e-9 * np.max(np.linalg.norm(raw, axis=1)))
    incident = [set() for _ in range(N)]
    for s, simplex in enumerate(hull.simplices):
        for i in simplex:
            incident[i].add(label[s])
    active = np.zeros(N, bool)
    area = np.zeros(N)
    facets = [()] * N
    for i in hull.vertices:
        idx = np.array(sorted(incident[i]))
        if len(idx) < 3:
            continue
        cyc = _ccw_cycle(verts[idx], units[i])
        idx = idx[cyc]
        a = _polygon_area_3d(verts[idx], units[i])
        if a > TOL_DEGENERATE * max(1.0, h[i]) ** 2:
            active[i] = True
            area[i] = a
            facets[i] = tuple(int(j) for j in idx)
    used = sorted({j for f in facets for j in f})
    remap = {old: new for new, old in enumerate(used)}
    verts = verts[used]
    facets = tuple(tuple(remap[j] for j in f) for f in facets)
    if active.sum() < 4:
        raise DegenerateBodyError("polyhedron has empty interior")
    offsets = np.where(active, h, np.minimum(np.max(units @ verts.T, axis=1), h))
    return Polytope(units, h, offsets, active, area, verts, facets)


def _merge_points(points, tol):
    """Cluster near-identical points; returns (unique points, label per input)."""
    tree = cKDTree(points)
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in tree.query_pairs(tol):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(points))])
    uniq, label = np.unique(roots, return_inverse=True)
    merged = np.array([points[roots == r].mean(axis=0) for r in uniq])
    return merged, label


def _ccw_cycle(pts, normal):
    c = pts.mean(axis=0)
    e1 = pts[0] - c
    e1 -= normal * (e1 @ normal)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    d = pts - c
    return np.argsort(np.arctan2(d @ e2, d @ e1))


def _polygon_area_3d(pts, normal):
    c = pts.mean(axis=0)
    cross = np.cross(pts - c, np.roll(pts, -1, axis=0) - c)
    return 0.5 * float(np.sum(cross @ normal))


def polytope_from_points(points):
    """Convex hull of points (origin strictly inside) as a :class:`Polytope`."""
    pts = np.asarray(points, dtype=float)
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateBodyError(f"hull failed: {exc}") from exc
    normals, offsets = hull.equations[:, :-1], -hull.equations[:, -1]
    if np.any(offsets <= 0):
        raise DegenerateBodyError("origin is not interior to the hull")
    # coplanar simplices share a facet normal
    normals, label = _merge_points(normals, 1e-10)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    off = np.array([offsets[label == k].mean() for k in range(len(normals))])
    return wulff_shape(normals, off)


# -- evaluation -------------------------------------------------------------

def support_eval(P, u):
    """h_P(u) = max over vertices of <u, v>; ``u`` may be one vector or a stack."""
    u = np.asarray(u, dtype=float)
    return np.max(u @ P.vertices.T, axis=-1)


def radial_eval(P, u):
    """rho_P(u) = min over facets with <u, u_i> > 0 of h_i / <u, u_i>."""
    u = np.asarray(u, dtype=float)
    nrm = P.normals[P.active]
    off = P.offsets[P.active]
    d = u @ nrm.T
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(d > 0, off / d, np.inf)
    return np.min(r, axis=-1)


def lp_combine(hK, hL, lam, p):
    """Firey combination ((1-lam) h_K^p + lam h_L^p)^(1/p), direction-wise."""
    if p < 1:
        raise ValueError("lp_combine requires p >= 1")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    if hK.directions is not hL.directions and not np.array_equal(hK.directions.units, hL.directions.units):
        raise ValueError("support vectors use different direction sets")
    vals = ((1.0 - lam) * hK.values**p + lam * hL.values**p) ** (1.0 / p)
    return SupportVector(hK.directions, vals)


def hausdorff_to_ball(P, radius):
    """Exact Hausdorff distance between P (origin interior) and the ball of ``radius``."""
    far = float(np.max(np.linalg.norm(P.vertices, axis=1)))
    near = float(np.min(P.offsets[P.active]))
    return max(far - radius, radius - near, 0.0)


def hausdorff_distance(P, Q, samples=4096):
    """sup_u |h_P(u) - h_Q(u)|.

    Exact in both dimensions. Polygons use piecewise-sinusoidal maximisation
    between breakpoints; in R^3 the distance is the largest vertex-to-body
    distance, each computed against the facet polygons.
    """
    if P.dimension != Q.dimension:
        raise ValueError("dimension mismatch")
    if P.dimension == 2:
        return _hausdorff_2d(P, Q, samples)
    return max(max((_point_distance_3d(v, Q) for v in P.vertices), default=0.0),
               max((_point_distance_3d(v, P) for v in Q.vertices), default=0.0))


def _point_distance_3d(x, P):
    act = np.flatnonzero(P.active)
    gap = P.normals[act] @ x - P.offsets[act]
    if np.all(gap <= 0):
        return 0.0
    best = math.inf
    for i in act[gap > 0]:
        # the nearest boundary point lies on a facet whose halfspace x violates
        u = P.normals[i]
        F = P.vertices[list(P.facets[i])]
        y = x - (x @ u - P.offsets[i]) * u
        E = np.roll(F, -1, axis=0) - F
        side = np.cross(E, y - F) @ u
        if np.all(side >= 0) or np.all(side <= 0):
            best = min(best, abs(x @ u - P.offsets[i]))
            continue
        s = np.clip(np.einsum("ij,ij->i", x - F, E) / np.einsum("ij,ij->i", E, E), 0.0, 1.0)
        best = min(best, float(np.min(np.linalg.norm(F + s[:, None] * E - x, axis=1))))
    return float(best)


def _hausdorff_2d(P, Q, samples):
    nrm = np.vstack([P.normals[P.active], Q.normals[Q.active]])
    brk = np.sort(np.arctan2(nrm[:, 1], nrm[:, 0]))
    ext = np.concatenate([brk, brk[:1] + 2 * math.pi])
    mid = 0.5 * (ext[:-1] + ext[1:])
    umid = np.column_stack([np.cos(mid), np.sin(mid)])
    vp = P.vertices[np.argmax(umid @ P.vertices.T, axis=1)]
    vq = Q.vertices[np.argmax(umid @ Q.vertices.T, axis=1)]
    d = vp - vq
    extrema = np.arctan2(d[:, 1], d[:, 0])
    dense = 2 * math.pi * np.arange(samples) / samples
    ang = np.concatenate([brk, extrema, extrema + math.pi, dense])
    U = np.column_stack([np.cos(ang), np.sin(ang)])
    return float(np.max(np.abs(support_eval(P, U) - support_eval(Q, U))))


# -- random bodies -------------------------------------------------------------

def random_directions(rng, n, count):
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_body(rng, n, count=None, symmetric=True, sigma=0.3, max_tries=100):
    """Random Wulff polytope with log-normal support numbers.

    Symmetric bodies use ``count`` antipodal pairs.  Degenerate or unbounded
    draws are rejected and redrawn.
    """
    for _ in range(max_tries):
        m = count if count is not None else int(rng.integers(4, 17))
        u = random_directions(rng, n, m)
        h = np.exp(sigma * rng.standard_normal(m))
        if symmetric:
            u = np.vstack([u, -u])
            h = np.concatenate([h, h])
        try:
            d = DirectionSet(u)
            return wulff_shape(SupportVector(d, h))
        except (UnboundedBodyError, DegenerateBodyError, ValueError):
            continue
    raise DegenerateBodyError("could not draw a non-degenerate random body")


def random_rotation(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
