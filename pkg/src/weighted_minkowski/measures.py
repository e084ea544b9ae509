"""Weighted masses and surface measures of polytopes.

For a density ``psi(|x|)`` the weighted surface area of facet ``F_i`` is
``int_{F_i} psi(|y|) dy``; on that facet ``<y, n(y)> = h_i``, so the L^p and
cone measures are plain reweightings of the facet integrals.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import DirectionSet, Polytope, SupportVector, radial_eval, support_eval
from .quadrature import integrate_intervals, integrate_triangles
from .weights import WeightProfile, sphere_area

QUAD_TOL = 1e-8
QUAD_TOL_FINE = 1e-12
RADIAL_SAMPLES_3D = 20000


@dataclass(frozen=True, eq=False)
class WeightedSurfaceMeasure:
    normals: np.ndarray
    values: np.ndarray
    p: float
    weight: WeightProfile
    body: Polytope

    @property
    def total(self):
        return float(np.sum(self.values))


# -- facet geometry helpers ------------------------------------------------------

def _edges_2d(K):
    idx = np.nonzero(K.active)[0]
    a = np.array([K.vertices[K.facets[i][0]] for i in idx]).reshape(-1, 2)
    b = np.array([K.vertices[K.facets[i][1]] for i in idx]).reshape(-1, 2)
    return idx, a, b


def _facet_triangles(K):
    """Fan triangulation of each active facet from the foot of the origin's
    perpendicular when it lies inside the facet, else from the centroid."""
    owner, A, B, C = [], [], [], []
    for i in np.nonzero(K.active)[0]:
        poly = K.vertices[list(K.facets[i])]
        u = K.normals[i]
        foot = K.offsets[i] * u
        nxt = np.roll(poly, -1, axis=0)
        inside = np.all(np.cross(nxt - poly, foot - poly) @ u >= -1e-14)
        apex = foot if inside else poly.mean(axis=0)
        for a, b in zip(poly, nxt):
            if np.linalg.norm(np.cross(a - apex, b - apex)) > 0:
                owner.append(i)
                A.append(apex)
                B.append(a)
                C.append(b)
    return np.array(owner, dtype=int), np.array(A), np.array(B), np.array(C)


def _facet_integrals(K, integrand, tol):
    """int_{F_i} integrand(y, i) dy for all facets (zeros on inactive ones)."""
    out = np.zeros(len(K.normals))
    if K.dimension == 2:
        idx, a, b = _edges_2d(K)
        # split each edge at the foot of the perpendicular from the origin
        d = b - a
        length = np.linalg.norm(d, axis=1)
        s_foot = np.clip(-np.einsum("ij,ij->i", a, d) / length**2, 0.0, 1.0)
        lo = np.concatenate([np.zeros_like(s_foot), s_foot])
        hi = np.concatenate([s_foot, np.ones_like(s_foot)])
        seg = np.concatenate([np.arange(len(idx))] * 2)

        def fun(s, owner):
            e = seg[owner]
            y = a[e][:, None, :] + s[..., None] * d[e][:, None, :]
            return length[e][:, None] * integrand(y, idx[e])

        vals = integrate_intervals(fun, lo, hi, tol=tol)
        np.add.at(out, idx[seg], vals)
        return out
    owner, A, B, C = _facet_triangles(K)
    vals = integrate_triangles(lambda y, o: integrand(y, owner[o]), A, B, C, tol=tol)
    np.add.at(out, owner, vals)
    return out


# -- weighted surface measures ------------------------------------------------------

def weighted_facet_areas(K, w, tol=QUAD_TOL):
    """S^mu_K({u_i}) for every direction (zero on inactive facets)."""
    _check_dim(K, w)
    return _facet_integrals(K, lambda y, i: w.psi(np.linalg.norm(y, axis=-1)), tol)


def weighted_facet_area(K, w, i, tol=QUAD_TOL):
    if not K.active[i]:
        raise ValueError(f"facet {i} is inactive")
    return float(weighted_facet_areas(K, w, tol)[i])


def weighted_perimeter(K, w, tol=QUAD_TOL):
    return float(np.sum(weighted_facet_areas(K, w, tol)))


def lp_surface_measure(K, w, p, tol=QUAD_TOL, areas=None):
    """h_i^(1-p) S^mu_K({u_i}); p = 0 is the weighted cone measure."""
    if p != 1 and np.any(K.offsets[K.active] <= 0):
        raise ValueError("L^p surface measure needs the origin in the interior")
    S = weighted_facet_areas(K, w, tol) if areas is None else areas
    vals = np.where(K.active, K.offsets ** (1.0 - p) * S, 0.0)
    return WeightedSurfaceMeasure(K.normals, vals, p, w, K)


def cone_measure(K, w, tol=QUAD_TOL):
    return lp_surface_measure(K, w, 0.0, tol)


# -- body mass ------------------------------------------------------------------

def body_mass(K, w, method="cone", tol=QUAD_TOL, samples=RADIAL_SAMPLES_3D):
    """mu(K) for a polytope with the origin in its interior.

    ``method="cone"`` sums cone integrals h_i int_{F_i} R(|y|) |y|^(-n) dy
    over facets, with R the radial primitive of the density.
    ``method="radial"`` integrates R(rho_K(u)) over the sphere: exactly on
    angular arcs for polygons, on a Fibonacci sample in R^3.
    ``method="check"`` evaluates both and returns ``(cone, radial)``.
    """
    _check_dim(K, w)
    if method == "check":
        return body_mass(K, w, "cone", tol), body_mass(K, w, "radial", tol, samples)
    n = K.dimension
    if method == "cone":
        h = K.offsets

        def integrand(y, i):
            r = np.linalg.norm(y, axis=-1)
            return h[i][:, None] * w.radial_primitive(r, tol=1e-15) / r**n

        return float(np.sum(_facet_integrals(K, integrand, tol)))
    if method == "radial":
        if n == 2:
            return _radial_mass_2d(K, w, tol)
        u = DirectionSet.fibonacci_sphere(samples + samples % 2).units
        return float(sphere_area(3) * np.mean(w.radial_primitive(radial_eval(K, u))))
    raise ValueError(f"unknown mass method {method!r}")


def _radial_mass_2d(K, w, tol):
    V = K.vertices
    ang = np.arctan2(V[:, 1], V[:, 0])
    order = np.argsort(ang)
    ang = ang[order]
    lo = ang
    hi = np.concatenate([ang[1:], ang[:1] + 2 * math.pi])

    def fun(theta, owner):
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        rho = radial_eval(K, u.reshape(-1, 2)).reshape(theta.shape)
        return w.radial_primitive(rho, tol=1e-15)

    return float(np.sum(integrate_intervals(fun, lo, hi, tol=tol)))


# -- mixed measures -----------------------------------------------------------

def _support_at_normals(K, L):
    if isinstance(L, SupportVector):
        if len(L.values) != len(K.normals):
            raise ValueError("support vector does not match the body's directions")
        return L.values
    if isinstance(L, Polytope):
        return support_eval(L, K.normals)
    if callable(L):
        return np.asarray(L(K.normals), dtype=float)
    return np.broadcast_to(np.asarray(L, dtype=float), (len(K.normals),))


def mixed_measure(K, L, w, tol=QUAD_TOL, areas=None):
    """mu(K; L) = sum_i h_L(u_i) S^mu_K({u_i}); ``L`` may be a body,
    support vector, callable on normals, or constant."""
    S = weighted_facet_areas(K, w, tol) if areas is None else areas
    hL = _support_at_normals(K, L)
    return float(np.sum(np.where(K.active, hL * S, 0.0)))


def lp_mixed_measure(K, L, w, p, tol=QUAD_TOL, areas=None):
    """mu_p(K; L) = (1/p) sum_i h_L(u_i)^p S^mu_{K,p}({u_i})."""
    if p < 1:
        raise ValueError("L^p mixed measure requires p >= 1")
    Sp = lp_surface_measure(K, w, p, tol, areas).values
    hL = _support_at_normals(K, L)
    return float(np.sum(np.where(K.active, hL**p * Sp, 0.0))) / p


# -- first variation ------------------------------------------------------------

def mass_first_variation(K, w, f, variation="linear", p=1.0, tol=QUAD_TOL_FINE, areas=None):
    """Analytic derivative at t = 0 of mu along a perturbation f of h_K.

    ``linear``: d/dt mu([h + t f]) = sum_i f_i S^mu_K({u_i}).
    ``lp``: d/dt mu([(h^p + t f)^(1/p)]) = (1/p) sum_i f_i S^mu_{K,p}({u_i}), p != 0.
    ``log``: d/dt mu([h exp(t f)]) = sum_i f_i S^mu_{K,0}({u_i}).
    """
    S = weighted_facet_areas(K, w, tol) if areas is None else areas
    f = np.asarray(f, dtype=float)
    if variation == "linear":
        return float(np.sum(np.where(K.active, f * S, 0.0)))
    if variation == "lp":
        if p == 0:
            raise ValueError("use the log variation for p = 0")
        return float(np.sum(f * lp_surface_measure(K, w, p, areas=S).values)) / p
    if variation == "log":
        return float(np.sum(f * lp_surface_measure(K, w, 0.0, areas=S).values))
    raise ValueError(f"unknown variation {variation!r}")


# -- second variation -----------------------------------------------------------

def _edge_table(K):
    """Pairs of adjacent active facets with their shared edge endpoints."""
    pairs, ends = [], []
    if K.dimension == 2:
        idx = np.nonzero(K.active)[0]
        by_start = {K.facets[i][0]: i for i in idx}
        for i in idx:
            j = by_start[K.facets[i][1]]
            v = K.vertices[K.facets[i][1]]
            pairs.append((i, j))
            ends.append((v, v))
    else:
        seen = {}
        for i in np.nonzero(K.active)[0]:
            f = K.facets[i]
            for a, b in zip(f, f[1:] + f[:1]):
                key = (min(a, b), max(a, b))
                if key in seen:
                    pairs.append((seen[key], i))
                    ends.append((K.vertices[a], K.vertices[b]))
                else:
                    seen[key] = i
    return np.array(pairs, dtype=int).reshape(-1, 2), np.array(ends).reshape(-1, 2, K.dimension)


def mass_hessian(K, w, tol=QUAD_TOL_FINE):
    """d S^mu_K({u_i}) / d h_j at the Wulff shape of ``K.support``.

    Off-diagonal entries are edge integrals of psi divided by the sine of the
    dihedral angle; diagonal entries combine the neighbours with the normal
    derivative of the density over the facet.
    """
    N = len(K.normals)
    H = np.zeros((N, N))
    pairs, ends = _edge_table(K)
    if len(pairs):
        ui, uj = K.normals[pairs[:, 0]], K.normals[pairs[:, 1]]
        cos = np.einsum("ij,ij->i", ui, uj)
        sin = np.sqrt(np.maximum(1.0 - cos**2, 1e-300))
        if K.dimension == 2:
            edge = w.psi(np.linalg.norm(ends[:, 0], axis=1))
        else:
            a, b = ends[:, 0], ends[:, 1]
            d = b - a
            L = np.linalg.norm(d, axis=1)

            def fun(s, owner):
                y = a[owner][:, None, :] + s[..., None] * d[owner][:, None, :]
                return L[owner][:, None] * w.psi(np.linalg.norm(y, axis=-1))

            edge = integrate_intervals(fun, np.zeros(len(L)), np.ones(len(L)), tol=tol)
        off = edge / sin
        H[pairs[:, 0], pairs[:, 1]] += off
        H[pairs[:, 1], pairs[:, 0]] += off
        np.add.at(H, (pairs[:, 0], pairs[:, 0]), -cos * off)
        np.add.at(H, (pairs[:, 1], pairs[:, 1]), -cos * off)
    h = K.offsets

    def normal_derivative(y, i):
        r = np.linalg.norm(y, axis=-1)
        return w.dpsi(r) * h[i][:, None] / r

    H[np.diag_indices(N)] += _facet_integrals(K, normal_derivative, tol)
    return H


def _check_dim(K, w):
    if K.dimension != w.dimension:
        raise ValueError(f"body dimension {K.dimension} differs from weight dimension {w.dimension}")
