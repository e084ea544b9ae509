"""Isoperimetric profiles, inequality checks and precondition tests."""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.stats import norm

from .geometry import (
    DirectionSet, SphericalMeasure, SupportVector, lp_combine, polytope_from_points,
    random_body, support_eval, wulff_shape, _merge_points,
)
from .measures import QUAD_TOL_FINE, body_mass, lp_surface_measure, mixed_measure, weighted_facet_areas
from .weights import (
    WeightProfile, ball_volume, check_mn_membership, inverse_radial_mass, radial_mass, total_mass,
)

TOL_PARALLEL = 1e-9
TOL_HEMISPHERE = 1e-12
THETA_SAMPLES = 4096


def max_threads():
    """Thread cap from MINK_THREADS (defaults to the CPU count)."""
    raw = os.environ.get("MINK_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def parallel_map(fn, items):
    """Order-preserving map over a thread pool capped by MINK_THREADS."""
    items = list(items)
    workers = min(max_threads(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- isoperimetric profiles ------------------------------------------------------

def bobkov_constant(s):
    if s > 1:
        raise ValueError("s-concavity parameter must be <= 1")
    if s > 0:
        return 1.0 / 16.0
    if s == 0:
        return 1.0 / 80.0
    return (2.0**-s - 1.0) / (40.0 * (2.0 ** (s * s - 2.0 * s) - 1.0))


@dataclass(frozen=True)
class IsoProfile:
    """Lower bound t -> I(t) for the boundary measure of sets of mass t."""

    kind: str
    dimension: int
    params: dict = field(default_factory=dict)

    @property
    def domain(self):
        if self.kind == "lebesgue":
            return (0.0, math.inf)
        if self.kind == "milman_rotem":
            return (0.0, math.inf)
        return (0.0, self.params.get("total", 1.0))

    def __call__(self, t):
        return iso_eval(self, t)

    @classmethod
    def lebesgue(cls, n):
        return cls("lebesgue", n)

    @classmethod
    def gaussian(cls, n):
        return cls("gaussian", n)

    @classmethod
    def bobkov(cls, n, s, median, total=1.0):
        """Bound for s-concave measures; ``median`` is the radius holding half the mass."""
        return cls("bobkov", n, {"s": float(s), "median": float(median), "total": float(total)})

    @classmethod
    def milman_rotem(cls, n, s, ball_mass):
        """Homogeneous measures whose density is s-concave (s > 0)."""
        if s <= 0:
            raise ValueError("density concavity exponent must be positive")
        return cls("milman_rotem", n, {"s": float(s), "ball_mass": float(ball_mass)})

    @classmethod
    def tabulated(cls, n, masses, values):
        return cls("custom", n, {"masses": list(map(float, masses)), "values": list(map(float, values)),
                                 "total": float(masses[-1])})


def iso_eval(profile, t):
    """Evaluate an isoperimetric profile (vectorised over ``t``)."""
    t = np.asarray(t, dtype=float)
    lo, hi = profile.domain
    if np.any(t < lo) or np.any(t > hi) or np.any(np.isnan(t)):
        raise ValueError(f"mass outside the profile domain [{lo}, {hi}]")
    n = profile.dimension
    k = profile.kind
    if k == "lebesgue":
        out = n * ball_volume(n) ** (1.0 / n) * t ** ((n - 1.0) / n)
    elif k == "gaussian":
        out = norm.pdf(norm.ppf(t))
    elif k == "bobkov":
        s, m, tot = profile.params["s"], profile.params["median"], profile.params["total"]
        frac = t / tot
        out = tot * bobkov_constant(s) / m * np.minimum(frac, 1.0 - frac) ** (1.0 - s)
    elif k == "milman_rotem":
        q = 1.0 / (1.0 / profile.params["s"] + n)
        out = (1.0 / q) * profile.params["ball_mass"] ** q * t ** (1.0 - q)
    elif k == "custom":
        out = np.interp(t, profile.params["masses"], profile.params["values"])
    else:
        raise ValueError(f"unknown profile kind {k!r}")
    return float(out) if out.ndim == 0 else out


def default_profile(w):
    """Profile matched to a weight, or None when no bound is known."""
    n = w.dimension
    scale = w.params.get("scale", 1.0)
    if w.kind == "gaussian" and scale == 1.0:
        return IsoProfile.gaussian(n)
    if w.kind == "lebesgue" and scale == 1.0:
        return IsoProfile.lebesgue(n)
    if w.kind == "cauchy" and w.params["b"] == 2.0 and w.params["q"] > n and scale == 1.0:
        # density with (1 + t^2)^(-q): (-1/q)-concave, so the measure is s-concave
        s = -1.0 / (w.params["q"] - n)
        tot = total_mass(w)
        return IsoProfile.bobkov(n, s, inverse_radial_mass(w, tot / 2), tot)
    return None


def lp_iso_function(profile, p, n):
    """t -> (n t)^(1-p) I(t)^p."""
    return lambda t: (n * t) ** (1.0 - p) * iso_eval(profile, t) ** p


@dataclass(frozen=True)
class LpIsoResult:
    lhs: float
    rhs: float
    holds: bool
    jensen_lhs: float
    jensen_rhs: float
    jensen_holds: bool
    mass: float
    perimeter: float
    self_mixed: float


def lp_iso_bound(K, w, p, profile, tol=1e-9, quad_tol=QUAD_TOL_FINE):
    """Compare S^mu_p(K) with (n mu(K))^(1-p) I(mu(K))^p, plus the Jensen step."""
    if p < 1:
        raise ValueError("the L^p isoperimetric bound needs p >= 1")
    n = K.dimension
    S = weighted_facet_areas(K, w, quad_tol)
    Sp = lp_surface_measure(K, w, p, areas=S).total
    m = body_mass(K, w, tol=quad_tol)
    per = float(np.sum(S))
    kk = mixed_measure(K, K, w, areas=S)
    rhs = (n * m) ** (1.0 - p) * iso_eval(profile, m) ** p
    j_lhs = Sp ** (1.0 / p)
    j_rhs = kk ** ((1.0 - p) / p) * per
    return LpIsoResult(
        lhs=Sp, rhs=rhs, holds=bool(Sp >= rhs - tol * max(1.0, abs(rhs))),
        jensen_lhs=j_lhs, jensen_rhs=j_rhs, jensen_holds=bool(j_lhs >= j_rhs - tol * max(1.0, j_rhs)),
        mass=m, perimeter=per, self_mixed=kk,
    )


# -- subspace concentration ---------------------------------------------------------

@dataclass(frozen=True)
class SubspaceResult:
    holds: bool
    strict: bool
    worst_dimension: int
    worst_basis: np.ndarray
    worst_mass: float
    bound: float

    @property
    def ratio(self):
        return self.worst_mass / self.bound


def check_subspace_concentration(nu, strict=True, tol=1e-12):
    """Test nu(xi cap S) <= (dim xi / n) nu(S) over spans of data directions."""
    u, v = nu.directions.units, nu.values
    n = u.shape[1]
    total = float(np.sum(v))
    cos = u @ u.T
    line_mass = (np.abs(cos) >= 1.0 - TOL_PARALLEL) @ v
    i = int(np.argmax(line_mass))
    best = (line_mass[i] / (total / n), 1, u[i:i + 1].copy(), float(line_mass[i]), total / n)
    if n == 3:
        a, b = np.triu_indices(len(u), 1)
        keep = np.abs(cos[a, b]) < 1.0 - TOL_PARALLEL
        normals = np.cross(u[a[keep]], u[b[keep]])
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        normals *= np.where(normals[:, [2]] < 0, -1.0, 1.0)
        if len(normals):
            normals, _ = _merge_points(normals, 1e-10)
            normals /= np.linalg.norm(normals, axis=1, keepdims=True)
            masses = np.zeros(len(normals))
            for s in range(0, len(normals), 2048):
                blk = normals[s:s + 2048]
                masses[s:s + 2048] = (np.abs(blk @ u.T) <= TOL_PARALLEL) @ v
            j = int(np.argmax(masses))
            bound = 2.0 * total / 3.0
            if masses[j] / bound > best[0]:
                nrm = normals[j]
                e1 = np.cross(nrm, [1.0, 0, 0] if abs(nrm[0]) < 0.9 else [0, 1.0, 0])
                e1 /= np.linalg.norm(e1)
                best = (masses[j] / bound, 2, np.vstack([e1, np.cross(nrm, e1)]), float(masses[j]), bound)
    ratio, dim, basis, mass, bound = best
    holds = ratio < 1.0 - tol if strict else ratio <= 1.0 + tol
    return SubspaceResult(bool(holds), strict, dim, basis, mass, bound)


# -- hemisphere constant ---------------------------------------------------------------

@dataclass(frozen=True)
class HemisphereResult:
    value: float
    theta: np.ndarray
    concentrated: bool
    c_nu: Optional[float] = None


def _hemisphere_objective(u, v, p, symmetric):
    total = float(np.sum(v))

    def f(theta):
        d = theta @ u.T
        g = np.abs(d) if symmetric else np.maximum(d, 0.0)
        return (np.sum(v * g**p, axis=-1) / total) ** (1.0 / p)

    return f


def _theta_candidates(u):
    n = u.shape[1]
    if n == 2:
        ang = 2 * math.pi * np.arange(THETA_SAMPLES) / THETA_SAMPLES
        base = np.arctan2(u[:, 1], u[:, 0])
        ang = np.concatenate([ang, base + math.pi / 2, base - math.pi / 2, base, base + math.pi])
        return np.column_stack([np.cos(ang), np.sin(ang)])
    cand = [DirectionSet.fibonacci_sphere(THETA_SAMPLES).units, u, -u]
    if len(u) <= 256:
        a, b = np.triu_indices(len(u), 1)
        c = np.cross(u[a], u[b])
        nc = np.linalg.norm(c, axis=1)
        c = c[nc > 1e-12] / nc[nc > 1e-12, None]
        cand += [c, -c]
    return np.vstack(cand)


def hemisphere_constant(nu, p=1.0, symmetric=None):
    """min over theta of [(1/|nu|) sum nu_i g(<theta, u_i>)^p]^(1/p).

    ``g = |.|`` for even data, ``g = (.)_+`` otherwise.  A grid of theta is
    refined by Nelder-Mead from the eight best points.
    """
    if p <= 0:
        raise ValueError("hemisphere constant is defined for p > 0")
    u, v = nu.directions.units, nu.values
    sym = nu.is_even if symmetric is None else symmetric
    f = _hemisphere_objective(u, v, p, sym)
    cand = _theta_candidates(u)
    vals = f(cand)
    order = np.argsort(vals)[:8]
    best_val, best_theta = float(vals[order[0]]), cand[order[0]]
    n = u.shape[1]
    for k in order:
        x0 = _to_angles(cand[k])
        res = optimize.minimize(lambda x: float(f(_from_angles(x, n))), x0, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400})
        if res.fun < best_val:
            best_val, best_theta = float(res.fun), _from_angles(res.x, n)
    c_nu = None
    if p >= 1:
        c_nu = best_val if p == 1 else hemisphere_constant(nu, 1.0, sym).value
    return HemisphereResult(best_val, best_theta, bool(best_val <= TOL_HEMISPHERE), c_nu)


def _to_angles(x):
    if len(x) == 2:
        return np.array([math.atan2(x[1], x[0])])
    return np.array([math.acos(max(-1.0, min(1.0, x[2]))), math.atan2(x[1], x[0])])


def _from_angles(a, n):
    if n == 2:
        return np.array([math.cos(a[0]), math.sin(a[0])])
    return np.array([math.sin(a[0]) * math.cos(a[1]), math.sin(a[0]) * math.sin(a[1]), math.cos(a[0])])


# -- concavity probe -------------------------------------------------------------------

@dataclass
class ProbeReport:
    trials: int
    min_slack: float
    min_slack_lp: float
    p: float
    failures: list
    tolerance: float

    @property
    def passed(self):
        return not self.failures


def minkowski_combination(K, L, lam):
    """Exact (1-lam) K + lam L as the hull of pairwise vertex sums."""
    pts = ((1.0 - lam) * K.vertices[:, None, :] + lam * L.vertices[None, :, :]).reshape(-1, K.dimension)
    return polytope_from_points(pts)


def _dense_directions(n, K, L, count=1024):
    base = DirectionSet.isotropic(n, count).units
    u = np.vstack([base, K.normals[K.active], L.normals[L.active]])
    u, _ = _merge_points(u, 1e-9)
    return DirectionSet(u / np.linalg.norm(u, axis=1, keepdims=True))


def lp_combination(K, L, lam, p, count=1024):
    """Wulff shape of the Firey combination sampled on a dense direction set.

    This circumscribes the exact L^p combination and converges to it as the
    direction set is refined.
    """
    d = _dense_directions(K.dimension, K, L, count)
    hK = SupportVector(d, support_eval(K, d.units))
    hL = SupportVector(d, support_eval(L, d.units))
    return wulff_shape(lp_combine(hK, hL, lam, p))


def concavity_slack(w, K, L, lam, exponent=None, p=1.0):
    """mu(M)^e - [(1-lam) mu(K)^e + lam mu(L)^e] for the combination M."""
    e = 1.0 / K.dimension if exponent is None else exponent
    M = minkowski_combination(K, L, lam) if p == 1 else lp_combination(K, L, lam, p)
    mK, mL, mM = body_mass(K, w), body_mass(L, w), body_mass(M, w)
    return mM**e - ((1.0 - lam) * mK**e + lam * mL**e)


def ball_concavity_slack(w, r, R, lam, exponent=None):
    """One-dimensional oracle: concavity of radial mass^(1/n) along radii."""
    e = 1.0 / w.dimension if exponent is None else exponent
    mid = radial_mass(w, (1.0 - lam) * r + lam * R)
    return mid**e - ((1.0 - lam) * radial_mass(w, r) ** e + lam * radial_mass(w, R) ** e)


def concavity_probe(w, trials=200, seed=0, p=2.0, tol=1e-8, require_membership=True):
    """Monte-Carlo check of (1/n)-concavity over random symmetric polytopes."""
    if require_membership and check_mn_membership(w).holds is not True:
        raise ValueError("concavity probe needs a weight in the rotationally decreasing class")
    n = w.dimension

    def trial(k):
        rng = np.random.default_rng([seed, k])
        K = random_body(rng, n, int(rng.integers(4, 17)))
        L = random_body(rng, n, int(rng.integers(4, 17)))
        lam = float(rng.uniform(0.05, 0.95))
        s1 = concavity_slack(w, K, L, lam)
        sp = concavity_slack(w, K, L, lam, p=p) if p != 1 else s1
        return k, s1, sp

    rows = parallel_map(trial, range(trials))
    failures = [{"seed": seed, "trial": k, "slack": s1, "slack_lp": sp}
                for k, s1, sp in rows if s1 < -tol or sp < -tol]
    return ProbeReport(trials, min(r[1] for r in rows), min(r[2] for r in rows), p, failures, tol)


# -- uniqueness comparison ---------------------------------------------------------------

@dataclass(frozen=True)
class UniquenessGap:
    lhs: float
    rhs: float
    holds: bool
    vacuous: bool
    measure_gap: float
    equal_masses: bool
    equality_slack: Optional[float] = None
    equality_in_concavity: Optional[bool] = None


def concavity_transform(kind, s=None):
    """(F, F') for F = t^s (log for s = 0) or F = inverse normal CDF."""
    if kind == "power":
        if s is None:
            raise ValueError("power transform needs an exponent")
        if s == 0:
            return np.log, lambda t: 1.0 / t
        return (lambda t: t**s), (lambda t: s * t ** (s - 1.0))
    if kind == "gaussian":
        return norm.ppf, (lambda t: 1.0 / norm.pdf(norm.ppf(t)))
    raise ValueError(f"unknown transform {kind!r}")


def uniqueness_gap(K, L, w, p, kind="power", s=None, tol=1e-6, mass_tol=1e-9, lam=0.5):
    """Evaluate both sides of the F-concavity uniqueness comparison."""
    if s is None and kind == "power":
        s = 1.0 / K.dimension
    F, dF = concavity_transform(kind, s)
    SK = lp_surface_measure(K, w, p, QUAD_TOL_FINE).values
    SL = lp_surface_measure(L, w, p, QUAD_TOL_FINE).values
    if SK.shape != SL.shape or not np.allclose(K.normals, L.normals):
        gap = math.inf
    else:
        gap = float(np.max(np.abs(SK - SL)) / max(np.max(np.abs(SK)), 1e-300))
    mK = body_mass(K, w, tol=QUAD_TOL_FINE)
    mL = body_mass(L, w, tol=QUAD_TOL_FINE)
    diff = F(mL) - F(mK)
    lhs, rhs = float(diff / dF(mK)), float(diff / dF(mL))
    equal = abs(mK - mL) <= mass_tol * max(1.0, mK)
    eq_slack = eq_flag = None
    if equal:
        M = minkowski_combination(K, L, lam) if p == 1 else lp_combination(K, L, lam, p)
        eq_slack = float(F(body_mass(M, w, tol=QUAD_TOL_FINE)) - ((1 - lam) * F(mK) + lam * F(mL)))
        eq_flag = bool(abs(eq_slack) <= tol)
    return UniquenessGap(lhs, rhs, bool(lhs <= rhs + 1e-12 * max(1.0, abs(rhs))), gap > tol, gap, equal,
                         eq_slack, eq_flag)
