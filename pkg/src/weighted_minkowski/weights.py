"""Rotationally invariant weights and their scalar analysis.

A weight is a radial density ``psi`` on ``[0, inf)``; the measure on R^n has
density ``psi(|x|)``.  Besides mass evaluation this module analyses the
isotropic profile ``g(t) = t**(n-p) * psi(t)``: ball solutions of the
isotropic problem with datum ``c`` times spherical Lebesgue measure are
exactly the roots of ``g(t) = c``.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate, optimize, special
from scipy.interpolate import PchipInterpolator

from .errors import InfiniteMassError, OutOfRangeError, PreconditionError
from .quadrature import integrate_intervals

TOL_ROOT = 1e-10
TOL_CONVEX = 1e-9
GRID_POINTS = 512
MASS_CAP = 1e8
PSI_FLOOR = 1e-280


def sphere_area(n):
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(n):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


class Verdict(NamedTuple):
    """Outcome of a property check; ``holds`` is None when undetermined."""

    holds: Optional[bool]
    detail: str = ""

    @property
    def undetermined(self):
        return self.holds is None


class IncompleteRootsWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class WeightProfile:
    """Radial density defining a rotationally invariant measure on R^n.

    Use the named constructors (:meth:`gaussian`, :meth:`cauchy`,
    :meth:`power`, :meth:`lebesgue`, :meth:`tabulated`, :meth:`custom`)
    rather than the raw initializer.
    """

    dimension: int
    kind: str
    params: dict
    psi_fn: Callable
    dpsi_fn: Optional[Callable] = None
    support_sup: float = math.inf
    tail_exponent_hint: Optional[float] = None
    psi0: float = math.nan
    primitive_fn: Optional[Callable] = field(default=None, repr=False)
    mn_member: Optional[bool] = None
    singular_at_origin: bool = False

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")

    # -- evaluation ---------------------------------------------------
    def psi(self, t):
        t = np.asarray(t, dtype=float)
        out = np.asarray(self.psi_fn(t), dtype=float)
        return np.where(t > self.support_sup, 0.0, out) if math.isfinite(self.support_sup) else out

    def dpsi(self, t):
        t = np.asarray(t, dtype=float)
        if self.dpsi_fn is not None:
            return np.asarray(self.dpsi_fn(t), dtype=float)
        h = 1e-6 * np.maximum(1.0, t)
        lo = np.maximum(t - h, 0.5 * t)
        return (self.psi(t + h) - self.psi(lo)) / (t + h - lo)

    def g(self, t, p):
        """Isotropic profile t^(n-p) psi(t)."""
        t = np.asarray(t, dtype=float)
        return t ** (self.dimension - p) * self.psi(t)

    def radial_primitive(self, r, tol=1e-13):
        """R(r) = int_0^r psi(t) t^(n-1) dt, vectorised over ``r``."""
        r = np.asarray(r, dtype=float)
        if self.primitive_fn is not None:
            return np.asarray(self.primitive_fn(r), dtype=float)
        flat = np.atleast_1d(r).ravel()
        n = self.dimension
        upper = np.minimum(flat, self.support_sup)
        # integrate over s in (0, 1): r^n psi(r s) s^(n-1); graded panels near 0
        # absorb an integrable singularity of psi at the origin.
        edges = np.array([0.0, 1e-8, 1e-6, 1e-4, 1e-2, 0.1, 1.0]) if self.singular_at_origin else np.array([0.0, 1.0])
        m = len(edges) - 1
        owner_r = np.repeat(upper, m)
        lo = np.tile(edges[:-1], flat.size)
        hi = np.tile(edges[1:], flat.size)

        def fun(s, owner):
            rr = owner_r[owner][:, None]
            return rr**n * self.psi(rr * s) * s ** (n - 1)

        vals = integrate_intervals(fun, lo, hi, tol=tol * np.maximum(1.0, owner_r**n))
        out = vals.reshape(flat.size, m).sum(axis=1)
        return out.reshape(r.shape)

    def __repr__(self):
        return f"WeightProfile(kind={self.kind!r}, n={self.dimension}, params={self.params})"

    # -- derived facts ------------------------------------------------
    @property
    def monotone(self):
        """Non-increasing on its support, validated by sampling."""
        t = _sample_grid(self)
        v = self.psi(t)
        return bool(np.all(np.diff(v) <= 1e-12 * np.maximum(1.0, np.abs(v[:-1]))))

    @property
    def strictly_decreasing(self):
        t = _sample_grid(self)
        v = self.psi(t)
        mask = v[:-1] > 0
        return bool(np.all(np.diff(v)[mask] < 0))

    @property
    def has_finite_mass(self):
        return math.isfinite(total_mass(self))

    # -- constructors -------------------------------------------------
    @classmethod
    def gaussian(cls, n):
        norm = (2 * math.pi) ** (-n / 2)

        def prim(r):
            r = np.asarray(r, dtype=float)
            return special.gammainc(n / 2, r * r / 2) / sphere_area(n)

        return cls(
            dimension=n, kind="gaussian", params={},
            psi_fn=lambda t: norm * np.exp(-0.5 * t * t),
            dpsi_fn=lambda t: -norm * t * np.exp(-0.5 * t * t),
            tail_exponent_hint=math.inf, psi0=norm, primitive_fn=prim, mn_member=True,
        )

    @classmethod
    def cauchy(cls, n, q, b):
        if q < 0 or b <= 0:
            raise ValueError("cauchy weight needs q >= 0 and b > 0")
        return cls(
            dimension=n, kind="cauchy", params={"q": float(q), "b": float(b)},
            psi_fn=lambda t: (1.0 + t**b) ** (-q),
            dpsi_fn=lambda t: -q * b * t ** (b - 1) * (1.0 + t**b) ** (-q - 1),
            tail_exponent_hint=q * b, psi0=1.0, mn_member=True,
        )

    @classmethod
    def lebesgue(cls, n):
        return cls(
            dimension=n, kind="lebesgue", params={},
            psi_fn=lambda t: np.ones_like(np.asarray(t, dtype=float)),
            dpsi_fn=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            tail_exponent_hint=0.0, psi0=1.0,
            primitive_fn=lambda r: np.asarray(r, dtype=float) ** n / n, mn_member=True,
        )

    @classmethod
    def power(cls, n, q, base=None):
        """Density |x|^(-q) times a base profile (Lebesgue by default)."""
        base = base if base is not None else cls.lebesgue(n)
        if base.dimension != n:
            raise ValueError("base profile dimension mismatch")
        if not 0 <= q < n:
            raise ValueError("power weight needs 0 <= q < n for local integrability")

        def psi(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore"):
                return np.where(t > 0, t ** (-q), np.inf) * base.psi(t)

        def dpsi(t):
            t = np.asarray(t, dtype=float)
            return -q * t ** (-q - 1) * base.psi(t) + t ** (-q) * base.dpsi(t)

        prim = None
        if base.kind == "lebesgue":
            prim = lambda r: np.asarray(r, dtype=float) ** (n - q) / (n - q)  # noqa: E731
        hint = None if base.tail_exponent_hint is None else base.tail_exponent_hint + q
        return cls(
            dimension=n, kind="power",
            params={"q": float(q), "base": describe(base)},
            psi_fn=psi, dpsi_fn=dpsi, support_sup=base.support_sup,
            tail_exponent_hint=hint, psi0=math.inf if q > 0 else base.psi0,
            primitive_fn=prim, mn_member=base.mn_member, singular_at_origin=q > 0,
        )

    @classmethod
    def tabulated(cls, n, grid, values):
        """Monotone cubic interpolation of samples; zero beyond the last radius."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("tabulated weight needs matching 1-D grid and values")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("tabulated radii must be strictly increasing")
        if np.any(values < 0) or grid[0] < 0:
            raise ValueError("tabulated radii and densities must be non-negative")
        interp = PchipInterpolator(grid, values, extrapolate=False)
        deriv = interp.derivative()
        g0, g1 = grid[0], grid[-1]

        def psi(t):
            t = np.asarray(t, dtype=float)
            v = interp(np.clip(t, g0, g1))
            return np.where(t > g1, 0.0, np.maximum(v, 0.0))

        def dpsi(t):
            t = np.asarray(t, dtype=float)
            inside = (t >= g0) & (t <= g1)
            return np.where(inside, deriv(np.clip(t, g0, g1)), 0.0)

        positive = np.nonzero(values > 0)[0]
        if positive.size == 0:
            sup = 0.0
        else:
            sup = float(grid[min(positive[-1] + 1, grid.size - 1)])
        return cls(
            dimension=n, kind="tabulated",
            params={"grid": grid.tolist(), "values": values.tolist()},
            psi_fn=psi, dpsi_fn=dpsi, support_sup=sup, psi0=float(values[0]),
        )

    @classmethod
    def from_csv(cls, n, path):
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (radius, density)")
        return cls.tabulated(n, data[:, 0], data[:, 1])

    @classmethod
    def custom(cls, n, psi, dpsi=None, *, support_sup=math.inf, tail_exponent_hint=None,
               psi0=None, name="custom"):
        """Wrap arbitrary vectorised callables as a weight profile."""
        p0 = float(psi(np.array(1e-300))) if psi0 is None else psi0
        return cls(
            dimension=n, kind="custom", params={"name": name},
            psi_fn=psi, dpsi_fn=dpsi, support_sup=support_sup,
            tail_exponent_hint=tail_exponent_hint, psi0=p0,
        )

    def scaled(self, factor):
        """The same profile multiplied by a positive constant."""
        prim = self.primitive_fn
        return WeightProfile(
            dimension=self.dimension, kind=self.kind,
            params={**{k: v for k, v in self.params.items() if not k.startswith("_")},
                    "scale": factor * self.params.get("scale", 1.0)},
            psi_fn=lambda t: factor * self.psi_fn(t),
            dpsi_fn=None if self.dpsi_fn is None else (lambda t: factor * self.dpsi_fn(t)),
            support_sup=self.support_sup, tail_exponent_hint=self.tail_exponent_hint,
            psi0=factor * self.psi0,
            primitive_fn=None if prim is None else (lambda r: factor * prim(r)),
            mn_member=self.mn_member, singular_at_origin=self.singular_at_origin,
        )


def describe(w):
    """JSON-able descriptor of a profile (inverse of :func:`weight_from_descriptor`)."""
    d = {"kind": w.kind}
    d.update({k: v for k, v in w.params.items() if not k.startswith("_") and k != "scale"})
    return d


def _sample_grid(w, count=GRID_POINTS):
    return _log_grid(w, count)


def _effective_sup(w):
    """Radius beyond which psi is zero or numerically negligible."""
    if math.isfinite(w.support_sup):
        return w.support_sup
    t = _scale(w)
    for _ in range(200):
        if float(w.psi(2.0 * t)) < PSI_FLOOR:
            return 2.0 * t
        t *= 2.0
    return math.inf


def _scale(w):
    cached = w.params.get("_scale") if isinstance(w.params, dict) else None
    if cached is not None:
        return cached
    if w.tail_exponent_hint is not None and w.tail_exponent_hint <= w.dimension:
        s = 1.0
    else:
        try:
            tot = total_mass(w)
            s = inverse_radial_mass(w, 0.5 * tot) if math.isfinite(tot) and tot > 0 else 1.0
        except (InfiniteMassError, OutOfRangeError):
            s = 1.0
    if math.isfinite(w.support_sup):
        s = min(s, w.support_sup)
    w.params["_scale"] = s
    return s


# -- masses ---------------------------------------------------------------

def radial_mass(w, r):
    """mu(r B) = |S^{n-1}| int_0^r psi(t) t^(n-1) dt by adaptive quadrature."""
    if r < 0:
        raise OutOfRangeError("radius must be non-negative")
    if r == 0:
        return 0.0
    n = w.dimension
    if math.isinf(r):
        return total_mass(w)
    upper = min(r, w.support_sup)
    fn = lambda t: float(w.psi(t)) * t ** (n - 1)  # noqa: E731
    val, _ = integrate.quad(fn, 0.0, upper, limit=200, epsabs=1e-13, epsrel=1e-12)
    return sphere_area(n) * val


def total_mass(w):
    """mu(R^n); ``math.inf`` when the density is not integrable."""
    cached = w.params.get("_total") if isinstance(w.params, dict) else None
    if cached is not None:
        return cached
    n = w.dimension
    if math.isfinite(w.support_sup):
        tot = radial_mass(w, w.support_sup)
    elif w.tail_exponent_hint is not None and w.tail_exponent_hint <= n:
        tot = math.inf
    elif w.kind == "gaussian":
        tot = 1.0
    else:
        fn = lambda t: float(w.psi(t)) * t ** (n - 1)  # noqa: E731
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(fn, 0.0, math.inf, limit=400, epsabs=1e-13, epsrel=1e-12)
        tot = sphere_area(n) * val
        if not math.isfinite(tot) or err > 1e-6 * max(1.0, abs(val)) or tot > MASS_CAP:
            tot = math.inf
    w.params["_total"] = tot
    return tot


def inverse_radial_mass(w, m, tol_mass=None):
    """Radius r with radial_mass(w, r) = m, by bisection."""
    if m < 0:
        raise OutOfRangeError("mass must be non-negative")
    if m == 0:
        return 0.0
    tot = total_mass(w)
    if m >= tot:
        raise OutOfRangeError(f"mass {m} not below total mass {tot}")
    tol_mass = tol_mass if tol_mass is not None else 1e-12 * max(1.0, m)
    lo, hi = 0.0, 1.0
    while radial_mass(w, hi) < m:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise OutOfRangeError("mass not reached below radius 1e12")
    fn = lambda r: radial_mass(w, r) - m  # noqa: E731
    return optimize.brentq(fn, lo, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=500)


# -- property checks --------------------------------------------------------

def check_property_D(w, p):
    """Fast radial decay: t^(n-p) psi(t) -> 0 at the end of the support."""
    if p == 0:
        raise ValueError("property (D)_p is defined for p != 0")
    n = w.dimension
    if not np.any(w.psi(_sample_grid(w)) > 0):
        return Verdict(False, "density vanishes identically")
    if math.isfinite(w.support_sup):
        end = float(w.psi(w.support_sup))
        if end <= 1e-300:
            return Verdict(True, "compact support with density vanishing at its end")
        if n - p > 0:
            return Verdict(False, "density jumps to zero at a finite radius")
        return Verdict(True, "compact support")
    beta = w.tail_exponent_hint
    if beta is not None:
        if beta > n - p:
            return Verdict(True, f"tail exponent {beta} > n - p = {n - p}")
        if beta == n - p and w.kind in ("power", "cauchy", "lebesgue"):
            return Verdict(False, "t^(n-p) psi(t) tends to a nonzero constant")
        if w.kind in ("power", "cauchy", "lebesgue"):
            return Verdict(False, f"tail exponent {beta} <= n - p = {n - p}")
    # sampling fallback on geometrically growing radii
    scale = _scale(w)
    t = scale * 2.0 ** np.arange(0, 60)
    gv = w.g(t, p)
    peak = np.max(gv)
    tail = gv[-20:]
    if peak > 0 and np.all(np.diff(tail) <= 0) and tail[-1] <= TOL_ROOT * peak:
        return Verdict(True, "sampled tail decays monotonically to zero")
    if np.all(np.diff(tail) >= 0) and tail[-1] > tail[0]:
        return Verdict(False, "sampled tail grows")
    return Verdict(None, "sampled tail is not monotone; undetermined")


def check_mn_membership(w):
    """Is the density e^{-V(|x|)} with t -> V(e^t) convex (and radially decreasing)?"""
    if w.kind in ("gaussian", "cauchy", "lebesgue") or (w.kind == "power" and w.mn_member):
        return Verdict(True, f"{w.kind} profiles belong to the class")
    t = _sample_grid(w)
    v = w.psi(t)
    if np.any(v <= 0):
        return Verdict(None, "density vanishes inside the sampled support")
    if np.any(np.diff(v) > 1e-12 * v[:-1]):
        i = int(np.argmax(np.diff(v) > 1e-12 * v[:-1]))
        return Verdict(False, f"density increases near t={t[i]:.6g}; not radially decreasing")
    V = -np.log(v)
    second = V[2:] - 2 * V[1:-1] + V[:-2]
    if np.all(second >= -TOL_CONVEX * np.maximum(1.0, np.abs(V[1:-1]))):
        return Verdict(True, "sampled t -> V(e^t) is convex")
    i = int(np.argmin(second))
    return Verdict(False, f"t -> V(e^t) fails convexity near t={t[i + 1]:.6g}")


# -- isotropic analysis -----------------------------------------------------

@dataclass(frozen=True)
class IsotropicAnalysis:
    p: float
    critical_set: tuple
    threshold: float
    property_D: Optional[bool]
    property_S: Optional[bool]
    threshold_at: Optional[float] = None


def _critical_fn(w, p):
    n = w.dimension
    return lambda t: (n - p) * w.psi(t) + t * w.dpsi(t)


def _log_grid(w, count=GRID_POINTS):
    scale = _scale(w)
    t_max = min(_effective_sup(w), scale * 1e3)
    if t_max >= w.support_sup:
        t_max = w.support_sup * (1 - 1e-12)
    t = np.geomspace(1e-6 * scale, t_max, count)
    return t[w.psi(t) >= PSI_FLOOR]


def isotropic_analyze(w, p):
    """Critical set and maximum of g(t) = t^(n-p) psi(t)."""
    n = w.dimension
    if not w.monotone:
        raise PreconditionError("isotropic analysis needs a radially non-increasing density",
                                hypothesis="psi decreasing")
    D = check_property_D(w, p).holds if p != 0 else None
    if p >= n:
        if p == n:
            thr = w.psi0 if math.isfinite(w.psi0) else math.inf
        else:
            thr = math.inf
        return IsotropicAnalysis(p=p, critical_set=(), threshold=thr, property_D=D, property_S=True)
    F = _critical_fn(w, p)
    t = _log_grid(w)
    vals = F(t)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        r = optimize.brentq(lambda x: float(F(x)), t[i], t[i + 1], xtol=1e-14 * t[i], rtol=1e-15, maxiter=500)
        roots.append(r)
    roots.extend(float(t[i]) for i in np.nonzero(vals == 0)[0])
    roots = sorted(roots)
    gv = w.g(t, p)
    cand_t = np.concatenate([t, np.array(roots)]) if roots else t
    cand = w.g(cand_t, p)
    j = int(np.argmax(cand))
    thr, thr_at = float(cand[j]), float(cand_t[j])
    if roots:
        S = bool(max(roots) < w.support_sup)
    else:
        S = False
    if not roots and gv[-1] >= gv[-2]:
        # g still increasing at the grid end: no interior maximum
        thr = math.inf if not (D is True) else thr
    return IsotropicAnalysis(p=p, critical_set=tuple(roots), threshold=thr, property_D=D,
                             property_S=S, threshold_at=thr_at)


def constant_solutions(w, p, c):
    """All radii T in the support with T^(n-p) psi(T) = c, sorted."""
    if c <= 0:
        raise ValueError("c must be positive")
    n = w.dimension
    ana = isotropic_analyze(w, p)
    if p < n and c > ana.threshold:
        return []
    if p == n and not c < w.psi0:
        return []
    g = lambda x: float(w.g(x, p)) - c  # noqa: E731
    t = _log_grid(w)
    breaks = [float(t[0])] + list(ana.critical_set) + [float(t[-1])]
    # stretch the ends until g has crossed c (or the support ends)
    lo = breaks[0]
    while lo > 1e-300 and (g(lo) > 0) == (g(breaks[1]) > 0) and (p < n or g(lo) < 0):
        lo *= 1e-3
        if p < n and w.g(lo, p) < c:
            break
    breaks[0] = lo
    hi = breaks[-1]
    while math.isinf(w.support_sup) and g(hi) > 0 and hi < 1e300:
        hi *= 10.0
    breaks[-1] = min(hi, w.support_sup) if math.isfinite(w.support_sup) else hi
    roots = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        ga, gb = g(a), g(b)
        if ga == 0:
            roots.append(a)
        elif ga * gb < 0:
            roots.append(optimize.brentq(g, a, b, xtol=1e-15 * a, rtol=1e-15, maxiter=500))
    if breaks and g(breaks[-1]) == 0:
        roots.append(breaks[-1])
    roots = sorted(set(roots))
    if p < n and ana.property_S is False and ana.critical_set:
        warnings.warn("property (S)_p fails: root list may be incomplete", IncompleteRootsWarning)
    return roots
