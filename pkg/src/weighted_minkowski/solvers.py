"""Solvers for weighted L^p Minkowski problems over a fixed direction set.

Pinned-mass modes maximise a concave-type functional of the support numbers
on the level set ``mu([h]) = a`` by a sequential quadratic programming
iteration: each step solves the Newton-KKT system built from the analytic
first and second variations of ``mu([h])``, then Wulff-projects and rescales
the iterate back onto the mass constraint.  Constant-free modes run Newton's
method on ``S^mu_{[h],p} = nu`` (or on the gradient of the free functional).
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DegenerateBodyError, PreconditionError, UnboundedBodyError
from .geometry import (
    DirectionSet, Polytope, SphericalMeasure, SupportVector, hausdorff_distance, wulff_shape,
)
from .inequalities import (
    check_subspace_concentration, default_profile, hemisphere_constant, lp_iso_function, parallel_map,
)
from .measures import QUAD_TOL_FINE, body_mass, mass_hessian, weighted_facet_areas
from .weights import (
    IncompleteRootsWarning, Verdict, WeightProfile, check_property_D, constant_solutions,
    inverse_radial_mass, isotropic_analyze, radial_mass, sphere_area, total_mass,
)

MODES = ("pinned", "entropy", "free", "small_mass_dual", "isotropic", "ma_circle")


@dataclass(frozen=True)
class SolverConfig:
    tol_kkt: float = 1e-6
    tol_mass: float = 1e-8
    tol_pde: float = 1e-10
    target_kkt: float = 1e-12
    max_iter: int = 10000
    quad_tol: float = QUAD_TOL_FINE
    stall_iters: int = 6
    homotopy_steps: int = 4
    ma_grid: int = 512
    multistart: int = 10
    force: bool = False


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    weight: WeightProfile
    nu: SphericalMeasure
    p: float
    mode: str
    a: Optional[float] = None
    c: Optional[float] = None
    f: Optional[np.ndarray] = None
    config: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.weight.dimension != self.nu.dimension:
            raise ValueError("weight and data dimensions differ")
        if self.mode == "entropy" and self.p != 0:
            raise ValueError("entropy mode is the p = 0 problem")
        if self.mode == "pinned" and self.p == 0:
            raise ValueError("pinned mode needs p != 0 (use entropy mode for p = 0)")

    @property
    def dimension(self):
        return self.weight.dimension

    @property
    def even(self):
        return self.nu.is_even


@dataclass
class SolveReport:
    mode: str
    p: float
    status: str
    h: Optional[SupportVector] = None
    body: Optional[Polytope] = None
    lam: float = math.nan
    lam_ls: float = math.nan
    residuals: Optional[np.ndarray] = None
    residual_inf: float = math.inf
    surface: Optional[np.ndarray] = None
    mass: float = math.nan
    target_mass: Optional[float] = None
    mass_error: Optional[float] = None
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    realized_hemisphere: Optional[float] = None
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    tol_kkt: float = 1e-6
    tol_mass: float = 1e-8

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def lambda_agreement(self):
        return abs(self.lam - self.lam_ls) / abs(self.lam)


# -- objectives ------------------------------------------------------------------------

def _objective_parts(mode, p, nu):
    """(value, gradient, Hessian diagonal) of the data functional of h."""
    v = nu.values
    tot = nu.total
    if mode == "entropy" or p == 0:
        return (lambda h: -float(np.sum(v * np.log(h))) / tot,
                lambda h: -v / (tot * h),
                lambda h: v / (tot * h * h))
    return (lambda h: -float(np.sum(v * h**p)) / p,
            lambda h: -v * h ** (p - 1.0),
            lambda h: -(p - 1.0) * v * h ** (p - 2.0))


def objective_eval(spec, h, project=True):
    """Data functional at the Wulff projection of ``h`` (or at ``h`` itself).

    Pinned and free modes use Omega(h) = -(1/p) sum nu_i h_i^p; free mode adds
    mu([h]); entropy mode uses -(1/|nu|) sum nu_i log h_i.
    """
    vals = h.values if isinstance(h, SupportVector) else np.asarray(h, dtype=float)
    K = None
    if project or spec.mode == "free":
        K = wulff_shape(spec.nu.directions.units, vals)
        if project:
            vals = K.offsets
    mode = "entropy" if spec.mode == "entropy" else "pinned"
    value = _objective_parts(mode, spec.p, spec.nu)[0](vals)
    if spec.mode == "free":
        value += body_mass(K, spec.weight, tol=spec.config.quad_tol)
    return value


# -- preconditions ---------------------------------------------------------------------

@dataclass
class Precheck:
    items: list = field(default_factory=list)

    def add(self, hypothesis, verdict, required=True):
        if not isinstance(verdict, Verdict):
            verdict = Verdict(verdict)
        self.items.append({"hypothesis": hypothesis, "holds": verdict.holds, "detail": verdict.detail,
                           "required": required})

    @property
    def failures(self):
        return [i for i in self.items if i["required"] and i["holds"] is False]

    @property
    def undetermined(self):
        return [i for i in self.items if i["required"] and i["holds"] is None]

    def as_dict(self):
        return {"checks": list(self.items)}


def _centered(nu, tol=1e-10):
    bary = nu.values @ nu.directions.units
    return float(np.linalg.norm(bary)) <= tol * nu.total


def precheck(spec):
    """Evaluate every hypothesis the chosen mode relies on."""
    w, nu, p, mode = spec.weight, spec.nu, spec.p, spec.mode
    n = spec.dimension
    pc = Precheck()
    tot = total_mass(w)
    hem = hemisphere_constant(nu, 1.0)
    pc.add("not concentrated on a closed hemisphere",
           Verdict(not hem.concentrated, f"hemisphere constant {hem.value:.6g}"))
    even = spec.even
    if mode in ("pinned", "entropy"):
        a = spec.a
        pc.add("0 < a < mu(R^n)", Verdict(a is not None and 0 < a < tot, f"a={a}, total={tot}"))
        if not even:
            if math.isfinite(tot) and a is not None:
                if p < 0:
                    pc.add("a > mu(R^n)/2 for non-even data", Verdict(a > tot / 2, f"a={a}, total/2={tot / 2}"))
                else:
                    pc.add("a >= mu(R^n)/2 for non-even data", Verdict(a >= tot / 2, f"a={a}, total/2={tot / 2}"))
            else:
                ok = w.kind == "lebesgue" and p == 1 and _centered(nu)
                pc.add("non-even data with infinite measure: classical case with centred data only",
                       Verdict(ok, "Lebesgue weight, p=1 and barycentre at the origin required"))
    if mode == "pinned" and p < 0:
        pc.add("finite measure", Verdict(math.isfinite(tot), f"total={tot}"))
        pc.add("property (D)_p", check_property_D(w, p))
        pc.add("radially decreasing density", Verdict(w.monotone, "sampled"))
        pc.add("finite positive density at the origin", Verdict(0 < w.psi0 < math.inf, f"psi(0)={w.psi0}"))
    if mode == "pinned" and p == n:
        pc.add("p = n pinned solve (constant-free theory needs |nu| <= psi(0) n kappa_n)",
               Verdict(True, "flagged only"), required=False)
    if mode == "entropy":
        sub = check_subspace_concentration(nu, strict=True)
        basis = np.round(sub.worst_basis, 12).tolist()
        pc.add("strict subspace concentration",
               Verdict(sub.holds, f"subspace of dimension {sub.worst_dimension} spanned by {basis} carries "
                                  f"{sub.worst_mass:.12g} against bound {sub.bound:.12g}"))
        if not math.isfinite(tot) and w.kind != "lebesgue":
            pc.add("integrable density (entropy mode with infinite measure)", Verdict(False, w.kind))
    if mode == "free":
        pc.add("p > n", Verdict(p > n, f"p={p}, n={n}"))
        pc.add("even data", Verdict(even, ""))
        pc.add("property (D)_p", check_property_D(w, p))
        pc.add("positive density at the origin", Verdict(w.psi0 > 0, f"psi(0)={w.psi0}"))
    if mode == "small_mass_dual":
        pc.add("0 < p < n", Verdict(0 < p < n, f"p={p}"))
        pc.add("even data", Verdict(even, ""))
        pc.add("finite measure", Verdict(math.isfinite(tot), f"total={tot}"))
        pc.add("strictly decreasing density", Verdict(w.strictly_decreasing, "sampled"))
        if 0 < p < n:
            pc.add("property (D)_p", check_property_D(w, p))
            ana = isotropic_analyze(w, p)
            pc.add("property (S)_p", Verdict(ana.property_S, f"critical set {list(ana.critical_set)}"))
            prof = default_profile(w)
            if prof is None or not math.isfinite(tot):
                pc.add("small total mass", Verdict(None, "no isoperimetric profile known for this weight"))
            else:
                a = spec.a if spec.a is not None else tot / 2
                Ip = lp_iso_function(prof, p, n)
                bound = min(Ip(a), Ip(tot - a))
                pc.add("small total mass", Verdict(nu.total < bound, f"|nu|={nu.total:.12g}, bound={bound:.12g}"))
    if mode == "isotropic":
        pc.add("c > 0", Verdict(spec.c is not None and spec.c > 0, f"c={spec.c}"))
        pc.add("radially decreasing density", Verdict(w.monotone, "sampled"))
    if mode == "ma_circle":
        pc.add("n = 2", Verdict(n == 2, f"n={n}"))
        if p == n:
            bound = w.psi0 * sphere_area(n)
            pc.add("|nu| <= psi(0) n kappa_n (p = n)", Verdict(nu.total <= bound, f"bound={bound}"))
    return pc


UNFORCEABLE = ("not concentrated on a closed hemisphere",)


def enforce(spec, pc=None):
    """Raise :class:`PreconditionError` on failed or undetermined hypotheses.

    ``config.force`` lets a solve proceed past them, except for hemisphere
    concentration, under which no bounded body exists.
    """
    pc = precheck(spec) if pc is None else pc
    blocking = [i for i in pc.failures if i["hypothesis"] in UNFORCEABLE or not spec.config.force]
    if blocking:
        item = blocking[0]
        raise PreconditionError(f"hypothesis failed: {item['hypothesis']} ({item['detail']})",
                                hypothesis=item["hypothesis"], detail=pc.as_dict())
    if pc.undetermined and not spec.config.force:
        item = pc.undetermined[0]
        raise PreconditionError(f"hypothesis undetermined: {item['hypothesis']} ({item['detail']}); "
                                "use force to run anyway", hypothesis=item["hypothesis"], detail=pc.as_dict())
    return pc


def _forced_notes(pc):
    return [f"forced past {'failed' if i['holds'] is False else 'undetermined'} hypothesis: {i['hypothesis']}"
            for i in pc.failures + pc.undetermined]


# -- shared numerics -------------------------------------------------------------------

def _scaled(K, s):
    n = K.dimension
    return Polytope(K.normals, K.support * s, K.offsets * s, K.active, K.facet_area * s ** (n - 1),
                    K.vertices * s, K.facets)


def _project_mass(K, w, a, quad_tol, tol):
    """Rescale K about the origin so that mu(sK) = a (safeguarded Newton in s)."""
    lo, hi = 0.0, math.inf
    s = 1.0
    for _ in range(100):
        Ks = _scaled(K, s)
        m = body_mass(Ks, w, tol=quad_tol)
        err = m - a
        if abs(err) <= tol:
            return Ks, m
        if err > 0:
            hi = min(hi, s)
        else:
            lo = max(lo, s)
        S = weighted_facet_areas(Ks, w, quad_tol)
        dm = float(np.dot(Ks.offsets, S)) / s
        s_new = s - err / dm if dm > 0 else math.nan
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * s
        if abs(s_new - s) <= 4e-16 * s:
            return Ks, m
        s = s_new
    return _scaled(K, s), body_mass(_scaled(K, s), w, tol=quad_tol)


def _try_wulff(units, h, active=None):
    try:
        K = wulff_shape(units, h)
    except (UnboundedBodyError, DegenerateBodyError, ValueError):
        return None
    if active is not None and np.any(active & ~K.active):
        return None
    return K


def _step_cap(h, d, frac=0.5):
    neg = d < 0
    return min(1.0, float(np.min(frac * h[neg] / -d[neg]))) if neg.any() else 1.0


def _lp_values(K, S, p):
    return np.where(K.active, K.offsets ** (1.0 - p) * S, 0.0)


def kkt_report(spec, h, constant_free=None, status="evaluated", quad_tol=None):
    """KKT residuals of a candidate support vector.

    Pinned modes estimate the multiplier both as |nu| / S^mu_p(K) and by a
    least-squares fit of nu against the realised measure.  Constant-free
    modes fix the multiplier at one.
    """
    quad_tol = spec.config.quad_tol if quad_tol is None else quad_tol
    units = spec.nu.directions.units
    vals = h.values if isinstance(h, SupportVector) else np.asarray(h, dtype=float)
    K = wulff_shape(units, vals)
    w, nu, p = spec.weight, spec.nu, spec.p
    S = weighted_facet_areas(K, w, quad_tol)
    Sp = _lp_values(K, S, p)
    lam = nu.total / float(np.sum(Sp))
    lam_ls = float(nu.values @ Sp) / float(Sp @ Sp)
    if constant_free is None:
        constant_free = spec.mode in ("free", "small_mass_dual", "isotropic", "ma_circle")
    lam_used = 1.0 if constant_free else lam
    res = nu.values - lam_used * Sp
    m = body_mass(K, w, tol=quad_tol)
    target = spec.a if spec.mode in ("pinned", "entropy") else None
    realized = None
    if np.count_nonzero(Sp) >= K.dimension + 1:
        mask = Sp > 0
        meas = SphericalMeasure(DirectionSet(units[mask]), Sp[mask])
        realized = hemisphere_constant(meas, 1.0).value
    rep = SolveReport(
        mode=spec.mode, p=p, status=status, h=SupportVector(nu.directions, K.offsets), body=K,
        lam=lam_used if constant_free else lam, lam_ls=lam_ls, residuals=res,
        residual_inf=float(np.max(np.abs(res))), surface=Sp, mass=m, target_mass=target,
        mass_error=None if target is None else abs(m - target), realized_hemisphere=realized,
        tol_kkt=spec.config.tol_kkt, tol_mass=spec.config.tol_mass,
    )
    rep.extra["lambda_normalized"] = lam
    return rep


def _finalize(spec, h, trace, iterations, notes=()):
    cfg = spec.config
    r = kkt_report(spec, h)
    r.objective_trace = list(trace)
    r.iterations = iterations
    r.notes = list(notes)
    ok = r.residual_inf <= cfg.tol_kkt * spec.nu.total
    if r.mass_error is not None:
        ok = ok and r.mass_error <= cfg.tol_mass
    r.status = "converged" if ok else ("max_iters" if iterations >= cfg.max_iter else "stalled")
    return r


# -- pinned-mass solvers ----------------------------------------------------------------

def _initial_ball(spec):
    units = spec.nu.directions.units
    r = inverse_radial_mass(spec.weight, spec.a)
    return wulff_shape(units, np.full(len(units), r))


def _sqp_pinned(spec, K0=None):
    cfg = spec.config
    w, nu, p, a = spec.weight, spec.nu, spec.p, spec.a
    units = nu.directions.units
    mode = "entropy" if spec.mode == "entropy" else "pinned"
    obj, grad, hdiag = _objective_parts(mode, p, nu)
    mtol = 1e-3 * cfg.tol_mass
    K = _initial_ball(spec) if K0 is None else K0
    K, m = _project_mass(K, w, a, cfg.quad_tol, mtol)
    h = K.offsets
    f = obj(h)
    trace = [f]
    stall = 0
    it = 0
    notes = []
    for it in range(1, cfg.max_iter + 1):
        S = weighted_facet_areas(K, w, cfg.quad_tol)
        Sp = _lp_values(K, S, p)
        lam = nu.total / float(np.sum(Sp))
        if np.max(np.abs(nu.values - lam * Sp)) <= cfg.target_kkt * nu.total and abs(m - a) <= cfg.tol_mass:
            break
        g = grad(h)
        H = mass_hessian(K, w, cfg.quad_tol)
        eta = float(S @ g) / float(S @ S)
        N = len(h)
        A = np.zeros((N + 1, N + 1))
        A[:N, :N] = np.diag(hdiag(h)) - eta * H
        A[:N, N] = -S
        A[N, :N] = S
        rhs = np.concatenate([-(g - eta * S), [a - m]])
        d = np.linalg.lstsq(A, rhs, rcond=None)[0][:N]
        tangent_g = g - (float(S @ g) / float(S @ S)) * S
        steps = []
        if float(g @ d) > 0:
            steps.append((d, 1.0))
        gn = np.max(np.abs(tangent_g))
        if gn > 0:
            steps.append((tangent_g, 0.1 * float(np.min(h)) / gn))
        accepted = False
        for direction, t0 in steps:
            t = min(t0, _step_cap(h, direction))
            while t > 1e-12:
                Kt = _try_wulff(units, h + t * direction, K.active)
                if Kt is not None:
                    Kt, mt = _project_mass(Kt, w, a, cfg.quad_tol, mtol)
                    ft = obj(Kt.offsets)
                    if ft >= f:
                        gain = ft - f
                        K, h, m, f = Kt, Kt.offsets, mt, ft
                        trace.append(f)
                        accepted = True
                        break
                t *= 0.5
            if accepted:
                break
        if not accepted:
            notes.append("line search could not improve the objective")
            break
        stall = stall + 1 if gain <= 1e-15 * max(1.0, abs(f)) else 0
        if stall >= cfg.stall_iters:
            notes.append("objective stagnated")
            break
    return _finalize(spec, h, trace, it, notes)


def solve_pinned(spec):
    """Maximise -(1/p) sum nu_i h_i^p subject to mu([h]) = a (p != 0)."""
    if spec.mode != "pinned":
        raise ValueError("solve_pinned needs mode 'pinned'")
    pc = enforce(spec)
    rep = _sqp_pinned(spec)
    rep.extra["precheck"] = pc.as_dict()
    rep.notes.extend(_forced_notes(pc))
    if spec.p == spec.dimension:
        rep.notes.append("p = n: pinned solve carries no constant-free guarantee")
    return rep


def solve_entropy(spec):
    """Maximise -(1/|nu|) sum nu_i log h_i subject to mu([h]) = a."""
    if spec.mode != "entropy":
        raise ValueError("solve_entropy needs mode 'entropy'")
    pc = enforce(spec)
    rep = _sqp_pinned(spec)
    rep.extra["precheck"] = pc.as_dict()
    rep.notes.extend(_forced_notes(pc))
    return rep


# -- constant-free solvers ----------------------------------------------------------------

def _ball_scan(spec):
    """Ball radius maximising mu(rB) - (1/p) r^p |nu| when positive."""
    w, p, tot = spec.weight, spec.p, spec.nu.total
    best = None
    for r in np.geomspace(1e-4, 1e4, 161):
        val = radial_mass(w, r) - r**p * tot / p
        if val > 0 and (best is None or val > best[1]):
            best = (float(r), val)
    return best


def solve_free(spec):
    """Maximise mu([h]) - (1/p) sum nu_i h_i^p without constraint (p > n)."""
    if spec.mode != "free":
        raise ValueError("solve_free needs mode 'free'")
    pc = enforce(spec)
    cfg = spec.config
    w, nu, p = spec.weight, spec.nu, spec.p
    units = nu.directions.units
    bracket = _ball_scan(spec)
    if bracket is None:
        return SolveReport(mode="free", p=p, status="no_positive_bracket",
                           notes=["objective is not positive on any ball"], extra={"precheck": pc.as_dict()})
    K = wulff_shape(units, np.full(len(units), bracket[0]))
    h = K.offsets

    def value(Kx):
        return body_mass(Kx, w, tol=cfg.quad_tol) - float(np.sum(nu.values * Kx.offsets**p)) / p

    f = value(K)
    trace = [f]
    notes = []
    it = 0
    stall = 0
    for it in range(1, cfg.max_iter + 1):
        S = weighted_facet_areas(K, w, cfg.quad_tol)
        G = S - nu.values * h ** (p - 1.0)
        if np.max(np.abs(G * h ** (1.0 - p))) <= cfg.target_kkt * nu.total:
            break
        Hf = mass_hessian(K, w, cfg.quad_tol) - np.diag((p - 1.0) * nu.values * h ** (p - 2.0))
        d = -np.linalg.lstsq(Hf, G, rcond=None)[0]
        steps = [(d, 1.0)] if float(G @ d) > 0 else []
        steps.append((G, 0.1 * float(np.min(h)) / float(np.max(np.abs(G)))))
        accepted = False
        for direction, t0 in steps:
            t = min(t0, _step_cap(h, direction))
            while t > 1e-12:
                Kt = _try_wulff(units, h + t * direction, K.active)
                if Kt is not None:
                    ft = value(Kt)
                    if ft >= f:
                        gain = ft - f
                        K, h, f = Kt, Kt.offsets, ft
                        trace.append(f)
                        accepted = True
                        break
                t *= 0.5
            if accepted:
                break
        if not accepted:
            notes.append("line search could not improve the objective")
            break
        stall = stall + 1 if gain <= 1e-15 * max(1.0, abs(f)) else 0
        if stall >= cfg.stall_iters:
            notes.append("objective stagnated")
            break
    rep = _finalize(spec, h, trace, it, notes)
    rep.extra["precheck"] = pc.as_dict()
    rep.notes.extend(_forced_notes(pc))
    rep.extra["initial_radius"] = bracket[0]
    return rep


def _quadrature_weights(directions):
    if directions.quadrature_weights is not None:
        return directions.quadrature_weights
    u = directions.units
    if u.shape[1] == 2:
        ang = np.arctan2(u[:, 1], u[:, 0])
        order = np.argsort(ang)
        sa = ang[order]
        gaps = np.diff(np.concatenate([sa, sa[:1] + 2 * math.pi]))
        wts = np.empty(len(u))
        wts[order] = 0.5 * (gaps + np.roll(gaps, 1))
        return wts
    return np.full(len(u), 4 * math.pi / len(u))


def _newton_constant_free(spec, nu_values, K, max_iter=100):
    """Newton on h^(1-p) S^mu_[h] = nu with Wulff-projected backtracking."""
    cfg = spec.config
    w, p = spec.weight, spec.p
    units = spec.nu.directions.units
    h = K.offsets
    S = weighted_facet_areas(K, w, cfg.quad_tol)
    F = _lp_values(K, S, p) - nu_values
    phi = float(F @ F)
    target = cfg.target_kkt * float(np.sum(nu_values))
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(F)) <= target:
            return K, True, it
        H = mass_hessian(K, w, cfg.quad_tol)
        J = np.diag((1.0 - p) * h ** (-p) * S) + h[:, None] ** (1.0 - p) * H
        d = -np.linalg.lstsq(J, F, rcond=None)[0]
        t = _step_cap(h, d)
        accepted = False
        while t > 1e-10:
            Kt = _try_wulff(units, h + t * d, K.active)
            if Kt is not None:
                St = weighted_facet_areas(Kt, w, cfg.quad_tol)
                Ft = _lp_values(Kt, St, p) - nu_values
                pt = float(Ft @ Ft)
                if pt < phi:
                    K, h, S, F, phi = Kt, Kt.offsets, St, Ft, pt
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
    return K, bool(np.max(np.abs(F)) <= target), it


def _continuation(spec, T, wts):
    """Follow the solution from the ball of radius T (isotropic datum) to nu."""
    nu_target = spec.nu.values
    c0 = spec.nu.total / float(np.sum(wts))
    nu0 = c0 * wts
    units = spec.nu.directions.units
    K = wulff_shape(units, np.full(len(units), T))
    iso = np.max(np.abs(nu_target - nu0)) <= 1e-14 * spec.nu.total
    ladder = [1.0] if iso else list(np.linspace(0, 1, spec.config.homotopy_steps + 1))
    t_done, total_it = 0.0, 0
    step = ladder[1] - ladder[0] if len(ladder) > 1 else 1.0
    t_next = ladder[0] if not iso else 1.0
    while True:
        datum = (1 - t_next) * nu0 + t_next * nu_target
        Kt, ok, it = _newton_constant_free(spec, datum, K)
        total_it += it
        if ok:
            K, t_done = Kt, t_next
            if t_done >= 1.0:
                return K, True, total_it, t_done
            t_next = min(1.0, t_done + step)
        else:
            step *= 0.5
            if step < 1e-4:
                return K, False, total_it, t_done
            t_next = t_done + step


def solve_small_mass_dual(spec):
    """Two constant-free solutions of S^mu_{K,p} = nu from the two ball branches."""
    if spec.mode != "small_mass_dual":
        raise ValueError("solve_small_mass_dual needs mode 'small_mass_dual'")
    pc = enforce(spec)
    w, p, nu = spec.weight, spec.p, spec.nu
    n = spec.dimension
    tot = total_mass(w)
    wts = _quadrature_weights(nu.directions)
    c = nu.total / sphere_area(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IncompleteRootsWarning)
        roots = constant_solutions(w, p, c)
    ana = isotropic_analyze(w, p)
    t3 = min(ana.critical_set) if ana.critical_set else None
    pivot = None if t3 is None else min(radial_mass(w, t3), tot - radial_mass(w, t3))
    info = {"precheck": pc.as_dict(), "ball_radii": roots, "pivot": pivot, "threshold": ana.threshold,
            "a": spec.a if spec.a is not None else tot / 2}
    if len(roots) < 2:
        r = SolveReport(mode=spec.mode, p=p, status="no_solution",
                        notes=[f"isotropic equation has {len(roots)} roots at c={c:.6g}"], extra=dict(info))
        return DualSolveResult(r, r, pivot, "no_solution", info)

    def branch(T):
        K, ok, it, t_done = _continuation(spec, T, wts)
        rep = _finalize(spec, K.offsets, [], it)
        if not ok and t_done < 1.0:
            rep.status = "homotopy_stuck"
            rep.extra["last_good_t"] = t_done
        rep.extra["initial_radius"] = T
        rep.notes.extend(_forced_notes(pc))
        return rep

    large_T, small_T = roots[-1], roots[0]
    large, small = parallel_map(branch, [large_T, small_T])
    large.extra["branch"], small.extra["branch"] = "large", "small"
    merged = abs(large_T - small_T) <= 1e-3 * large_T
    if large.body is not None and small.body is not None and not merged:
        merged = hausdorff_distance(large.body, small.body) <= 1e-6
    status = "branch_merged" if merged else (
        "converged" if large.converged and small.converged else "partial")
    if merged:
        small = large
    return DualSolveResult(large, small, pivot, status, info)


@dataclass
class DualSolveResult:
    large: SolveReport
    small: SolveReport
    pivot: Optional[float]
    status: str
    info: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.large, self.small))

    @property
    def masses_straddle_pivot(self):
        if self.pivot is None:
            return None
        return bool(self.small.mass < self.pivot < self.large.mass)


def solve_isotropic(spec):
    """Centred-ball solutions for nu = c * (spherical quadrature weights)."""
    if spec.mode != "isotropic":
        raise ValueError("solve_isotropic needs mode 'isotropic'")
    pc = enforce(spec)
    w, p, c = spec.weight, spec.p, spec.c
    wts = _quadrature_weights(spec.nu.directions)
    units = spec.nu.directions.units
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IncompleteRootsWarning)
        roots = constant_solutions(w, p, c)
    out = []
    datum = c * wts
    for T in roots:
        g = float(w.g(T, p))
        res = datum - g * wts
        K = wulff_shape(units, np.full(len(units), T))
        rep = SolveReport(mode="isotropic", p=p, status="converged", h=SupportVector(spec.nu.directions, K.offsets),
                          body=K, lam=1.0, lam_ls=1.0, residuals=res, residual_inf=float(np.max(np.abs(res))),
                          surface=g * wts, mass=radial_mass(w, T), iterations=0,
                          extra={"radius": T, "precheck": pc.as_dict()})
        rep.notes.extend(_forced_notes(pc))
        if caught:
            rep.notes.append("property (S)_p fails: further roots may exist")
        out.append(rep)
    return out


def solve(spec):
    """Dispatch on the problem mode."""
    from .monge_ampere import solve_ma_circle

    return {
        "pinned": solve_pinned,
        "entropy": solve_entropy,
        "free": solve_free,
        "small_mass_dual": solve_small_mass_dual,
        "isotropic": solve_isotropic,
        "ma_circle": solve_ma_circle,
    }[spec.mode](spec)
