"""Newton solver for the planar weighted L^p Minkowski equation.

On the circle the equation for the support function reads

    h^(1-p) psi(sqrt(h^2 + h'^2)) (h'' + h) = f,

discretised with Fourier spectral differentiation on a uniform angle grid.
Newton steps are damped to keep ``h > 0`` and ``h'' + h > 0``, and data are
reached by homotopy ``f_t = (1 - t) f_0 + t f`` from a solved start.
"""

import math
import warnings

import numpy as np

from .geometry import DirectionSet, SphericalMeasure, SupportVector, wulff_shape
from .inequalities import parallel_map
from .solvers import ProblemSpec, SolveReport, _forced_notes, enforce
from .weights import IncompleteRootsWarning, constant_solutions


def spectral_matrices(M):
    """First and second Fourier differentiation matrices on M equispaced angles."""
    if M % 2:
        raise ValueError("grid size must be even")
    step = 2 * math.pi / M
    k = np.arange(M)
    diff = (k[:, None] - k[None, :]) % M
    sign = np.where(diff % 2, -1.0, 1.0)
    off = diff != 0
    half = np.where(off, diff * step / 2, 1.0)
    D1 = np.where(off, 0.5 * sign / np.tan(half), 0.0)
    D2 = np.where(off, -0.5 * sign / np.sin(half) ** 2, 0.0)
    # negative-sum diagonal: rows annihilate constants exactly
    D2[np.diag_indices(M)] = -D2.sum(axis=1)
    return D1, D2


class CircleOperator:
    """Residual and Jacobian of the discretised planar equation."""

    def __init__(self, weight, p, M):
        if weight.dimension != 2:
            raise ValueError("circle solver needs a planar weight")
        self.weight, self.p, self.M = weight, p, M
        self.theta = 2 * math.pi * np.arange(M) / M
        self.D1, self.D2 = spectral_matrices(M)

    def curvature_radius(self, h):
        return self.D2 @ h + h

    def lhs(self, h):
        p = self.p
        dh = self.D1 @ h
        rho = np.sqrt(h * h + dh * dh)
        return h ** (1.0 - p) * self.weight.psi(rho) * self.curvature_radius(h)

    def jacobian(self, h):
        p, w = self.p, self.weight
        dh = self.D1 @ h
        rho = np.sqrt(h * h + dh * dh)
        R = self.curvature_radius(h)
        psi, dpsi = w.psi(rho), w.dpsi(rho)
        J = (h ** (1.0 - p) * psi)[:, None] * (self.D2 + np.eye(self.M))
        J += np.diag((1.0 - p) * h ** (-p) * psi * R)
        coef = h ** (1.0 - p) * dpsi * R / rho
        J += coef[:, None] * (np.diag(h) + dh[:, None] * self.D1)
        return J

    def admissible(self, h):
        return bool(np.all(h > 0) and np.all(self.curvature_radius(h) > 0))


def _newton(op, h, f, tol, max_iter=60):
    F = op.lhs(h) - f
    nrm = float(np.max(np.abs(F)))
    for _ in range(max_iter):
        if nrm <= tol:
            return h, nrm, True
        d = np.linalg.solve(op.jacobian(h), -F)
        t = 1.0
        while t > 1e-8:
            ht = h + t * d
            if op.admissible(ht):
                Ft = op.lhs(ht) - f
                nt = float(np.max(np.abs(Ft)))
                if nt < nrm or nt <= tol:
                    h, F, nrm = ht, Ft, nt
                    break
            t *= 0.5
        else:
            return h, nrm, False
    return h, nrm, nrm <= tol


def continuation(op, h0, f0, f, tol, steps=8, min_step=1e-4):
    """Follow f_t = (1 - t) f0 + t f from a solution h0 of the f0 equation."""
    h, t_done, dt = h0, 0.0, 1.0 / steps
    last_nrm = math.inf
    while t_done < 1.0:
        t = min(1.0, t_done + dt)
        target_tol = tol if t == 1.0 else max(tol, 1e-8)
        ht, nrm, ok = _newton(op, h, (1 - t) * f0 + t * f, target_tol)
        if ok:
            h, t_done, last_nrm = ht, t, nrm
            dt = min(2 * dt, 1.0 - t_done) if t_done < 1.0 else dt
        else:
            dt *= 0.5
            if dt < min_step:
                return h, t_done, last_nrm, False
    if last_nrm > tol:
        h, last_nrm, ok = _newton(op, h, f, tol)
        return h, 1.0, last_nrm, ok
    return h, 1.0, last_nrm, True


def _report(spec, op, h, nrm, ok, t_done, start):
    d = DirectionSet.uniform_circle(op.M)
    status = "converged" if ok and nrm <= spec.config.tol_pde else "homotopy_stuck"
    body = wulff_shape(d.units, h) if op.admissible(h) else None
    res = op.lhs(h) - spec.f
    rep = SolveReport(mode="ma_circle", p=spec.p, status=status, h=SupportVector(d, h), body=body, lam=1.0,
                      lam_ls=1.0, residuals=res, residual_inf=float(np.max(np.abs(res))), surface=op.lhs(h),
                      tol_kkt=spec.config.tol_pde)
    rep.extra.update({"start": start, "last_good_t": t_done, "grid": op.M})
    return rep


def _data(spec):
    if spec.f is None:
        raise ValueError("ma_circle mode needs data samples f")
    f = np.asarray(spec.f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("data samples must be positive")
    return f


def solve_ma_circle(spec, h_init=None, branch="large"):
    """Solve the planar equation for the data samples ``spec.f``.

    Without ``h_init`` the homotopy starts at the constant solution for the
    mean of ``f`` on the requested branch (``large``/``small`` or a root
    index).  With ``h_init`` it follows the Newton homotopy from the data
    that ``h_init`` solves exactly.
    """
    pc = enforce(spec)
    f = _data(spec)
    op = CircleOperator(spec.weight, spec.p, len(f))
    tol = spec.config.tol_pde
    if h_init is None:
        c0 = float(np.mean(f))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IncompleteRootsWarning)
            roots = constant_solutions(spec.weight, spec.p, c0)
        if not roots:
            return SolveReport(mode="ma_circle", p=spec.p, status="no_constant_solution",
                               notes=[f"no constant solution for mean datum {c0:.6g}"])
        idx = {"large": -1, "small": 0}.get(branch, branch)
        T = roots[idx]
        h0 = np.full(op.M, T)
        f0 = op.lhs(h0)
        start = {"kind": "constant", "radius": T, "branch": branch}
    else:
        h0 = np.asarray(h_init, dtype=float)
        if not op.admissible(h0):
            raise ValueError("initial support function must be positive and convex")
        f0 = op.lhs(h0)
        start = {"kind": "given"}
    h, t_done, nrm, ok = continuation(op, h0, f0, f, tol)
    rep = _report(spec, op, h, nrm, ok, t_done, start)
    rep.notes.extend(_forced_notes(pc))
    rep.extra["precheck"] = pc.as_dict()
    return rep


def random_convex_start(rng, M, scale=1.0, modes=4, amplitude=0.1):
    """Positive support function with h'' + h > 0 from a few Fourier modes."""
    theta = 2 * math.pi * np.arange(M) / M
    while True:
        h = np.full(M, scale * rng.uniform(0.5, 2.0))
        for k in range(2, modes + 2):
            a, b = amplitude * scale * rng.standard_normal(2) / k**2
            h += a * np.cos(k * theta) + b * np.sin(k * theta)
        d2h = np.fft.ifft(-(np.fft.fftfreq(M, 1.0 / M) ** 2) * np.fft.fft(h)).real
        if np.all(h > 0) and np.all(d2h + h > 0):
            return h


def ma_multistart(spec, starts=None, seed=None):
    """Solve from several random convex initial guesses (parallel, seeded)."""
    f = _data(spec)
    M = len(f)
    starts = spec.config.multistart if starts is None else starts
    seed = spec.seed if seed is None else seed

    def run(k):
        rng = np.random.default_rng([seed, k])
        h0 = random_convex_start(rng, M)
        rep = solve_ma_circle(spec, h_init=h0)
        rep.extra["start"] = {"kind": "random", "seed": seed, "index": k}
        return rep

    return parallel_map(run, range(starts))


def ma_spec(weight, p, f, **kwargs):
    """ProblemSpec for the planar equation with data samples ``f``."""
    f = np.asarray(f, dtype=float)
    d = DirectionSet.uniform_circle(len(f))
    nu = SphericalMeasure(d, f * d.quadrature_weights)
    return ProblemSpec(weight, nu, p, "ma_circle", f=f, **kwargs)
