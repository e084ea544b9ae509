"""Independent reference computations used by the tests.

Nothing here imports the package: closed forms, scipy quadrature and
elementary clipping give values the implementation is checked against.
"""

import math

import numpy as np
from scipy import integrate, optimize, special


def normal_cdf(x):
    return 0.5 * (1.0 + special.erf(x / math.sqrt(2.0)))


def gaussian_density(t, n):
    return (2 * math.pi) ** (-n / 2) * np.exp(-0.5 * np.asarray(t, dtype=float) ** 2)


def gaussian_g(t, n, p):
    return t ** (n - p) * gaussian_density(t, n)


def gaussian_threshold_closed(n, p):
    return (2 * math.pi) ** (-n / 2) * (n - p) ** ((n - p) / 2) * math.exp(-(n - p) / 2)


def gaussian_threshold_numeric(n, p):
    """(argmax, max) of g by bounded scalar optimisation."""
    res = optimize.minimize_scalar(lambda t: -gaussian_g(t, n, p), bounds=(1e-6, 20.0), method="bounded",
                                   options={"xatol": 1e-13})
    # polish with Newton on log g: (n - p)/t - t = 0
    t = res.x
    for _ in range(5):
        t -= ((n - p) / t - t) / (-(n - p) / t**2 - 1)
    return t, float(gaussian_g(t, n, p))


def gaussian_roots(n, p, c):
    """All t > 0 with g(t) = c, by bisection on monotone pieces."""
    f = lambda t: float(gaussian_g(t, n, p)) - c  # noqa: E731
    if p >= n:
        hi = 1.0
        while f(hi) > 0:
            hi *= 2
        if p == n:
            return [optimize.brentq(f, 1e-12, hi, rtol=4 * np.finfo(float).eps)]
        # g blows up at 0: bisect log g - log c in log t to avoid overflow
        log_f = lambda s: (n - p) * s - 0.5 * n * math.log(2 * math.pi) - 0.5 * math.exp(2 * s) - math.log(c)  # noqa: E731
        return [math.exp(optimize.brentq(log_f, -700.0, math.log(hi), xtol=1e-15, rtol=4 * np.finfo(float).eps))]
    tc = math.sqrt(n - p)
    if f(tc) < 0:
        return []
    lo, hi = 1e-12, 50.0
    return [optimize.brentq(f, lo, tc, rtol=4 * np.finfo(float).eps),
            optimize.brentq(f, tc, hi, rtol=4 * np.finfo(float).eps)]


def gaussian_disc_mass(r):
    return 1.0 - math.exp(-r * r / 2)


def gaussian_box_mass(half_width, n):
    return (2 * normal_cdf(half_width) - 1) ** n


def edge_mass(psi, a, b):
    """int over the segment [a, b] of psi(|y|) by scipy quad."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    L = np.linalg.norm(b - a)
    d = b - a
    s0 = float(np.clip(-a @ d / (L * L), 0, 1))
    f = lambda s: float(psi(np.linalg.norm(a + s * d)))  # noqa: E731
    val = sum(integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
              for lo, hi in ((0.0, s0), (s0, 1.0)) if hi > lo)
    return L * val


# -- planar polygons by clipping ------------------------------------------------------

def clip_polygon(normals, offsets, box=None):
    """Sutherland-Hodgman intersection of halfplanes <x, u> <= h, CCW vertices."""
    if box is None:
        # a modest box keeps intersection roundoff near eps
        box = 100.0 * float(np.max(offsets))
    poly = [np.array(v, float) for v in ((-box, -box), (box, -box), (box, box), (-box, box))]
    for u, h in zip(np.asarray(normals, float), np.asarray(offsets, float)):
        out = []
        for k in range(len(poly)):
            P, Q = poly[k], poly[(k + 1) % len(poly)]
            fp, fq = P @ u - h, Q @ u - h
            if fp <= 0:
                out.append(P)
            if fp * fq < 0:
                out.append(P + (Q - P) * fp / (fp - fq))
        poly = out
    return np.array(poly)


def shoelace(V):
    x, y = V[:, 0], V[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def support_from_vertices(V, u):
    return np.max(np.asarray(u) @ np.asarray(V).T, axis=-1)


def hausdorff_sampled(VK, VL, count=20000):
    """sup_u |h_K(u) - h_L(u)| over a dense angle / Fibonacci sample."""
    n = np.asarray(VK).shape[1]
    if n == 2:
        th = 2 * math.pi * np.arange(count) / count
        u = np.column_stack([np.cos(th), np.sin(th)])
    else:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        r = np.sqrt(1 - z * z)
        phi = math.pi * (3 - math.sqrt(5)) * k
        u = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return float(np.max(np.abs(support_from_vertices(VK, u) - support_from_vertices(VL, u))))


def polar_mass_2d(V, psi):
    """mu of a convex polygon containing the origin, in polar coordinates."""
    V = np.asarray(V, float)
    ang = np.sort(np.mod(np.arctan2(V[:, 1], V[:, 0]), 2 * math.pi))
    edges = list(zip(V, np.roll(V, -1, axis=0)))

    def rho(theta):
        u = np.array([math.cos(theta), math.sin(theta)])
        best = math.inf
        for a, b in edges:
            d = b - a
            nrm = np.array([d[1], -d[0]])
            nrm /= np.linalg.norm(nrm)
            h = a @ nrm
            c = u @ nrm
            if c > 1e-15:
                best = min(best, h / c)
        return best

    def radial(r):
        return integrate.quad(lambda t: float(psi(t)) * t, 0, r, epsabs=1e-14, epsrel=1e-13)[0]

    pts = np.concatenate([[0.0], ang, [2 * math.pi]])
    return sum(integrate.quad(lambda th: radial(rho(th)), lo, hi, epsabs=1e-12, epsrel=1e-12)[0]
               for lo, hi in zip(pts[:-1], pts[1:]) if hi > lo)


def ball_mass(psi, n, r):
    area = 2 * math.pi if n == 2 else 4 * math.pi
    return area * integrate.quad(lambda t: float(psi(t)) * t ** (n - 1), 0, r, epsabs=1e-14, epsrel=1e-13)[0]


def richardson_derivative(fun, step):
    """Central difference with one Richardson extrapolation (error O(step^4))."""
    def central(s):
        return (fun(s) - fun(-s)) / (2 * s)

    return (4 * central(step / 2) - central(step)) / 3


def hull_distance(x, V, weight=1e5):
    """Distance from x to conv(V): bounded least squares over convex weights.

    The sum-to-one constraint enters as a heavy row; its error decays like weight^-2.
    """
    V = np.asarray(V, float)
    A = np.vstack([V.T, weight * np.ones(len(V))])
    b = np.concatenate([x, [weight]])
    lam = optimize.lsq_linear(A, b, bounds=(0, np.inf), method="bvls", tol=1e-14).x
    return float(np.linalg.norm(V.T @ lam - x))


def hausdorff_vertices(VK, VL):
    """Exact Hausdorff distance of two polytopes given by their vertices."""
    return max(max(hull_distance(v, VL) for v in VK), max(hull_distance(v, VK) for v in VL))


def circle_residual(h, f, p, psi):
    """sup |h^(1-p) psi(sqrt(h^2 + h'^2)) (h'' + h) - f| with FFT derivatives."""
    h = np.asarray(h, float)
    M = len(h)
    k = np.fft.fftfreq(M, 1.0 / M)
    k[M // 2] = 0.0  # Nyquist mode has no odd derivative
    H = np.fft.fft(h)
    dh = np.fft.ifft(1j * k * H).real
    d2h = np.fft.ifft(-(np.fft.fftfreq(M, 1.0 / M) ** 2) * H).real
    rho = np.sqrt(h * h + dh * dh)
    return float(np.max(np.abs(h ** (1.0 - p) * psi(rho) * (d2h + h) - f)))


def polygon_ball_distance(V, R):
    """Hausdorff distance from a convex polygon (CCW vertices, origin inside) to the disc of radius R."""
    V = np.asarray(V, float)
    W = np.roll(V, -1, axis=0)
    E = W - V
    s = np.clip(-np.einsum("ij,ij->i", V, E) / np.einsum("ij,ij->i", E, E), 0.0, 1.0)
    inner = float(np.min(np.linalg.norm(V + s[:, None] * E, axis=1)))
    outer = float(np.max(np.linalg.norm(V, axis=1)))
    return max(outer - R, R - inner)


def polygon_centroid(V):
    V = np.asarray(V, float)
    x, y = V[:, 0], V[:, 1]
    x1, y1 = np.roll(x, -1), np.roll(y, -1)
    c = x * y1 - x1 * y
    return np.array([np.sum((x + x1) * c), np.sum((y + y1) * c)]) / (3.0 * np.sum(c))
