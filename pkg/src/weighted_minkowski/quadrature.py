"""Vectorised adaptive Gauss-Legendre rules on batches of intervals and triangles.

Every routine integrates many independent integrands at once.  The integrand
receives the quadrature points together with an ``owner`` index array telling
it which integral each point belongs to, so per-integral parameters (facet
offsets, edge endpoints, ...) can be gathered with fancy indexing.
"""

import numpy as np

_X_LO, _W_LO = np.polynomial.legendre.leggauss(12)
_X_HI, _W_HI = np.polynomial.legendre.leggauss(24)

# Collapsed (Duffy) tensor rule on the reference triangle (0,0),(1,0),(0,1).
_TX_LO, _TW_LO = np.polynomial.legendre.leggauss(7)
_TX_HI, _TW_HI = np.polynomial.legendre.leggauss(14)

# panels below this relative difference are at roundoff level
ROUNDOFF = 64 * np.finfo(float).eps


def _triangle_rule(x, w):
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu) * uu
    # (s, t) = (u (1 - v), u v) maps the unit square onto the triangle
    s = (uu * (1.0 - vv)).ravel()
    t = (uu * vv).ravel()
    return s, t, ww.ravel()


_TRI_LO = _triangle_rule(_TX_LO, _TW_LO)
_TRI_HI = _triangle_rule(_TX_HI, _TW_HI)


def integrate_intervals(f, a, b, tol=1e-12, max_depth=40):
    """Integrate ``f`` over each interval ``[a[k], b[k]]``.

    ``f(x, owner)`` must accept ``x`` of shape ``(m, q)`` and ``owner`` of
    shape ``(m,)`` and return values shaped like ``x``.  Panels whose 12/24
    point estimates differ by more than their share of ``tol`` are bisected.
    Returns the integrals (shape ``(K,)``).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    K = a.shape[0]
    out = np.zeros(K)
    if K == 0:
        return out
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (K,))
    length = np.abs(b - a)
    length = np.where(length > 0, length, 1.0)

    owner = np.arange(K)
    lo, hi = a.copy(), b.copy()
    for depth in range(max_depth + 1):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x_hi = mid[:, None] + half[:, None] * _X_HI[None, :]
        x_lo = mid[:, None] + half[:, None] * _X_LO[None, :]
        i_hi = half * (f(x_hi, owner) @ _W_HI)
        i_lo = half * (f(x_lo, owner) @ _W_LO)
        share = tol[owner] * np.abs(hi - lo) / length[owner]
        done = np.abs(i_hi - i_lo) <= np.maximum(share, ROUNDOFF * np.abs(i_hi) + 1e-300)
        if depth == max_depth:
            done[:] = True
        np.add.at(out, owner[done], i_hi[done])
        if done.all():
            break
        keep = ~done
        owner = np.repeat(owner[keep], 2)
        m = mid[keep]
        lo = np.column_stack([lo[keep], m]).ravel()
        hi = np.column_stack([m, hi[keep]]).ravel()
    return out


def integrate_triangles(f, A, B, C, tol=1e-12, max_depth=12):
    """Integrate ``f`` over triangles with vertices ``A[k], B[k], C[k]``.

    ``f(y, owner)`` receives points ``y`` of shape ``(m, q, d)`` and returns
    values of shape ``(m, q)``.  Works for triangles embedded in any
    dimension ``d >= 2`` (the area element is taken from the Gram determinant).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    K = A.shape[0]
    out = np.zeros(K)
    if K == 0:
        return out
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (K,))
    area0 = _tri_area(A, B, C)
    area0 = np.where(area0 > 0, area0, 1.0)

    owner = np.arange(K)
    for depth in range(max_depth + 1):
        area = _tri_area(A, B, C)
        e1 = B - A
        e2 = C - A
        vals = []
        for s, t, w in (_TRI_HI, _TRI_LO):
            y = A[:, None, :] + s[None, :, None] * e1[:, None, :] + t[None, :, None] * e2[:, None, :]
            vals.append(2.0 * area * (f(y, owner) @ w))
        i_hi, i_lo = vals
        share = tol[owner] * area / area0[owner]
        done = np.abs(i_hi - i_lo) <= np.maximum(share, ROUNDOFF * np.abs(i_hi) + 1e-300)
        if depth == max_depth:
            done[:] = True
        np.add.at(out, owner[done], i_hi[done])
        if done.all():
            break
        keep = ~done
        a, b, c = A[keep], B[keep], C[keep]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        A = np.concatenate([a, ab, ca, ab])
        B = np.concatenate([ab, b, bc, bc])
        C = np.concatenate([ca, bc, c, ca])
        owner = np.tile(owner[keep], 4)
    return out


def _tri_area(A, B, C):
    e1 = B - A
    e2 = C - A
    g11 = np.einsum("ij,ij->i", e1, e1)
    g22 = np.einsum("ij,ij->i", e2, e2)
    g12 = np.einsum("ij,ij->i", e1, e2)
    return 0.5 * np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))
