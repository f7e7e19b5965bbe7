"""Moments of the standard bivariate normal over convex polygons.

For a polygon far out in the tail of a Gaussian, a fixed cubature rule only
samples the density at a handful of nodes and the resulting mass and
centroid are dominated by whichever node happens to sit closest to the
mean. Here the moments are reduced to one-dimensional edge integrals that
keep full relative accuracy however small the mass is:

* the first and second moments follow from the divergence theorem
  (``z phi = -grad phi``) and reduce to closed forms in ``erfcx``;
* the mass is the winding indicator minus, for every edge, the angular
  integral of ``exp(-R^2 / 2)`` seen from the origin. Written in the variable
  ``xi = asinh(s / h)`` that integrand is ``exp(-Phi(xi))`` with ``Phi``
  convex, so it is integrated piecewise on panels of equal ``Phi`` increment
  with Gauss-Legendre, after factoring out its largest value.

Polygons are given in whitened coordinates, counter-clockwise. The
``mixture_rows_*`` functions apply this per component to a batch of cells
and also return the cells' exact area and polar second moment.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfcx

from ._backend import BACKEND, njit

INV_TWO_PI = 1.0 / (2.0 * math.pi)
SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
SQRT_TWO_PI = math.sqrt(2.0 * math.pi)
# Integrand decay (in log units) beyond which an edge integral is truncated.
TAIL_CUTOFF = 40.0
PANELS = 12
NEWTON_ITERS = 60
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _logcosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


def _phi(xi, log_h):
    """``log cosh xi + (h cosh xi)^2 / 2``; ``log_h = -inf`` encodes ``h = 0``."""
    lc = _logcosh(xi)
    with np.errstate(over="ignore"):
        hc = np.exp(log_h + lc)
        return lc + 0.5 * hc * hc


def _dphi(xi, log_h):
    with np.errstate(over="ignore"):
        hc = np.exp(log_h + _logcosh(xi))
        return np.tanh(xi) * (1.0 + hc * hc)


def _solve_phi(target, lo, hi, log_h):
    """Root of ``Phi(xi) = target`` in ``[lo, hi]`` for ``Phi`` convex increasing there.

    Newton from the right end approaches the root monotonically from above.
    """
    xi = hi.copy()
    for _ in range(NEWTON_ITERS):
        f = _phi(xi, log_h) - target
        d = _dphi(xi, log_h)
        step = np.where(d > 0, f / np.where(d > 0, d, 1.0), 0.0)
        xi = np.clip(xi - np.where(f > 0, step, 0.0), lo, hi)
    return xi


def _half_line_integral(alpha, beta, log_h):
    """``int_alpha^beta exp(-Phi)`` for ``0 <= alpha <= beta`` (vectorised)."""
    phi_a = _phi(alpha, log_h)
    h = np.exp(log_h)
    # upper bounds for the truncation point, from Phi >= xi - log 2 and Phi >= (h cosh xi)^2 / 2
    target = phi_a + TAIL_CUTOFF
    bound = target + math.log(2.0)
    with np.errstate(divide="ignore"):
        bound = np.minimum(bound, np.arccosh(np.maximum(np.sqrt(2.0 * target) / np.where(h > 0, h, 1e-300), 1.0)))
    end = np.minimum(beta, np.maximum(bound, alpha))
    span = np.minimum(_phi(end, log_h) - phi_a, TAIL_CUTOFF)
    levels = phi_a[:, None] + span[:, None] * np.linspace(0.0, 1.0, PANELS + 1)[None, :]
    lo = np.repeat(alpha[:, None], PANELS + 1, axis=1)
    hi = np.repeat(end[:, None], PANELS + 1, axis=1)
    lh = np.repeat(log_h[:, None], PANELS + 1, axis=1)
    knots = _solve_phi(levels, lo, hi, lh)
    knots[:, 0] = alpha
    left, right = knots[:, :-1], knots[:, 1:]
    half = 0.5 * (right - left)
    nodes = (left + half)[..., None] + half[..., None] * _GL_X
    vals = np.exp(-(_phi(nodes, lh[:, :-1, None]) - phi_a[:, None, None]))
    scaled = (vals * _GL_W).sum(axis=2) * half
    return np.exp(-phi_a) * scaled.sum(axis=1)


def _edge_angular_tail(h, sa, sb):
    """``int exp(-R^2/2) dtheta`` along edges at distance ``h`` spanning ``[sa, sb]``."""
    out = np.zeros_like(h)
    live = (h > 1e-150) & (sb > sa)
    if not np.any(live):
        return out
    h, sa, sb = h[live], sa[live], sb[live]
    log_h = np.log(h)
    xa, xb = np.arcsinh(sa / h), np.arcsinh(sb / h)
    straddle = (xa < 0) & (xb > 0)
    neg = xb <= 0
    alpha = np.where(straddle, 0.0, np.where(neg, -xb, xa))
    beta = np.where(straddle, -xa, np.where(neg, -xa, xb))
    total = _half_line_integral(alpha, beta, log_h)
    if np.any(straddle):
        idx = np.flatnonzero(straddle)
        total[idx] += _half_line_integral(np.zeros(len(idx)), xb[idx], log_h[idx])
    out[live] = total
    return out


def _edge_gauss_line(h, sa, sb, ra2, rb2):
    """``int_sa^sb exp(-(h^2 + s^2)/2) ds`` with relative accuracy in the tails."""
    k = 1.0 / math.sqrt(2.0)
    ea, eb = np.exp(-0.5 * ra2), np.exp(-0.5 * rb2)
    # each branch is only used where its erfcx arguments are non-negative; elsewhere inf * 0 may appear
    with np.errstate(invalid="ignore", over="ignore"):
        pos = SQRT_HALF_PI * (erfcx(sa * k) * ea - erfcx(sb * k) * eb)
        neg = SQRT_HALF_PI * (erfcx(-sb * k) * eb - erfcx(-sa * k) * ea)
        tails = erfcx(sb * k) * np.exp(-0.5 * sb * sb) + erfcx(-sa * k) * np.exp(-0.5 * sa * sa)
        mid = np.exp(-0.5 * h * h) * (SQRT_TWO_PI - SQRT_HALF_PI * tails)
    return np.where(sa >= 0, pos, np.where(sb <= 0, neg, mid))


def polygon_normal_moments(flat, offsets):
    """Standard-normal moments over each polygon of a packed batch.

    ``flat`` stacks the counter-clockwise vertices of every polygon and
    ``offsets`` (length ``P + 1``) delimits them. Returns ``m0 (P,)``,
    ``m1 (P, 2)`` and ``m2 (P, 2, 2)``: the integrals of ``phi``, ``z phi``
    and ``z z^T phi``.
    """
    flat = np.asarray(flat, dtype=float)
    offsets = np.asarray(offsets)
    counts = np.diff(offsets)
    owner = np.repeat(np.arange(len(counts)), counts)
    nxt = np.arange(len(flat)) + 1
    nxt[offsets[1:] - 1] = offsets[:-1]
    a, b = flat, flat[nxt]
    e = b - a
    length = np.hypot(e[:, 0], e[:, 1])
    keep = length > 0
    t = np.where(keep[:, None], e / np.where(keep, length, 1.0)[:, None], 0.0)
    sa = (a * t).sum(axis=1)
    sb = (b * t).sum(axis=1)
    f = a - sa[:, None] * t
    normal = np.stack([t[:, 1], -t[:, 0]], axis=1)
    d = (f * normal).sum(axis=1)
    h = np.abs(d)
    ra2 = (a * a).sum(axis=1)
    rb2 = (b * b).sum(axis=1)

    npoly = len(counts)
    n_out = np.bincount(owner, keep & (d < 0), minlength=npoly)
    n_on = np.bincount(owner, keep & (d == 0), minlength=npoly)
    # origin on the boundary: the fraction of a full turn the other edges subtend
    turn = np.where(keep & (d > 0), np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0], (a * b).sum(axis=1)), 0.0)
    on_value = INV_TWO_PI * np.bincount(owner, turn, minlength=npoly)
    winding = np.where(n_out > 0, 0.0, np.where(n_on > 0, on_value, 1.0))

    tail = np.sign(d) * _edge_angular_tail(h, sa, sb) * keep
    m0 = winding - INV_TWO_PI * np.bincount(owner, tail, minlength=npoly)

    e0 = INV_TWO_PI * _edge_gauss_line(h, sa, sb, ra2, rb2) * keep
    e1 = INV_TWO_PI * (np.exp(-0.5 * ra2) - np.exp(-0.5 * rb2)) * keep
    m1 = -np.stack([np.bincount(owner, normal[:, i] * e0, minlength=npoly) for i in range(2)], axis=1)
    flux = normal[:, :, None] * (f[:, None, :] * e0[:, None, None] + t[:, None, :] * e1[:, None, None])
    m2 = np.empty((npoly, 2, 2))
    for i in range(2):
        for j in range(2):
            m2[:, i, j] = -np.bincount(owner, flux[:, i, j], minlength=npoly)
    m2 = 0.5 * (m2 + m2.transpose(0, 2, 1))
    m2[:, 0, 0] += m0
    m2[:, 1, 1] += m0
    return m0, m1, m2


def _polygon_geometry(flat, offsets, positions):
    """Exact area and ``int |q - p_i|^2`` of each polygon (shoelace-type sums)."""
    counts = np.diff(offsets)
    owner = np.repeat(np.arange(len(counts)), counts)
    nxt = np.arange(len(flat)) + 1
    nxt[offsets[1:] - 1] = offsets[:-1]
    a = flat - positions[owner]
    b = flat[nxt] - positions[owner]
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    quad = (a * a).sum(axis=1) + (a * b).sum(axis=1) + (b * b).sum(axis=1)
    area = 0.5 * np.bincount(owner, cross, minlength=len(counts))
    polar = np.bincount(owner, cross * quad, minlength=len(counts)) / 12.0
    return area, polar


def mixture_rows_numpy(flat, offsets, positions, means, chol, weights):
    """Per-cell ``[mass, int x phi, int y phi, int |q-p|^2, int |q-p|^2 phi, area]``.

    ``chol`` holds the lower Cholesky factor of each covariance packed as
    ``(l11, l21, l22)``.
    """
    out = np.zeros((len(offsets) - 1, 6))
    for j in range(len(weights)):
        l11, l21, l22 = chol[j]
        mu = means[j]
        d = flat - mu
        z = np.empty_like(d)
        z[:, 0] = d[:, 0] / l11
        z[:, 1] = (d[:, 1] - l21 * z[:, 0]) / l22
        m0, m1, m2 = polygon_normal_moments(z, offsets)
        lm1 = np.stack([l11 * m1[:, 0], l21 * m1[:, 0] + l22 * m1[:, 1]], axis=1)
        trace = (l11 * l11 + l21 * l21) * m2[:, 0, 0] + 2.0 * l21 * l22 * m2[:, 0, 1] + l22 * l22 * m2[:, 1, 1]
        off = mu - positions
        w = weights[j]
        out[:, 0] += w * m0
        out[:, 1] += w * (mu[0] * m0 + lm1[:, 0])
        out[:, 2] += w * (mu[1] * m0 + lm1[:, 1])
        out[:, 4] += w * ((off * off).sum(axis=1) * m0 + 2.0 * (off * lm1).sum(axis=1) + trace)
    out[:, 5], out[:, 3] = _polygon_geometry(flat, offsets, positions)
    return out


# --------------------------------------------------------------------------
# numba: the same reductions, one edge at a time
# --------------------------------------------------------------------------

_SQRT_PI = math.sqrt(math.pi)
_LOG2 = math.log(2.0)


@njit
def _erfcx_pos(x):
    """``exp(x^2) erfc(x)`` for ``x >= 0``."""
    if x < 25.0:
        return math.exp(x * x) * math.erfc(x)
    inv = 1.0 / (2.0 * x * x)
    term = 1.0
    total = 1.0
    for k in range(1, 10):
        term *= -(2 * k - 1) * inv
        total += term
    return total / (x * _SQRT_PI)


@njit
def _logcosh_s(x):
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x)) - _LOG2


@njit
def _phi_s(xi, h):
    lc = _logcosh_s(xi)
    if h <= 0.0:
        return lc
    e = math.log(h) + lc
    if e > 350.0:
        return math.inf
    hc = math.exp(e)
    return lc + 0.5 * hc * hc


@njit
def _dphi_s(xi, h):
    e = math.log(h) + _logcosh_s(xi)
    if e > 350.0:
        return math.inf
    hc = math.exp(e)
    return math.tanh(xi) * (1.0 + hc * hc)


@njit
def _half_line_s(alpha, beta, h, gx, gw):
    phi_a = _phi_s(alpha, h)
    target = phi_a + TAIL_CUTOFF
    bound = target + _LOG2
    arg = math.sqrt(2.0 * target) / h
    if arg > 1.0:
        bound = min(bound, math.acosh(arg))
    end = min(beta, max(bound, alpha))
    span = min(_phi_s(end, h) - phi_a, TAIL_CUTOFF)
    total = 0.0
    left = alpha
    for k in range(1, PANELS + 1):
        level = phi_a + span * k / PANELS
        xi = end
        for _ in range(NEWTON_ITERS):
            f = _phi_s(xi, h) - level
            if not f > 0.0:
                break
            d = _dphi_s(xi, h)
            if not d > 0.0:
                break
            nxt = xi - f / d
            if nxt < alpha:
                nxt = alpha
            if nxt >= xi:
                break
            xi = nxt
        right = xi
        half = 0.5 * (right - left)
        mid = left + half
        acc = 0.0
        for q in range(gx.shape[0]):
            acc += gw[q] * math.exp(-(_phi_s(mid + half * gx[q], h) - phi_a))
        total += acc * half
        left = right
    return math.exp(-phi_a) * total


@njit
def _angular_tail_s(h, sa, sb, gx, gw):
    if not (h > 1e-150 and sb > sa):
        return 0.0
    xa = math.asinh(sa / h)
    xb = math.asinh(sb / h)
    if xa < 0.0 < xb:
        return _half_line_s(0.0, -xa, h, gx, gw) + _half_line_s(0.0, xb, h, gx, gw)
    if xb <= 0.0:
        return _half_line_s(-xb, -xa, h, gx, gw)
    return _half_line_s(xa, xb, h, gx, gw)


@njit
def _gauss_line_s(h, sa, sb, ra2, rb2):
    k = 1.0 / math.sqrt(2.0)
    if sa >= 0.0:
        return SQRT_HALF_PI * (_erfcx_pos(sa * k) * math.exp(-0.5 * ra2) - _erfcx_pos(sb * k) * math.exp(-0.5 * rb2))
    if sb <= 0.0:
        return SQRT_HALF_PI * (_erfcx_pos(-sb * k) * math.exp(-0.5 * rb2) - _erfcx_pos(-sa * k) * math.exp(-0.5 * ra2))
    return math.exp(-0.5 * h * h) * (SQRT_TWO_PI - SQRT_HALF_PI * (math.erfc(sb * k) + math.erfc(-sa * k)))


@njit
def _normal_moments_s(z, gx, gw):
    """``(m0, m1x, m1y, m2xx, m2xy, m2yy)`` of one whitened polygon."""
    n = z.shape[0]
    outside = False
    on_edge = False
    turn = 0.0
    tail = 0.0
    m1x = 0.0
    m1y = 0.0
    fxx = 0.0
    fxy = 0.0
    fyx = 0.0
    fyy = 0.0
    for k in range(n):
        ax = z[k, 0]
        ay = z[k, 1]
        bx = z[(k + 1) % n, 0]
        by = z[(k + 1) % n, 1]
        ex = bx - ax
        ey = by - ay
        length = math.hypot(ex, ey)
        if not length > 0.0:
            continue
        tx = ex / length
        ty = ey / length
        sa = ax * tx + ay * ty
        sb = bx * tx + by * ty
        fx = ax - sa * tx
        fy = ay - sa * ty
        nx = ty
        ny = -tx
        d = fx * nx + fy * ny
        if d < 0.0:
            outside = True
        elif d == 0.0:
            on_edge = True
        else:
            turn += math.atan2(ax * by - ay * bx, ax * bx + ay * by)
        ra2 = ax * ax + ay * ay
        rb2 = bx * bx + by * by
        t = _angular_tail_s(abs(d), sa, sb, gx, gw)
        if d < 0.0:
            t = -t
        tail += t
        e0 = INV_TWO_PI * _gauss_line_s(abs(d), sa, sb, ra2, rb2)
        e1 = INV_TWO_PI * (math.exp(-0.5 * ra2) - math.exp(-0.5 * rb2))
        m1x -= nx * e0
        m1y -= ny * e0
        fxx += nx * (fx * e0 + tx * e1)
        fxy += nx * (fy * e0 + ty * e1)
        fyx += ny * (fx * e0 + tx * e1)
        fyy += ny * (fy * e0 + ty * e1)
    if outside:
        winding = 0.0
    elif on_edge:
        winding = INV_TWO_PI * turn
    else:
        winding = 1.0
    m0 = winding - INV_TWO_PI * tail
    return m0, m1x, m1y, m0 - fxx, -0.5 * (fxy + fyx), m0 - fyy


@njit
def mixture_rows_numba(flat, offsets, positions, means, chol, weights):
    ncell = offsets.shape[0] - 1
    out = np.zeros((ncell, 6))
    gx = _GL_X
    gw = _GL_W
    for i in range(ncell):
        start = offsets[i]
        stop = offsets[i + 1]
        nv = stop - start
        px = positions[i, 0]
        py = positions[i, 1]
        z = np.empty((nv, 2))
        for j in range(weights.shape[0]):
            l11 = chol[j, 0]
            l21 = chol[j, 1]
            l22 = chol[j, 2]
            mx = means[j, 0]
            my = means[j, 1]
            for k in range(nv):
                zx = (flat[start + k, 0] - mx) / l11
                z[k, 0] = zx
                z[k, 1] = (flat[start + k, 1] - my - l21 * zx) / l22
            m0, m1x, m1y, m2xx, m2xy, m2yy = _normal_moments_s(z, gx, gw)
            lx = l11 * m1x
            ly = l21 * m1x + l22 * m1y
            trace = (l11 * l11 + l21 * l21) * m2xx + 2.0 * l21 * l22 * m2xy + l22 * l22 * m2yy
            ox = mx - px
            oy = my - py
            w = weights[j]
            out[i, 0] += w * m0
            out[i, 1] += w * (mx * m0 + lx)
            out[i, 2] += w * (my * m0 + ly)
            out[i, 4] += w * ((ox * ox + oy * oy) * m0 + 2.0 * (ox * lx + oy * ly) + trace)
        area = 0.0
        polar = 0.0
        for k in range(nv):
            ax = flat[start + k, 0] - px
            ay = flat[start + k, 1] - py
            bx = flat[start + (k + 1) % nv, 0] - px
            by = flat[start + (k + 1) % nv, 1] - py
            cross = ax * by - ay * bx
            area += cross
            polar += cross * (ax * ax + ay * ay + ax * bx + ay * by + bx * bx + by * by)
        out[i, 3] = polar / 12.0
        out[i, 5] = 0.5 * area
    return out


mixture_rows = mixture_rows_numba if BACKEND == "numba" else mixture_rows_numpy
