"""Numeric inner loops used every simulation step.

Every kernel exists twice: a ``*_numpy`` version written with vectorised
numpy and a ``*_numba`` version with explicit loops compiled by numba.
The module-level names (``mixture_pdf``, ``clip_halfplane``, ...) point at
whichever family :mod:`oavc_coverage._backend` selected. Both families
implement the same arithmetic; results agree to rounding (numba and numpy
use different ``exp`` implementations).

Inputs are raw arrays:

* mixtures are ``means (K, 2)``, ``prec (K, 3)`` packed inverse covariances
  ``[p11, p12, p22]`` and ``coef (K,)`` = weight / (2 pi sqrt(det cov));
* polygons are ``(V, 2)`` counter-clockwise vertex arrays;
* the domain rectangle is ``[xmin, xmax, ymin, ymax]``.
"""

import math

import numpy as np

from ._backend import BACKEND, njit

# Vertices closer than this (m) are merged after clipping.
MERGE_TOL = 1e-9

_EMPTY = np.empty((0, 2))


# --------------------------------------------------------------------------
# half-plane construction (shared by both families)
# --------------------------------------------------------------------------


@njit
def bisector_plane(px, py, qx, qy):
    """Half-plane {z : n.z <= c} of points at least as close to p as to q."""
    dx = qx - px
    dy = qy - py
    d = math.hypot(dx, dy)
    nx = dx / d
    ny = dy / d
    return nx, ny, nx * 0.5 * (px + qx) + ny * 0.5 * (py + qy)


@njit
def tangent_plane(px, py, ox, oy, r):
    """Half-plane containing p whose boundary is tangent to disk (o, r).

    Algebraically this is the linear form of
    ``|z - p|^2 <= |z - o|^2 - w`` with ``w = 2 r |p - o| - |p - o|^2``;
    the offset is written as ``n.o - r`` which is the same number without
    the cancellation in ``|o|^2 - |p|^2``.
    """
    dx = ox - px
    dy = oy - py
    d = math.hypot(dx, dy)
    nx = dx / d
    ny = dy / d
    return nx, ny, nx * ox + ny * oy - r


def rect_polygon(rect):
    xmin, xmax, ymin, ymax = rect
    return np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]], dtype=float)


# --------------------------------------------------------------------------
# numpy family
# --------------------------------------------------------------------------


def mixture_pdf_numpy(points, means, prec, coef):
    dx = points[:, 0:1] - means[:, 0]
    dy = points[:, 1:2] - means[:, 1]
    quad = prec[:, 0] * dx * dx + 2.0 * prec[:, 1] * dx * dy + prec[:, 2] * dy * dy
    return (np.exp(-0.5 * quad) * coef).sum(axis=1)


def _merge_close(verts, tol):
    kept = []
    for v in verts:
        if not kept or math.hypot(v[0] - kept[-1][0], v[1] - kept[-1][1]) >= tol:
            kept.append(v)
    while len(kept) >= 2 and math.hypot(kept[-1][0] - kept[0][0], kept[-1][1] - kept[0][1]) < tol:
        kept.pop()
    if len(kept) < 3:
        return _EMPTY.copy()
    return np.array(kept)


def clip_halfplane_numpy(verts, nx, ny, offset, tol=MERGE_TOL):
    if len(verts) == 0:
        return _EMPTY.copy()
    s = verts[:, 0] * nx + verts[:, 1] * ny - offset
    inside = s <= 0.0
    if inside.all():
        return verts
    if not inside.any():
        return _EMPTY.copy()
    nxt = np.roll(verts, -1, axis=0)
    s_next = np.roll(s, -1)
    crossing = inside != np.roll(inside, -1)
    t = np.divide(s, s - s_next, out=np.zeros_like(s), where=crossing)
    inter = verts + t[:, None] * (nxt - verts)
    cand = np.stack([verts, inter], axis=1).reshape(-1, 2)
    mask = np.stack([inside, crossing], axis=1).reshape(-1)
    return _merge_close(cand[mask], tol)


def build_cell_numpy(i, positions, obs_centers, obs_radii, rect, tol=MERGE_TOL):
    poly = rect_polygon(rect)
    px, py = positions[i]
    for k in range(len(positions)):
        if k == i:
            continue
        nx, ny, c = bisector_plane(px, py, positions[k, 0], positions[k, 1])
        poly = clip_halfplane_numpy(poly, nx, ny, c, tol)
    for j in range(len(obs_radii)):
        nx, ny, c = tangent_plane(px, py, obs_centers[j, 0], obs_centers[j, 1], obs_radii[j])
        poly = clip_halfplane_numpy(poly, nx, ny, c, tol)
    return poly


def fan_nodes(verts, bary, w):
    """Quadrature nodes and weights for a convex polygon (fan from vertex 0)."""
    v0 = verts[0]
    va = verts[1:-1]
    vb = verts[2:]
    area = 0.5 * ((va[:, 0] - v0[0]) * (vb[:, 1] - v0[1]) - (va[:, 1] - v0[1]) * (vb[:, 0] - v0[0]))
    nodes = (
        bary[None, :, 0:1] * v0[None, None, :]
        + bary[None, :, 1:2] * va[:, None, :]
        + bary[None, :, 2:3] * vb[:, None, :]
    )
    weights = area[:, None] * w[None, :]
    return nodes.reshape(-1, 2), weights.reshape(-1)


def cells_moments_numpy(flat, offsets, positions, bary, w, means, prec, coef):
    n = len(offsets) - 1
    all_nodes = []
    all_weights = []
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        nodes, weights = fan_nodes(flat[offsets[i] : offsets[i + 1]], bary, w)
        all_nodes.append(nodes)
        all_weights.append(weights)
        counts[i] = len(weights)
    nodes = np.concatenate(all_nodes)
    weights = np.concatenate(all_weights)
    owner = np.repeat(np.arange(n), counts)
    phi = mixture_pdf_numpy(nodes, means, prec, coef)
    rel = nodes - positions[owner]
    r2 = rel[:, 0] * rel[:, 0] + rel[:, 1] * rel[:, 1]
    wphi = weights * phi
    cols = np.stack(
        [wphi, wphi * nodes[:, 0], wphi * nodes[:, 1], weights * r2, wphi * r2, weights], axis=1
    )
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return np.add.reduceat(cols, starts, axis=0)


# --------------------------------------------------------------------------
# numba family
# --------------------------------------------------------------------------


@njit
def mixture_pdf_numba(points, means, prec, coef):
    n = points.shape[0]
    out = np.zeros(n)
    for a in range(n):
        acc = 0.0
        for k in range(means.shape[0]):
            dx = points[a, 0] - means[k, 0]
            dy = points[a, 1] - means[k, 1]
            quad = prec[k, 0] * dx * dx + 2.0 * prec[k, 1] * dx * dy + prec[k, 2] * dy * dy
            acc += math.exp(-0.5 * quad) * coef[k]
        out[a] = acc
    return out


@njit
def _merge_close_numba(verts, cnt, tol):
    out = np.empty((cnt, 2))
    m = 0
    for a in range(cnt):
        if m == 0 or math.hypot(verts[a, 0] - out[m - 1, 0], verts[a, 1] - out[m - 1, 1]) >= tol:
            out[m, 0] = verts[a, 0]
            out[m, 1] = verts[a, 1]
            m += 1
    while m >= 2 and math.hypot(out[m - 1, 0] - out[0, 0], out[m - 1, 1] - out[0, 1]) < tol:
        m -= 1
    if m < 3:
        return np.empty((0, 2))
    return out[:m].copy()


@njit
def clip_halfplane_numba(verts, nx, ny, offset, tol=MERGE_TOL):
    nv = verts.shape[0]
    if nv == 0:
        return np.empty((0, 2))
    s = np.empty(nv)
    n_in = 0
    for a in range(nv):
        s[a] = verts[a, 0] * nx + verts[a, 1] * ny - offset
        if s[a] <= 0.0:
            n_in += 1
    if n_in == nv:
        return verts
    if n_in == 0:
        return np.empty((0, 2))
    out = np.empty((2 * nv, 2))
    cnt = 0
    for a in range(nv):
        b = (a + 1) % nv
        ina = s[a] <= 0.0
        inb = s[b] <= 0.0
        if ina:
            out[cnt, 0] = verts[a, 0]
            out[cnt, 1] = verts[a, 1]
            cnt += 1
        if ina != inb:
            t = s[a] / (s[a] - s[b])
            out[cnt, 0] = verts[a, 0] + t * (verts[b, 0] - verts[a, 0])
            out[cnt, 1] = verts[a, 1] + t * (verts[b, 1] - verts[a, 1])
            cnt += 1
    return _merge_close_numba(out, cnt, tol)


@njit
def build_cell_numba(i, positions, obs_centers, obs_radii, rect, tol=MERGE_TOL):
    poly = np.empty((4, 2))
    poly[0, 0] = rect[0]
    poly[0, 1] = rect[2]
    poly[1, 0] = rect[1]
    poly[1, 1] = rect[2]
    poly[2, 0] = rect[1]
    poly[2, 1] = rect[3]
    poly[3, 0] = rect[0]
    poly[3, 1] = rect[3]
    px = positions[i, 0]
    py = positions[i, 1]
    for k in range(positions.shape[0]):
        if k == i:
            continue
        nx, ny, c = bisector_plane(px, py, positions[k, 0], positions[k, 1])
        poly = clip_halfplane_numba(poly, nx, ny, c, tol)
    for j in range(obs_radii.shape[0]):
        nx, ny, c = tangent_plane(px, py, obs_centers[j, 0], obs_centers[j, 1], obs_radii[j])
        poly = clip_halfplane_numba(poly, nx, ny, c, tol)
    return poly


@njit
def cells_moments_numba(flat, offsets, positions, bary, w, means, prec, coef):
    n = offsets.shape[0] - 1
    out = np.zeros((n, 6))
    nq = w.shape[0]
    for i in range(n):
        start = offsets[i]
        stop = offsets[i + 1]
        x0 = flat[start, 0]
        y0 = flat[start, 1]
        px = positions[i, 0]
        py = positions[i, 1]
        for t in range(start + 1, stop - 1):
            xa = flat[t, 0]
            ya = flat[t, 1]
            xb = flat[t + 1, 0]
            yb = flat[t + 1, 1]
            area = 0.5 * ((xa - x0) * (yb - y0) - (ya - y0) * (xb - x0))
            for q in range(nq):
                x = bary[q, 0] * x0 + bary[q, 1] * xa + bary[q, 2] * xb
                y = bary[q, 0] * y0 + bary[q, 1] * ya + bary[q, 2] * yb
                wq = area * w[q]
                phi = 0.0
                for k in range(means.shape[0]):
                    dx = x - means[k, 0]
                    dy = y - means[k, 1]
                    quad = prec[k, 0] * dx * dx + 2.0 * prec[k, 1] * dx * dy + prec[k, 2] * dy * dy
                    phi += math.exp(-0.5 * quad) * coef[k]
                rx = x - px
                ry = y - py
                r2 = rx * rx + ry * ry
                wphi = wq * phi
                out[i, 0] += wphi
                out[i, 1] += wphi * x
                out[i, 2] += wphi * y
                out[i, 3] += wq * r2
                out[i, 4] += wphi * r2
                out[i, 5] += wq
    return out


# --------------------------------------------------------------------------
# selected backend
# --------------------------------------------------------------------------

if BACKEND == "numba":
    mixture_pdf = mixture_pdf_numba
    clip_halfplane = clip_halfplane_numba
    build_cell = build_cell_numba
    cells_moments = cells_moments_numba
else:
    mixture_pdf = mixture_pdf_numpy
    clip_halfplane = clip_halfplane_numpy
    build_cell = build_cell_numpy
    cells_moments = cells_moments_numpy
