"""Integration over convex polygons and over the domain grid.

Polygons are fan-triangulated from vertex 0 and each triangle gets a fully
symmetric Gauss rule (Dunavant family, coefficients refined to double
precision). Gaussian-mixture densities over cells are by default integrated
component by component with the edge reductions of
:mod:`oavc_coverage.normal_polygon`, which stay accurate when a cell is far
larger than the density's length scale. The domain-wide spatial L2 distance
uses a cell-centred midpoint grid.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .normal_polygon import mixture_rows
from .errors import DegeneratePolygonError, InvalidInputError, UnderflowError
from .geometry import ConvexPolygon, Rect

MASS_UNDERFLOW = 1e-300
MIXTURE_METHODS = ("analytic", "cubature")

# degree -> list of orbits. ("c", w): centroid; ("a", w, a): the 3 points
# (a, b, b) with b = (1 - a) / 2; ("abc", w, a, b): the 6 permutations of
# (a, b, 1 - a - b). Weights sum to one.
_ORBITS = {
    2: [("a", 1.0 / 3.0, 2.0 / 3.0)],
    4: [
        ("a", 0.22338158967801146570, 0.10810301816807022736),
        ("a", 0.10995174365532186764, 0.81684757298045851308),
    ],
    5: [
        ("c", 0.225),
        ("a", 0.13239415278850618074, 0.059715871789769820459),
        ("a", 0.12593918054482715260, 0.79742698535308732240),
    ],
    6: [
        ("a", 0.11678627572637936603, 0.50142650965817915742),
        ("a", 0.050844906370206816921, 0.87382197101699554332),
        ("abc", 0.082851075618373575194, 0.053145049844816947353, 0.31035245103378440542),
    ],
    8: [
        ("c", 0.14431560767778716825),
        ("a", 0.095091634267284624794, 0.081414823414553687942),
        ("a", 0.10321737053471825028, 0.65886138449647958676),
        ("a", 0.032458497623198080311, 0.89890554336593804908),
        ("abc", 0.027230314174434994265, 0.0083947774099576053372, 0.26311282963463811342),
    ],
}
MAX_ORDER = max(_ORBITS)


@functools.lru_cache(maxsize=None)
def triangle_rule(order: int):
    """Barycentric nodes ``(Q, 3)`` and weights ``(Q,)`` exact to degree >= ``order``."""
    if not 1 <= order <= MAX_ORDER:
        raise InvalidInputError(f"no symmetric triangle rule of degree {order} (max {MAX_ORDER})")
    degree = min(d for d in _ORBITS if d >= order)
    bary, weights = [], []
    for orbit in _ORBITS[degree]:
        kind, w = orbit[0], orbit[1]
        if kind == "c":
            pts = [(1 / 3, 1 / 3, 1 / 3)]
        elif kind == "a":
            a = orbit[2]
            b = 0.5 * (1.0 - a)
            pts = [(a, b, b), (b, a, b), (b, b, a)]
        else:
            a, b = orbit[2], orbit[3]
            pts = sorted(set(itertools.permutations((a, b, 1.0 - a - b))))
        bary.extend(pts)
        weights.extend([w] * len(pts))
    bary = np.array(bary)
    weights = np.array(weights)
    bary.setflags(write=False)
    weights.setflags(write=False)
    return bary, weights


@dataclass(frozen=True)
class QuadratureConfig:
    triangle_order: int = 8
    grid_nx: int = 200
    grid_ny: int = 200
    # how Gaussian-mixture densities are integrated over cells
    mixture_method: str = "analytic"

    def __post_init__(self):
        if self.mixture_method not in MIXTURE_METHODS:
            raise InvalidInputError(f"mixture_method must be one of {MIXTURE_METHODS}, got {self.mixture_method!r}")
        if not 2 <= self.triangle_order <= MAX_ORDER:
            raise InvalidInputError(f"triangle_order must be in [2, {MAX_ORDER}], got {self.triangle_order}")
        if self.grid_nx < 16 or self.grid_ny < 16:
            raise InvalidInputError(f"grid must be at least 16x16, got {self.grid_nx}x{self.grid_ny}")


@dataclass(frozen=True)
class CellMoments:
    mass: float
    centroid: np.ndarray
    geometric_second_moment: float
    # integral of |q - p|^2 * density over the cell, i.e. the cell's share of the cost
    weighted_second_moment: float = 0.0
    area: float = 0.0


def polygon_nodes(poly: ConvexPolygon, cfg: QuadratureConfig):
    if poly.is_empty:
        raise DegeneratePolygonError(f"polygon has {len(poly)} vertices")
    bary, w = triangle_rule(cfg.triangle_order)
    return kernels.fan_nodes(poly.vertices, bary, w)


def integrate_polygon(f, poly: ConvexPolygon, cfg: QuadratureConfig = QuadratureConfig()):
    """Integral of the vectorised field ``f`` (``(N, 2) -> (N,)``) over ``poly``."""
    nodes, weights = polygon_nodes(poly, cfg)
    return float(np.dot(weights, f(nodes)))


def _moments_from_row(row, mass_floor=MASS_UNDERFLOW):
    mass, mx, my, geo, cost, area = row
    if not mass >= mass_floor:
        raise UnderflowError(f"density integral over cell is {mass:.3e}")
    return CellMoments(float(mass), np.array([mx / mass, my / mass]), float(geo), float(cost), float(area))


def cell_moments(poly: ConvexPolygon, p_i, density, t, cfg: QuadratureConfig = QuadratureConfig()):
    """Mass, centroid and second moments of ``poly`` under ``density(points, t)``."""
    nodes, weights = polygon_nodes(poly, cfg)
    phi = np.asarray(density(nodes, t), dtype=float)
    rel = nodes - np.asarray(p_i, dtype=float)
    r2 = (rel * rel).sum(axis=1)
    wphi = weights * phi
    row = (
        wphi.sum(),
        np.dot(wphi, nodes[:, 0]),
        np.dot(wphi, nodes[:, 1]),
        np.dot(weights, r2),
        np.dot(wphi, r2),
        weights.sum(),
    )
    return _moments_from_row(row)


def _pack(cells):
    flat = np.ascontiguousarray(np.concatenate([c.vertices for c in cells]))
    offsets = np.zeros(len(cells) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(c) for c in cells])
    return flat, offsets


def mixture_cell_moments(cells, positions, mixture, cfg: QuadratureConfig = QuadratureConfig()):
    """Moments of every cell under a :class:`GaussianMixture`."""
    flat, offsets = _pack(cells)
    positions = np.ascontiguousarray(positions, dtype=float)
    if cfg.mixture_method == "cubature":
        bary, w = triangle_rule(cfg.triangle_order)
        rows = kernels.cells_moments(flat, offsets, positions, bary, w, *mixture.kernel_params())
    else:
        rows = mixture_rows(flat, offsets, positions, mixture.means, mixture.cholesky(), mixture.weights)
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(_moments_from_row(row))
        except UnderflowError as exc:
            raise UnderflowError(f"agent {i}: {exc}") from None
    return out


@functools.lru_cache(maxsize=8)
def grid_points(domain: Rect, nx: int, ny: int):
    """Cell-centred grid nodes ``(nx * ny, 2)`` and the cell area."""
    dx = (domain.xmax - domain.xmin) / nx
    dy = (domain.ymax - domain.ymin) / ny
    xs = domain.xmin + (np.arange(nx) + 0.5) * dx
    ys = domain.ymin + (np.arange(ny) + 0.5) * dy
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    pts = np.ascontiguousarray(np.stack([gx.ravel(), gy.ravel()], axis=1))
    pts.setflags(write=False)
    return pts, dx * dy


def l2_distance(f, g, domain: Rect, cfg: QuadratureConfig = QuadratureConfig()):
    """Spatial L2 distance between two vectorised fields over ``domain``."""
    pts, cell = grid_points(domain, cfg.grid_nx, cfg.grid_ny)
    diff = np.asarray(f(pts), dtype=float) - np.asarray(g(pts), dtype=float)
    return float(np.sqrt(np.dot(diff, diff) * cell))
