"""Obstacle-aware Voronoi cells as convex polygons.

A cell is the domain rectangle clipped by one half-plane per other agent
(the perpendicular bisector) and one per obstacle disk (a line tangent to the
disk on the side facing the agent). Every constraint is linear, so the cell is
convex and successive half-plane clipping builds it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    AgentInObstacleError,
    DegenerateGeneratorsError,
    DegeneratePolygonError,
    InvalidInputError,
)
from .linalg import vec2

# Minimum separation (m) between two generators.
COINCIDENT_TOL = 1e-9


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise InvalidInputError(f"empty rectangle {self}")

    @property
    def area(self):
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def as_array(self):
        return np.array([self.xmin, self.xmax, self.ymin, self.ymax], dtype=float)

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)

    def polygon(self) -> ConvexPolygon:
        return ConvexPolygon(kernels.rect_polygon(self.as_array()))


@dataclass(frozen=True)
class Disk:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", vec2(self.center))
        if not self.radius > 0.0:
            raise InvalidInputError(f"disk radius must be positive, got {self.radius}")

    def __eq__(self, other):
        return (
            isinstance(other, Disk)
            and np.array_equal(self.center, other.center)
            and self.radius == other.radius
        )

    def __hash__(self):
        return hash((tuple(self.center), self.radius))


@dataclass(frozen=True)
class HalfPlane:
    """The closed set ``{q : normal . q <= offset}``."""

    normal: np.ndarray
    offset: float

    def signed_distance(self, q):
        return np.asarray(q, dtype=float) @ self.normal - self.offset

    def contains(self, q, tol=0.0):
        return self.signed_distance(q) <= tol


class ConvexPolygon:
    """Counter-clockwise vertex list; zero vertices means the empty set."""

    def __init__(self, vertices):
        self.vertices = np.ascontiguousarray(np.asarray(vertices, dtype=float).reshape(-1, 2))

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"ConvexPolygon({self.vertices.tolist()})"

    @property
    def is_empty(self):
        return len(self.vertices) < 3

    def area(self):
        if self.is_empty:
            return 0.0
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def contains(self, q, tol=1e-9):
        """True when ``q`` is inside or within ``tol`` of the polygon."""
        if self.is_empty:
            return False
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(e[:, 0], e[:, 1])
        rel = np.asarray(q, dtype=float) - v
        cross = (e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]) / lengths
        return bool(np.all(cross >= -tol))

    def is_convex(self, tol=1e-9):
        if self.is_empty:
            return True
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        f = np.roll(e, -1, axis=0)
        return bool(np.all(e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0] >= -tol))


def voronoi_halfplane(p_i, p_k) -> HalfPlane:
    """Points at least as close to ``p_i`` as to ``p_k``."""
    p_i, p_k = vec2(p_i), vec2(p_k)
    if math.hypot(*(p_k - p_i)) <= COINCIDENT_TOL:
        raise DegenerateGeneratorsError(f"generators {p_i} and {p_k} coincide")
    nx, ny, c = kernels.bisector_plane(p_i[0], p_i[1], p_k[0], p_k[1])
    return HalfPlane(np.array([nx, ny]), c)


def obstacle_weight(p_i, obs: Disk):
    """Dynamic weight that makes the agent/obstacle boundary tangent to the disk."""
    d = float(np.linalg.norm(vec2(p_i) - obs.center))
    return 2.0 * obs.radius * d - d * d


def obstacle_halfplane(p_i, obs: Disk) -> HalfPlane:
    p_i = vec2(p_i)
    if np.linalg.norm(p_i - obs.center) <= obs.radius:
        raise AgentInObstacleError(f"agent {p_i} is inside obstacle {obs}")
    nx, ny, c = kernels.tangent_plane(p_i[0], p_i[1], obs.center[0], obs.center[1], obs.radius)
    return HalfPlane(np.array([nx, ny]), c)


def clip(poly: ConvexPolygon, hp: HalfPlane) -> ConvexPolygon:
    out = kernels.clip_halfplane(poly.vertices, hp.normal[0], hp.normal[1], hp.offset)
    return ConvexPolygon(out)


def _obstacle_arrays(obstacles):
    centers = np.array([o.center for o in obstacles], dtype=float).reshape(-1, 2)
    radii = np.array([o.radius for o in obstacles], dtype=float)
    return centers, radii


def check_generators(positions, obstacles=()):
    """Raise if two generators coincide or one lies in or on an obstacle disk."""
    positions = np.asarray(positions, dtype=float)
    if not np.all(np.isfinite(positions)):
        raise InvalidInputError("non-finite agent position")
    n = len(positions)
    if n > 1:
        diff = positions[:, None, :] - positions[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        dist[np.diag_indices(n)] = np.inf
        i, k = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, k] <= COINCIDENT_TOL:
            raise DegenerateGeneratorsError(
                f"agents {i} and {k} coincide at {positions[i]} (separation {dist[i, k]:.3e})"
            )
    for j, obs in enumerate(obstacles):
        d = np.linalg.norm(positions - obs.center, axis=1)
        bad = np.flatnonzero(d <= obs.radius)
        if len(bad):
            raise AgentInObstacleError(
                f"agent {bad[0]} at {positions[bad[0]]} is inside obstacle {j} "
                f"(distance {d[bad[0]]:.6g} <= radius {obs.radius})"
            )


def build_oavc(i, positions, obstacles, domain: Rect, validate=True) -> ConvexPolygon:
    """Obstacle-aware Voronoi cell of agent ``i``."""
    positions = np.ascontiguousarray(np.asarray(positions, dtype=float).reshape(-1, 2))
    if validate:
        check_generators(positions, obstacles)
    centers, radii = _obstacle_arrays(obstacles)
    verts = kernels.build_cell(i, positions, centers, radii, domain.as_array())
    if len(verts) < 3:
        raise DegeneratePolygonError(f"cell of agent {i} at {positions[i]} is empty")
    return ConvexPolygon(verts)


def build_all_cells(positions, obstacles, domain: Rect, validate=True):
    """Cells for every agent, in agent order."""
    positions = np.ascontiguousarray(np.asarray(positions, dtype=float).reshape(-1, 2))
    if validate:
        check_generators(positions, obstacles)
    centers, radii = _obstacle_arrays(obstacles)
    rect = domain.as_array()
    cells = []
    for i in range(len(positions)):
        verts = kernels.build_cell(i, positions, centers, radii, rect)
        if len(verts) < 3:
            raise DegeneratePolygonError(f"cell of agent {i} at {positions[i]} is empty")
        cells.append(ConvexPolygon(verts))
    return cells


def polygon_area_centroid(poly: ConvexPolygon):
    """Shoelace area and area centroid."""
    if poly.is_empty:
        raise DegeneratePolygonError(f"polygon has {len(poly)} vertices")
    v = poly.vertices
    nxt = np.roll(v, -1, axis=0)
    cross = v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]
    area = 0.5 * cross.sum()
    if not area > 0.0:
        raise DegeneratePolygonError(f"polygon has non-positive area {area}")
    cx = ((v[:, 0] + nxt[:, 0]) * cross).sum() / (6.0 * area)
    cy = ((v[:, 1] + nxt[:, 1]) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])
