"""Two-dimensional vectors and symmetric 2x2 matrices.

Points are plain ``numpy`` arrays of shape ``(2,)``. Covariances and their
square roots are :class:`SymMat2` values, which store the three free entries
of a symmetric matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, DomainError, InvalidInputError

# Below this eigenvalue (m^2) a covariance is treated as singular.
EIG_FLOOR = 1e-12
# Eigenvalue gap under which eigenvectors fall back to the coordinate axes.
DEGENERATE_GAP = 1e-12


def vec2(x, y=None) -> np.ndarray:
    """Build a finite 2-vector from ``(x, y)`` or a length-2 sequence."""
    v = np.asarray((x, y) if y is not None else x, dtype=float).reshape(2)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"non-finite vector {v}")
    return v


@dataclass(frozen=True)
class SymMat2:
    a11: float
    a12: float
    a22: float

    @classmethod
    def from_array(cls, m) -> SymMat2:
        m = np.asarray(m, dtype=float)
        if m.shape == (3,):
            return cls(float(m[0]), float(m[1]), float(m[2]))
        if m.shape != (2, 2):
            raise InvalidInputError(f"expected a 2x2 matrix, got shape {m.shape}")
        return cls(float(m[0, 0]), 0.5 * float(m[0, 1] + m[1, 0]), float(m[1, 1]))

    @classmethod
    def identity(cls, scale=1.0) -> SymMat2:
        return cls(scale, 0.0, scale)

    def to_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def packed(self) -> np.ndarray:
        return np.array([self.a11, self.a12, self.a22])

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a12

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    def is_finite(self) -> bool:
        return math.isfinite(self.a11) and math.isfinite(self.a12) and math.isfinite(self.a22)

    def is_spd(self) -> bool:
        return self.is_finite() and self.a11 > 0.0 and self.det > 0.0

    def __matmul__(self, other):
        return self.to_array() @ (other.to_array() if isinstance(other, SymMat2) else other)


def eig2(m: SymMat2):
    """Eigen-decomposition of a symmetric 2x2 matrix.

    Returns ``(eigvals, eigvecs)`` with eigenvalues in descending order and
    the matching unit eigenvectors as the *columns* of ``eigvecs``.
    """
    if not m.is_finite():
        raise InvalidInputError(f"non-finite matrix {m}")
    half_diff = 0.5 * (m.a11 - m.a22)
    mean = 0.5 * (m.a11 + m.a22)
    radius = math.hypot(half_diff, m.a12)
    lam1 = mean + radius
    lam2 = mean - radius
    if 2.0 * radius < DEGENERATE_GAP:
        vecs = np.eye(2)
    else:
        theta = 0.5 * math.atan2(m.a12, half_diff)
        c, s = math.cos(theta), math.sin(theta)
        vecs = np.array([[c, -s], [s, c]])
    return np.array([lam1, lam2]), vecs


def _spectral(m: SymMat2, fn) -> SymMat2:
    vals, vecs = eig2(m)
    out = (vecs * fn(vals)) @ vecs.T
    return SymMat2(out[0, 0], 0.5 * (out[0, 1] + out[1, 0]), out[1, 1])


def spd_sqrt(m: SymMat2) -> SymMat2:
    """Principal square root of an SPD matrix."""
    vals, _ = eig2(m)
    if vals[1] <= 0.0:
        raise DomainError(f"matrix is not positive definite: eigenvalues {vals}")
    return _spectral(m, np.sqrt)


def spd_inv_sqrt(m: SymMat2, eig_floor: float = EIG_FLOOR) -> SymMat2:
    """Inverse principal square root; refuses matrices with eigenvalues <= ``eig_floor``."""
    vals, _ = eig2(m)
    if vals[1] <= eig_floor:
        raise ConditioningError("covariance too close to singular for inverse square root", vals[1])
    return _spectral(m, lambda v: 1.0 / np.sqrt(v))


def clamp_eigenvalues(m: SymMat2, floor: float) -> SymMat2:
    """Raise every eigenvalue of ``m`` to at least ``floor``."""
    return _spectral(m, lambda v: np.maximum(v, floor))


def congruence(outer: SymMat2, inner) -> SymMat2:
    """Return ``outer @ inner @ outer`` as a symmetric matrix."""
    o = outer.to_array()
    inner = inner.to_array() if isinstance(inner, SymMat2) else np.asarray(inner)
    return SymMat2.from_array(o @ inner @ o)
