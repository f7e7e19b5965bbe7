"""Gaussian mixtures and the time-varying reference density.

The reference density at time ``t >= t0`` is a mixture of ``m0 + m``
Gaussians: the ``m0`` components of an initial mixture, frozen in place with
weights decaying like ``exp(alpha (t - t0))``, and ``m`` moving components
that start on top of a paired initial component and relax toward the
components of a final mixture. Means relax exponentially at rate ``a``;
covariances follow the Bures-Wasserstein geodesic reparametrised by
``exp(b (t - t0))``; the weight released by the frozen part is shared among
the moving components in the final proportions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .errors import DomainError, InfeasibleScenarioError, InvalidInputError
from .geometry import Disk, Rect
from .linalg import SymMat2, congruence, spd_inv_sqrt, spd_sqrt

TWO_PI = 2.0 * math.pi
SIMPLEX_TOL = 1e-9
# Permutation brute force is used up to this many components.
MAX_BRUTE_FORCE_PAIRING = 8
MAX_REJECTION_DRAWS = 10**6


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: SymMat2


def gaussian_pdf(q, g: Gaussian):
    """Density of a bivariate normal at ``q`` (a point or an ``(N, 2)`` array)."""
    if not g.cov.is_spd():
        raise DomainError(f"covariance is not positive definite: {g.cov}")
    det = g.cov.det
    q = np.asarray(q, dtype=float)
    d = q - g.mean
    dx, dy = d[..., 0], d[..., 1]
    quad = (g.cov.a22 * dx * dx - 2.0 * g.cov.a12 * dx * dy + g.cov.a11 * dy * dy) / det
    return np.exp(-0.5 * quad) / (TWO_PI * math.sqrt(det))


class GaussianMixture:
    """Weighted sum of bivariate Gaussians with weights on the simplex.

    Weights within ``SIMPLEX_TOL`` of summing to one are accepted; they are
    renormalised only if the sum is off by more than ``1e-12`` so that
    already-normalised weights are stored bit-for-bit.
    """

    def __init__(self, means, covs, weights):
        means = np.array(means, dtype=float).reshape(-1, 2)
        covs = tuple(c if isinstance(c, SymMat2) else SymMat2.from_array(c) for c in covs)
        weights = np.array(weights, dtype=float).reshape(-1)
        if len(means) == 0:
            raise InvalidInputError("mixture needs at least one component")
        if not (len(means) == len(covs) == len(weights)):
            raise InvalidInputError(
                f"component count mismatch: {len(means)} means, {len(covs)} covs, {len(weights)} weights"
            )
        if not np.all(np.isfinite(means)) or not np.all(np.isfinite(weights)):
            raise InvalidInputError("non-finite mixture parameters")
        if np.any(weights < 0.0):
            raise InvalidInputError(f"negative mixture weight in {weights}")
        total = weights.sum()
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise InvalidInputError(f"weights {weights} sum to {total!r}, not 1")
        for j, c in enumerate(covs):
            if not c.is_spd():
                raise DomainError(f"covariance {j} is not positive definite: {c}")
        self.means = means
        self.covs = covs
        self.weights = weights if abs(total - 1.0) <= 1e-12 else weights / total
        self.means.setflags(write=False)
        self.weights.setflags(write=False)
        self._packed = None
        self._chol = None

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return f"GaussianMixture(m={len(self)}, weights={self.weights.tolist()})"

    def __eq__(self, other):
        if not isinstance(other, GaussianMixture):
            return NotImplemented
        return (
            np.array_equal(self.means, other.means)
            and self.covs == other.covs
            and np.array_equal(self.weights, other.weights)
        )

    @property
    def components(self):
        return [Gaussian(self.means[j], self.covs[j]) for j in range(len(self))]

    @property
    def packed_covs(self):
        return np.array([c.packed() for c in self.covs])

    def kernel_params(self):
        """``(means, prec, coef)`` arrays for :mod:`oavc_coverage.kernels`."""
        if self._packed is None:
            det = np.array([c.det for c in self.covs])
            cov = self.packed_covs
            prec = np.stack([cov[:, 2], -cov[:, 1], cov[:, 0]], axis=1) / det[:, None]
            coef = self.weights / (TWO_PI * np.sqrt(det))
            self._packed = (np.ascontiguousarray(self.means), prec, coef)
        return self._packed

    def cholesky(self):
        """Lower Cholesky factors packed as rows ``(l11, l21, l22)``."""
        if self._chol is None:
            cov = self.packed_covs
            l11 = np.sqrt(cov[:, 0])
            l21 = cov[:, 1] / l11
            l22 = np.sqrt(cov[:, 2] - l21 * l21)
            self._chol = np.ascontiguousarray(np.stack([l11, l21, l22], axis=1))
        return self._chol


def gm_eval(q, mix: GaussianMixture):
    """Mixture density at a point (returns float) or at ``(N, 2)`` points."""
    q = np.asarray(q, dtype=float)
    pts = np.ascontiguousarray(q.reshape(-1, 2))
    vals = kernels.mixture_pdf(pts, *mix.kernel_params())
    return float(vals[0]) if q.ndim == 1 else vals


def pair_components(initial: GaussianMixture, final: GaussianMixture):
    """Index of the initial component each final component starts from.

    Equal counts use the assignment minimising total squared mean distance;
    otherwise final component ``j`` starts from initial component ``j % m0``.
    """
    m0, m = len(initial), len(final)
    if m0 != m:
        return tuple(j % m0 for j in range(m))
    cost = ((final.means[:, None, :] - initial.means[None, :, :]) ** 2).sum(axis=2)
    if m <= MAX_BRUTE_FORCE_PAIRING:
        best = min(
            itertools.permutations(range(m0)),
            key=lambda perm: sum(cost[j, perm[j]] for j in range(m)),
        )
        return tuple(int(v) for v in best)
    rows, cols = linear_sum_assignment(cost)
    return tuple(int(c) for c in cols[np.argsort(rows)])


@dataclass(frozen=True)
class DensityPath:
    t0: float
    initial: GaussianMixture
    final: GaussianMixture
    pairing: tuple
    a: float = -0.5
    b: float = -0.5
    alpha: float = -0.5
    _factors: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("a", "b", "alpha"):
            if not getattr(self, name) < 0.0:
                raise DomainError(f"rate {name} must be negative, got {getattr(self, name)}")
        m0 = len(self.initial)
        if len(self.pairing) != len(self.final):
            raise InvalidInputError("pairing length must equal the final component count")
        if any(not 0 <= j1 < m0 for j1 in self.pairing):
            raise InvalidInputError(f"pairing {self.pairing} has indices outside [0, {m0})")
        factors = []
        for j2, j1 in enumerate(self.pairing):
            s0 = self.initial.covs[j1]
            root = spd_sqrt(s0)
            inv_root = spd_inv_sqrt(s0)
            middle = spd_sqrt(congruence(root, self.final.covs[j2]))
            factors.append((inv_root, middle))
        object.__setattr__(self, "_factors", tuple(factors))

    @classmethod
    def between(cls, initial, final, t0=0.0, a=-0.5, b=-0.5, alpha=-0.5):
        return cls(t0, initial, final, pair_components(initial, final), a, b, alpha)

    def _elapsed(self, t):
        if t < self.t0:
            raise DomainError(f"time {t} precedes path start {self.t0}")
        return t - self.t0

    def mean(self, j2, t):
        s = self._elapsed(t)
        mu0 = self.initial.means[self.pairing[j2]]
        muf = self.final.means[j2]
        return muf + (mu0 - muf) * math.exp(self.a * s)

    def cov(self, j2, t):
        s = self._elapsed(t)
        e = math.exp(self.b * s)
        inv_root, middle = self._factors[j2]
        s0 = self.initial.covs[self.pairing[j2]].to_array()
        bracket = e * s0 + (1.0 - e) * middle.to_array()
        return congruence(inv_root, bracket @ bracket)

    def weights(self, t):
        s = self._elapsed(t)
        frozen = self.initial.weights * math.exp(self.alpha * s)
        moving = self.final.weights * (1.0 - frozen.sum())
        return np.concatenate([frozen, moving])

    def mixture_at(self, t) -> GaussianMixture:
        m = len(self.final)
        means = np.vstack([self.initial.means] + [self.mean(j, t)[None, :] for j in range(m)])
        covs = list(self.initial.covs) + [self.cov(j, t) for j in range(m)]
        return GaussianMixture(means, covs, self.weights(t))

    def evaluate(self, q, t):
        return gm_eval(q, self.mixture_at(t))


def path_mean(path: DensityPath, j2, t):
    return path.mean(j2, t)


def path_cov(path: DensityPath, j2, t):
    return path.cov(j2, t)


def path_weights(path: DensityPath, t):
    return path.weights(t)


def path_eval(path: DensityPath, q, t):
    return path.evaluate(q, t)


def sample_mixture(mix: GaussianMixture, n, domain: Rect, obstacles=(), seed=0):
    """Draw ``n`` points from ``mix`` restricted to the free part of ``domain``.

    Rejection sampling: draws outside the rectangle or inside (or on) an
    obstacle disk are discarded.
    """
    if n == 0:
        return np.empty((0, 2))
    rng = np.random.default_rng(seed)
    chol = np.array([np.linalg.cholesky(c.to_array()) for c in mix.covs])
    centers = np.array([o.center for o in obstacles]).reshape(-1, 2)
    radii = np.array([o.radius for o in obstacles])
    accepted = []
    drawn = 0
    batch = max(64, 4 * n)
    while drawn < MAX_REJECTION_DRAWS:
        size = min(batch, MAX_REJECTION_DRAWS - drawn)
        comp = rng.choice(len(mix), size=size, p=mix.weights)
        z = rng.standard_normal((size, 2))
        pts = mix.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)
        drawn += size
        ok = domain.contains(pts)
        if len(radii):
            dist = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
            ok &= np.all(dist > radii, axis=1)
        accepted.extend(pts[ok])
        if len(accepted) >= n:
            return np.array(accepted[:n])
    raise InfeasibleScenarioError(
        f"only {len(accepted)} of {n} admissible samples after {MAX_REJECTION_DRAWS} draws"
    )
