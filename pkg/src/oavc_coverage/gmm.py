"""Expectation-maximisation fit of a Gaussian mixture to agent positions.

Points are put in lexicographic order before anything else so the result
does not depend on the order agents are listed in. Each restart seeds with
k-means++, runs ten Lloyd iterations, and then iterates EM with a covariance
eigenvalue floor (the floored covariance is the constrained maximiser of the
M-step objective, so the likelihood stays monotone).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .density import GaussianMixture, gm_eval
from .errors import DomainError, InsufficientDataError, InvalidInputError
from .linalg import SymMat2, clamp_eigenvalues

LOG_TWO_PI = math.log(2.0 * math.pi)
KMEANS_ITERS = 10
# A component whose responsibility mass falls below this fraction of n is reseeded.
EMPTY_COMPONENT_FRACTION = 1e-8


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 200
    rel_tol: float = 1e-8
    cov_floor: float = 1e-3
    n_restarts: int = 3

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise InvalidInputError("rel_tol must be positive")
        if not self.cov_floor > 0:
            raise InvalidInputError("cov_floor must be positive")
        if self.n_restarts < 1:
            raise InvalidInputError("n_restarts must be >= 1")


@dataclass(frozen=True)
class FitResult:
    mixture: GaussianMixture
    log_likelihood: float
    iterations: int
    converged: bool
    history: tuple = ()
    # iterations whose M-step reseeded an empty component (monotonicity does not apply there)
    reseeded: tuple = ()
    restart: int = 0


def log_likelihood(mix: GaussianMixture, points) -> float:
    vals = np.atleast_1d(gm_eval(np.asarray(points, dtype=float).reshape(-1, 2), mix))
    if np.any(vals <= 0.0):
        raise DomainError("mixture density is zero at a data point")
    return float(np.log(vals).sum())


def _component_logpdf(points, means, covs):
    out = np.empty((len(points), len(means)))
    for j, (mu, c) in enumerate(zip(means, covs)):
        det = c.det
        d = points - mu
        quad = (c.a22 * d[:, 0] ** 2 - 2.0 * c.a12 * d[:, 0] * d[:, 1] + c.a11 * d[:, 1] ** 2) / det
        out[:, j] = -0.5 * quad - LOG_TWO_PI - 0.5 * math.log(det)
    return out


def _e_step(points, weights, means, covs):
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    joint = _component_logpdf(points, means, covs) + logw
    norm = logsumexp(joint, axis=1)
    return np.exp(joint - norm[:, None]), float(norm.sum()), norm


def responsibilities(mix: GaussianMixture, points):
    """Posterior component probabilities, one row per point."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    return _e_step(points, mix.weights, mix.means, mix.covs)[0]


def _m_step(points, resp, cfg, badness):
    n, m = resp.shape
    mass = resp.sum(axis=0)
    reseeded = False
    order = np.argsort(badness, kind="stable")[::-1]
    used = 0
    weights = np.empty(m)
    means = np.empty((m, 2))
    covs = []
    for j in range(m):
        if mass[j] < EMPTY_COMPONENT_FRACTION * n:
            reseeded = True
            means[j] = points[order[used % n]]
            used += 1
            weights[j] = 1.0 / n
            covs.append(SymMat2.identity(cfg.cov_floor))
            continue
        weights[j] = mass[j] / n
        means[j] = resp[:, j] @ points / mass[j]
        d = points - means[j]
        s = (resp[:, j, None] * d).T @ d / mass[j]
        covs.append(clamp_eigenvalues(SymMat2.from_array(s), cfg.cov_floor))
    return weights / weights.sum(), means, covs, reseeded


def _kmeans_pp(points, m, rng):
    n = len(points)
    centers = [points[rng.integers(n)]]
    for _ in range(1, m):
        d2 = ((points[:, None, :] - np.array(centers)[None, :, :]) ** 2).sum(axis=2).min(axis=1)
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers.append(points[idx])
    centers = np.array(centers)
    for _ in range(KMEANS_ITERS):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        label = np.argmin(d2, axis=1)
        for j in range(m):
            members = points[label == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1), d2.min(axis=1)


def _run(points, m, cfg, rng, restart):
    n = len(points)
    label, dist2 = _kmeans_pp(points, m, rng)
    resp = np.zeros((n, m))
    resp[np.arange(n), label] = 1.0
    weights, means, covs, _ = _m_step(points, resp, cfg, dist2)
    history, reseeded = [], []
    converged = False
    iterations = 0
    while True:
        resp, ll, point_ll = _e_step(points, weights, means, covs)
        history.append(ll)
        if len(history) > 1 and abs(ll - history[-2]) <= cfg.rel_tol * abs(history[-2]):
            converged = True
            break
        if iterations == cfg.max_iters:
            break
        weights, means, covs, was_reseeded = _m_step(points, resp, cfg, -point_ll)
        iterations += 1
        if was_reseeded:
            reseeded.append(iterations)
    mix = GaussianMixture(means, covs, weights)
    return FitResult(mix, history[-1], iterations, converged, tuple(history), tuple(reseeded), restart)


def fit(points, m, cfg: EmConfig = EmConfig(), seed=0) -> FitResult:
    """Best-of-``n_restarts`` EM fit of an ``m``-component mixture to ``points``."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if m < 1:
        raise InvalidInputError(f"component count must be >= 1, got {m}")
    if len(points) < m:
        raise InsufficientDataError(f"{len(points)} points cannot support {m} components")
    if not np.all(np.isfinite(points)):
        raise InvalidInputError("non-finite data point")
    points = points[np.lexsort((points[:, 1], points[:, 0]))]
    seeds = np.random.SeedSequence(seed).spawn(cfg.n_restarts)
    best = None
    for r, ss in enumerate(seeds):
        result = _run(points, m, cfg, np.random.default_rng(ss), r)
        if best is None or result.log_likelihood > best.log_likelihood:
            best = result
    return best
