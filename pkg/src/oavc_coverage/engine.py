"""The combined coverage loop.

Time is split into update windows of length ``delta_tau``. At the start of
window ``k`` the agents' positions are fitted with an ``m``-component mixture
and, while ``k <= K``, a fresh reference path is started from that fit toward
the final mixture; afterwards the last path is kept. Inside a window, every
``c * dt`` seconds each agent rebuilds its obstacle-aware cell, integrates the
current reference over it, and then takes ``c`` explicit Euler substeps of
length ``dt`` toward the (held) centroid.

Each Euler substep is limited so that the agent never passes its centroid.
Since both the agent and the centroid lie in the convex cell, every recorded
position then stays inside the cell, which is what keeps agents off the
obstacles and apart from each other.

The run stops when ``e_max < epsilon``. Like the outer loop it belongs to,
this test is made once per window, at the window's end and against the
reference that drove it, and only once the last reference has been built
(``k >= K``). Right after a refit the agents sit close to the centroids of a
density made from their own positions, so an earlier test would stop the run
before the reference has had any chance to move them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .control import Gains, control_gain
from .density import DensityPath, GaussianMixture, gm_eval, sample_mixture
from .errors import CoverageError, InvalidInputError, InvariantViolation, ScenarioError
from .geometry import COINCIDENT_TOL, Rect, build_all_cells, check_generators
from .gmm import EmConfig, FitResult, fit
from .quadrature import QuadratureConfig, l2_distance, mixture_cell_moments

# Positions are kept at least this far (m) inside the domain boundary.
BOUNDARY_MARGIN = 1e-6
# Tolerance (m) for the agent-in-own-cell check.
CELL_TOL = 1e-9
MULTIPLE_TOL = 1e-12


@dataclass(frozen=True)
class Scenario:
    domain: Rect
    n: int
    final_mixture: GaussianMixture
    obstacles: tuple = ()
    initial_positions: Optional[tuple] = None
    initial_mixture: Optional[GaussianMixture] = None
    a: float = -0.5
    b: float = -0.5
    alpha: float = -0.5
    gains: Gains = Gains()
    dt: float = 0.01
    c: int = 5
    delta_tau: float = 0.5
    K: int = 100
    epsilon: float = 0.05
    max_wall_steps: int = 20000
    quadrature: QuadratureConfig = QuadratureConfig()
    em: EmConfig = EmConfig()
    seed: int = 0
    t0: float = 0.0
    limit_step: bool = True
    snapshot_every: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ScenarioError("n", f"need at least one agent, got {self.n}")
        if self.n < len(self.final_mixture):
            raise ScenarioError(
                "n", f"{self.n} agents cannot be fitted with {len(self.final_mixture)} components"
            )
        if (self.initial_positions is None) == (self.initial_mixture is None):
            raise ScenarioError("initial", "give exactly one of explicit positions or a sampling mixture")
        if self.initial_positions is not None:
            pos = tuple(tuple(float(v) for v in p) for p in self.initial_positions)
            if len(pos) != self.n or any(len(p) != 2 for p in pos):
                raise ScenarioError("initial.position", f"expected {self.n} (x, y) positions")
            object.__setattr__(self, "initial_positions", pos)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for name in ("a", "b", "alpha"):
            if not getattr(self, name) < 0:
                raise ScenarioError(name, f"rate must be negative, got {getattr(self, name)}")
        if not self.dt > 0:
            raise ScenarioError("dt", f"must be positive, got {self.dt}")
        if self.c < 1:
            raise ScenarioError("c", f"substep count must be >= 1, got {self.c}")
        if not self.delta_tau > 0:
            raise ScenarioError("delta_tau", f"must be positive, got {self.delta_tau}")
        block = self.c * self.dt
        blocks = round(self.delta_tau / block)
        if blocks < 1 or abs(self.delta_tau - blocks * block) > MULTIPLE_TOL * max(1.0, self.delta_tau):
            raise ScenarioError("delta_tau", f"{self.delta_tau} is not a multiple of c*dt = {block}")
        if self.K < 0:
            raise ScenarioError("K", f"must be >= 0, got {self.K}")
        if not self.epsilon > 0:
            raise ScenarioError("epsilon", f"must be positive, got {self.epsilon}")
        if self.max_wall_steps < 0:
            raise ScenarioError("max_wall_steps", f"must be >= 0, got {self.max_wall_steps}")
        if self.seed < 0:
            raise ScenarioError("seed", f"must be >= 0, got {self.seed}")
        if self.snapshot_every < 1:
            raise ScenarioError("snapshot_every", f"must be >= 1, got {self.snapshot_every}")

    @property
    def m(self):
        return len(self.final_mixture)

    @property
    def blocks_per_window(self):
        return round(self.delta_tau / (self.c * self.dt))

    def derived_seed(self, *key):
        return int(np.random.SeedSequence([self.seed, *key]).generate_state(1, dtype=np.uint64)[0])


@dataclass
class SimState:
    t: float
    step: int
    block: int
    positions: np.ndarray
    path: DensityPath
    k: int
    fit: FitResult
    cells: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    H: float = math.nan
    e_max: float = math.inf


@dataclass
class SimOutput:
    status: str = "running"
    traj_t: list = field(default_factory=list)
    traj_pos: list = field(default_factory=list)
    traj_u: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    cells: list = field(default_factory=list)
    team_fits: list = field(default_factory=list)
    blocks: int = 0
    windows: int = 0
    final_state: Optional[SimState] = None

    def trajectory_rows(self):
        for t, pos, u in zip(self.traj_t, self.traj_pos, self.traj_u):
            for i in range(len(pos)):
                yield t, i, pos[i, 0], pos[i, 1], u[i, 0], u[i, 1]

    def metrics_array(self):
        return np.array(self.metrics, dtype=float).reshape(-1, 6)

    @property
    def converged(self):
        return self.status == "converged"


def _evaluate(state: SimState, scenario: Scenario) -> SimState:
    mixture = state.path.mixture_at(state.t)
    cells = build_all_cells(state.positions, scenario.obstacles, scenario.domain, validate=True)
    moments = mixture_cell_moments(cells, state.positions, mixture, scenario.quadrature)
    H = math.fsum(mo.weighted_second_moment for mo in moments)
    centroids = np.array([mo.centroid for mo in moments])
    e = np.hypot(*(state.positions - centroids).T)
    return replace(state, cells=cells, moments=moments, H=H, e_max=float(e.max()))


def _fit_team(positions, scenario: Scenario, k):
    return fit(positions, scenario.m, scenario.em, seed=scenario.derived_seed(1, k))


def initial_positions(scenario: Scenario):
    if scenario.initial_positions is not None:
        pos = np.array(scenario.initial_positions, dtype=float)
        if not np.all(scenario.domain.contains(pos)):
            raise InvalidInputError("explicit initial position outside the domain")
        check_generators(pos, scenario.obstacles)
        return pos
    return sample_mixture(
        scenario.initial_mixture,
        scenario.n,
        scenario.domain,
        scenario.obstacles,
        seed=scenario.derived_seed(0),
    )


def init(scenario: Scenario) -> SimState:
    """State at ``t0`` with the first team fit and the first reference path."""
    positions = initial_positions(scenario)
    team = _fit_team(positions, scenario, 0)
    path = DensityPath.between(
        team.mixture, scenario.final_mixture, scenario.t0, scenario.a, scenario.b, scenario.alpha
    )
    state = SimState(scenario.t0, 0, 0, positions, path, 0, team)
    return _evaluate(state, scenario)


def update_reference(state: SimState, scenario: Scenario) -> SimState:
    """Refit the team mixture at a window boundary and restart the path while ``k <= K``."""
    k = state.k + 1
    team = _fit_team(state.positions, scenario, k)
    if k > scenario.K:
        return replace(state, k=k, fit=team)
    path = DensityPath.between(
        team.mixture, scenario.final_mixture, state.t, scenario.a, scenario.b, scenario.alpha
    )
    return _evaluate(replace(state, k=k, fit=team, path=path), scenario)


def _velocities(positions, centroids, gain, u_max):
    u = -gain[:, None] * (positions - centroids)
    if u_max is not None:
        speed = np.hypot(u[:, 0], u[:, 1])
        scale = np.where(speed > u_max, u_max / np.where(speed > 0, speed, 1.0), 1.0)
        u = u * scale[:, None]
    return u


def _check_safety(positions, cells, scenario: Scenario, t):
    for j, obs in enumerate(scenario.obstacles):
        d = np.hypot(*(positions - obs.center).T)
        bad = np.flatnonzero(d <= obs.radius)
        if len(bad):
            raise InvariantViolation(
                f"t={t:.6f}: agent {bad[0]} entered obstacle {j}",
                {"t": t, "agent": int(bad[0]), "obstacle": j, "distance": float(d[bad[0]])},
            )
    n = len(positions)
    if n > 1:
        diff = positions[:, None, :] - positions[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        dist[np.diag_indices(n)] = np.inf
        if dist.min() <= COINCIDENT_TOL:
            i, k = np.unravel_index(np.argmin(dist), dist.shape)
            raise InvariantViolation(
                f"t={t:.6f}: agents {i} and {k} collided",
                {"t": t, "agents": (int(i), int(k)), "distance": float(dist[i, k])},
            )
    for i, cell in enumerate(cells):
        if not cell.contains(positions[i], CELL_TOL):
            raise InvariantViolation(
                f"t={t:.6f}: agent {i} left its cell",
                {"t": t, "agent": i, "position": positions[i].tolist()},
            )


def block_controls(state: SimState, scenario: Scenario):
    """Centroids and per-agent gains held over the next ``c`` substeps."""
    centroids = np.array([mo.centroid for mo in state.moments])
    gain = np.array([control_gain(mo, scenario.gains) for mo in state.moments])
    if scenario.limit_step:
        gain = np.minimum(gain, 1.0 / scenario.dt)
    return centroids, gain


def inner_step(state: SimState, scenario: Scenario, out: Optional[SimOutput] = None) -> SimState:
    """Advance ``c`` Euler substeps with cells and moments held, then re-evaluate."""
    centroids, gain = block_controls(state, scenario)
    d = scenario.domain
    lo = np.array([d.xmin + BOUNDARY_MARGIN, d.ymin + BOUNDARY_MARGIN])
    hi = np.array([d.xmax - BOUNDARY_MARGIN, d.ymax - BOUNDARY_MARGIN])
    p = state.positions.copy()
    step = state.step
    for _ in range(scenario.c):
        t = scenario.t0 + step * scenario.dt
        u = _velocities(p, centroids, gain, scenario.gains.u_max)
        if out is not None:
            out.traj_t.append(t)
            out.traj_pos.append(p.copy())
            out.traj_u.append(u)
        p = np.clip(p + u * scenario.dt, lo, hi)
        step += 1
        _check_safety(p, state.cells, scenario, scenario.t0 + step * scenario.dt)
    new = replace(state, t=scenario.t0 + step * scenario.dt, step=step, block=state.block + 1, positions=p)
    return _evaluate(new, scenario)


def _record_window(out: SimOutput, state: SimState, scenario: Scenario, reference: GaussianMixture):
    """Team fit, cell snapshot and both L2 distances at a window boundary."""
    team = state.fit.mixture
    for j in range(len(team)):
        c = team.covs[j]
        out.team_fits.append(
            (state.t, j, team.weights[j], team.means[j, 0], team.means[j, 1], c.a11, c.a12, c.a22)
        )
    if state.k % scenario.snapshot_every == 0:
        _snapshot(out, state)
    out.windows += 1
    return _l2_pair(team, reference, scenario)


def _l2_pair(team, reference, scenario):
    def field_of(mix):
        return lambda q: gm_eval(q, mix)

    dom, cfg = scenario.domain, scenario.quadrature
    l2_ref = l2_distance(field_of(team), field_of(reference), dom, cfg)
    l2_fin = l2_distance(field_of(team), field_of(scenario.final_mixture), dom, cfg)
    return l2_ref, l2_fin


def _snapshot(out: SimOutput, state: SimState):
    for i, cell in enumerate(state.cells):
        out.cells.append((state.t, i, cell.vertices.copy()))


def _converged(state: SimState, scenario: Scenario):
    """Centroid error below ``epsilon`` once the reference in force is the last one built."""
    return state.k >= scenario.K and state.e_max < scenario.epsilon


def run(scenario: Scenario, max_steps: Optional[int] = None, snapshot_every: Optional[int] = None) -> SimOutput:
    """Simulate until ``e_max < epsilon`` or the block budget is spent.

    ``max_steps`` counts cell/centroid updates (blocks of ``c`` substeps).
    On an invariant violation or numerical error the exception propagates
    with the partial output attached as ``exc.partial_output``.
    """
    if max_steps is not None:
        scenario = replace(scenario, max_wall_steps=max_steps)
    if snapshot_every is not None:
        scenario = replace(scenario, snapshot_every=snapshot_every)
    out = SimOutput()
    try:
        state = init(scenario)
        pending = _record_window(out, state, scenario, state.path.mixture_at(state.t))
        in_window = 0
        while True:
            l2_ref, l2_fin = pending if pending is not None else (math.nan, math.nan)
            pending = None
            out.metrics.append((state.t, state.H, l2_ref, l2_fin, state.e_max, state.k))
            if state.block == 0 and _converged(state, scenario):
                out.status = "converged"
                break
            if state.block >= scenario.max_wall_steps:
                out.status = "step-limit"
                break
            state = inner_step(state, scenario, out)
            in_window += 1
            if in_window < scenario.blocks_per_window:
                continue
            # window end: convergence is judged against the reference that drove this window
            in_window = 0
            if _converged(state, scenario):
                out.metrics.append((state.t, state.H, math.nan, math.nan, state.e_max, state.k))
                out.status = "converged"
                break
            reference = state.path.mixture_at(state.t)
            state = update_reference(state, scenario)
            pending = _record_window(out, state, scenario, reference)
        _finish(out, state, scenario)
    except CoverageError as exc:
        out.status = "error"
        exc.partial_output = out
        raise
    return out


def _finish(out: SimOutput, state: SimState, scenario: Scenario):
    centroids, gain = block_controls(state, scenario)
    out.traj_t.append(state.t)
    out.traj_pos.append(state.positions.copy())
    out.traj_u.append(_velocities(state.positions, centroids, gain, scenario.gains.u_max))
    last = out.metrics[-1]
    if math.isnan(last[2]):
        team = fit(state.positions, scenario.m, scenario.em, seed=scenario.derived_seed(2, state.block))
        l2_ref, l2_fin = _l2_pair(team.mixture, state.path.mixture_at(state.t), scenario)
        out.metrics[-1] = (last[0], last[1], l2_ref, l2_fin, last[4], last[5])
    if not out.cells or out.cells[-1][0] != state.t:
        _snapshot(out, state)
    out.blocks = state.block
    out.final_state = state

