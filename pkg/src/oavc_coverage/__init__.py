"""Obstacle-aware Voronoi coverage control toward a Gaussian-mixture density."""

from ._backend import BACKEND
from .control import Gains, control_input, cost_gradient, locational_cost
from .density import (
    DensityPath,
    Gaussian,
    GaussianMixture,
    gaussian_pdf,
    gm_eval,
    path_cov,
    path_eval,
    path_mean,
    path_weights,
    sample_mixture,
)
from .engine import Scenario, SimOutput, SimState, init, inner_step, run, update_reference
from .geometry import (
    ConvexPolygon,
    Disk,
    HalfPlane,
    Rect,
    build_oavc,
    clip,
    obstacle_halfplane,
    polygon_area_centroid,
    voronoi_halfplane,
)
from .gmm import EmConfig, FitResult, fit, log_likelihood
from .linalg import SymMat2, eig2, spd_inv_sqrt, spd_sqrt, vec2
from .quadrature import CellMoments, QuadratureConfig, cell_moments, integrate_polygon, l2_distance

__version__ = "0.1.0"
