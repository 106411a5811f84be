"""Inverse curvature flow of star-shaped graph hypersurfaces in a convex
cone: cap-grid geometry, flow integration, rescaling, and estimate
verification."""

from .grid import (
    AXISYMMETRIC, FULL2D, CapGrid, ScalarField, CovectorField, SymTensorField,
    GridError, GridMismatchError, build_cap_grid, gradient, hessian,
    integrate, cap_area,
)
from .geometry import (
    GraphGeometry, OracleGeometry, GeometryError, NotStarShapedError,
    MeanConvexityError, graph_geometry, graph_area, embedding_oracle,
)
from .verify import (
    CheckResult, EstimateReport, build_report, run_checks, derived_constants,
)
from .flow import (
    FlowParams, FlowState, Trajectory, InitialFamily, FlowError, FlowIncomplete,
    rhs_Q, stable_dt, step, run_flow, make_initial_data, SAMPLE_COLUMNS,
)
from .rescale import (
    RescaleContext, theta, time_map, rescale_trajectory, run_rescaled_flow,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
