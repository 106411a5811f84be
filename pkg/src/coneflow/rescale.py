"""Parabolic rescaling: the model radius, the t <-> s time change, and the
rescaled flow.

The model radius is Theta(t, c) = (alpha t / n + e^(alpha c))^(1/alpha)
(= e^(c + t/n) in the alpha = 0 limit).  Rescaled quantities divide by
Theta; the slow time s satisfies dt/ds = Theta^alpha.  Both rescaling paths
are available: post-hoc rescaling of a recorded physical trajectory, and
direct integration of the rescaled equation

    d u~ / ds = v / (u~^alpha H~) - u~ / n .
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import AXISYMMETRIC, CapGrid, ScalarField, gradient
from .geometry import graph_geometry, graph_area, weighted_speed_integral
from . import flow as flowmod
from .flow import FlowParams, Trajectory, SAMPLE_COLUMNS


@dataclass
class RescaleContext:
    """Reference log-radius c for the model solution; requires
    inf phi_0 <= c <= sup phi_0 for the sandwich estimates to apply."""

    alpha: float
    n_dim: int
    c: float

    @classmethod
    def midpoint(cls, u0_values: np.ndarray, alpha: float, n_dim: int) -> "RescaleContext":
        phi0 = np.log(u0_values)
        return cls(alpha=alpha, n_dim=n_dim,
                   c=0.5 * (float(phi0.min()) + float(phi0.max())))


def theta(t: float, ctx: RescaleContext) -> float:
    """Model radius Theta(t, c)."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if ctx.alpha == 0.0:
        return math.exp(ctx.c + t / ctx.n_dim)
    return (ctx.alpha * t / ctx.n_dim + math.exp(ctx.alpha * ctx.c)) ** (1.0 / ctx.alpha)


def time_map(value: float, ctx: RescaleContext, direction: str) -> float:
    """Map physical time t to slow time s (or back); t(0) = s(0) = 0."""
    if value < 0.0:
        raise ValueError("time must be >= 0")
    if direction not in ("t_to_s", "s_to_t"):
        raise ValueError(f"unknown direction {direction!r}")
    a, n, c = ctx.alpha, ctx.n_dim, ctx.c
    if a == 0.0:
        return value
    if direction == "t_to_s":
        return (n / a) * math.log1p(a * value / (n * math.exp(a * c)))
    return (n / a) * math.exp(a * c) * math.expm1(a * value / n)


def rescale_trajectory(traj: Trajectory, ctx: RescaleContext) -> Trajectory:
    """Re-express a physical trajectory in (s, u~).

    The diagnostic rows already carry both clocks and the rescaled extrema,
    so only the snapshots change representation.
    """
    snaps = [(time_map(t, ctx, "t_to_s"), u / theta(t, ctx))
             for t, u in traj.snapshots]
    return Trajectory(
        params=traj.params, grid_ref=traj.grid_ref, ctx=ctx, kind="rescaled",
        samples=traj.samples.copy(), snapshots=snaps,
        termination=traj.termination,
    )


def _rescaled_row(s: float, utilde: ScalarField, grid: CapGrid,
                  params: FlowParams, ctx: RescaleContext) -> np.ndarray:
    """Physical-schema diagnostic row computed from the rescaled field.

    Uses the exact gauge relations u = u~ Theta, H~ = H(u~), v invariant.
    """
    t = time_map(s, ctx, "s_to_t")
    Th = theta(t, ctx)
    n = grid.n_dim
    geom = graph_geometry(utilde, grid, params.alpha, params.eps_mc)
    phit = ScalarField(grid, np.log(utilde.values), neumann=True)
    q_res = flowmod.rhs_Q(phit, grid, params.alpha, params.eps_mc,
                          rhs_offset=1.0 / n).values
    phidot_theta = q_res + 1.0 / n  # phidot * Theta^alpha
    Ht = geom.mean_curv.values  # = H * Theta
    sup_grad_phi = math.sqrt(float(np.max(gradient(phit, grid).norm2)))
    sup_grad_ut = math.sqrt(float(np.max(gradient(utilde, grid).norm2)))
    return np.array([
        t, s,
        float(utilde.values.min()) * Th, float(utilde.values.max()) * Th,
        float(phidot_theta.min()), float(phidot_theta.max()),
        sup_grad_phi,
        float(Ht.min()), float(Ht.max()),
        graph_area(utilde, grid) * Th ** n,
        weighted_speed_integral(utilde, grid, params.alpha) * Th ** (n - params.alpha),
        float(Ht.min()) / Th, float(geom.support.values.min()) * Th,
        float(utilde.values.min()), float(utilde.values.max()),
        sup_grad_ut,
    ])


def run_rescaled_flow(u0_tilde: ScalarField, grid: CapGrid,
                      params: FlowParams, ctx: RescaleContext) -> Trajectory:
    """Direct slow-time integration of the rescaled equation to params.s_end."""
    grid.check_field(u0_tilde)
    flowmod._validate_initial(u0_tilde, grid, params)
    if params.s_end is None:
        raise ValueError("s_end not set for a rescaled run")
    params = replace(params, t_end=None)

    def row_fn(s, ut):
        return _rescaled_row(s, ut, grid, params, ctx)

    return flowmod._run_loop(
        u0_tilde, grid, params, ctx, params.s_end,
        rhs_offset=1.0 / grid.n_dim, kind="rescaled", row_fn=row_fn)
