"""Explicit time integration of the scalar Neumann flow.

The evolved unknown is phi = log u, satisfying

    d phi / dt = Q(phi, D phi, D^2 phi)
               = e^(-alpha phi) v^2 / [n - (sigma^ij - phi^i phi^j / v^2) phi_ij]

with the ghost-reflection Neumann condition at theta_max.  ``run_flow``
integrates adaptively (classical RK4 by default) and records the diagnostic
time series consumed by the verifier.  The axisymmetric inner loop is a
numba kernel; :func:`rhs_Q` is the plain numpy reference used by ``step``
and by the tests that cross-check the kernel.

The same machinery drives the rescaled equation (``rhs_offset = 1/n``),
which differs from Q only by the constant drift term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .grid import (
    AXISYMMETRIC, FULL2D, CapGrid, ScalarField,
    d_theta, d2_theta, trace_hessian, grad_grad_hessian, gradient,
    neumann_residual,
)
from .geometry import (
    MeanConvexityError, NotStarShapedError, graph_geometry, graph_area,
    weighted_speed_integral, DEFAULT_EPS_MC,
)

DT_UNDERFLOW = 1e-14

TERM_REACHED = "reached_t_end"
TERM_MC_LOST = "mean_convexity_lost"
TERM_BLOWUP = "blowup_detected"

SAMPLE_COLUMNS = (
    "t", "s", "u_min", "u_max",
    "phidot_theta_min", "phidot_theta_max", "sup_grad_phi",
    "H_theta_min", "H_theta_max", "area", "integral_u_minus_alpha",
    "H_min", "w_min", "utilde_min", "utilde_max", "sup_grad_utilde",
)


class FlowError(RuntimeError):
    """Flow run aborted (mean convexity lost, blow-up, bad initial data)."""


@dataclass
class FlowParams:
    alpha: float = 1.0
    cfl_safety: float = 0.4
    t_end: float | None = None
    s_end: float | None = None
    stepper: str = "rk4"
    eps_mc: float = DEFAULT_EPS_MC
    snapshot_times: tuple = ()
    record_every: int = 50

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must be in (0, 1]")
        if self.stepper not in ("euler", "rk4"):
            raise ValueError(f"unknown stepper {self.stepper!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(eq=False)
class FlowState:
    t: float
    u: ScalarField
    _geom_cache: dict = field(default_factory=dict, repr=False)

    def geometry(self, grid: CapGrid, alpha: float, eps_mc: float = DEFAULT_EPS_MC):
        key = (alpha, eps_mc)
        if key not in self._geom_cache:
            self._geom_cache[key] = graph_geometry(self.u, grid, alpha, eps_mc)
        return self._geom_cache[key]


@dataclass(eq=False)
class Trajectory:
    """Recorded run: diagnostic series rows (SAMPLE_COLUMNS) plus snapshots.

    ``kind`` is "physical" (rows indexed by t, snapshots are (t, u)) or
    "rescaled" (same row schema, snapshots are (s, u_tilde)).
    """

    params: FlowParams
    grid_ref: CapGrid
    ctx: "object"  # RescaleContext
    kind: str
    samples: np.ndarray  # (n_samples, len(SAMPLE_COLUMNS))
    snapshots: list  # [(time, values array)]
    termination: str

    def col(self, name: str) -> np.ndarray:
        return self.samples[:, SAMPLE_COLUMNS.index(name)]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


# ---------------------------------------------------------------------------
# spatial operator


def rhs_Q(phi: ScalarField, grid: CapGrid, alpha: float,
          eps_mc: float = DEFAULT_EPS_MC, rhs_offset: float = 0.0) -> ScalarField:
    """The parabolic operator Q (numpy reference path).

    ``rhs_offset`` is subtracted from Q; the rescaled equation uses 1/n.
    Raises MeanConvexityError when the denominator n - sigma~^ij phi_ij
    loses positivity.
    """
    grid.check_field(phi)
    if not np.all(np.isfinite(phi.values)):
        raise FlowError("non-finite phi")
    n = grid.n_dim
    norm2 = gradient(phi, grid).norm2
    v2 = 1.0 + norm2
    denom = n - (trace_hessian(phi, grid) - grad_grad_hessian(phi, grid) / v2)
    floor = eps_mc * np.exp(phi.values) * np.sqrt(v2)  # H > eps_mc in (Evo-1) units
    if np.any(denom <= floor):
        idx = int(np.argmin(denom - floor))
        raise MeanConvexityError(
            f"mean convexity lost: denominator {denom.flat[idx]:.3e} at node {idx}",
            node=idx, value=float(denom.flat[idx]),
        )
    q = np.exp(-alpha * phi.values) * v2 / denom - rhs_offset
    return ScalarField(grid, q, neumann=True)


def _lambda_max(phi: ScalarField, grid: CapGrid, alpha: float) -> np.ndarray:
    """Upper bound e^(-alpha phi) v^2 / denom^2 on the top eigenvalue of dQ/dphi_ij."""
    n = grid.n_dim
    v2 = 1.0 + gradient(phi, grid).norm2
    denom = n - (trace_hessian(phi, grid) - grad_grad_hessian(phi, grid) / v2)
    return np.exp(-alpha * phi.values) * v2 / denom ** 2


def stable_dt(state: FlowState, grid: CapGrid, params: FlowParams) -> float:
    """Explicit-scheme step bound cfl * min h_loc^2 / (2 n lambda_max)."""
    phi = ScalarField(grid, np.log(state.u.values), neumann=state.u.neumann)
    lam = _lambda_max(phi, grid, params.alpha)
    n = grid.n_dim
    if grid.mode == AXISYMMETRIC:
        h2 = grid.h_theta ** 2
        dt = params.cfl_safety * h2 / (2.0 * n * float(np.max(lam)))
    else:
        sin_eff = np.maximum(grid.sin_theta, math.sin(grid.h_theta))
        h_loc = np.minimum(grid.h_theta, sin_eff * grid.h_psi)[:, None]
        dt = params.cfl_safety * float(np.min(h_loc ** 2 / (2.0 * n * lam)))
    if dt < DT_UNDERFLOW * max(1.0, state.t):
        raise FlowError(TERM_BLOWUP + ": dt underflow")
    return dt


def step(state: FlowState, grid: CapGrid, params: FlowParams,
         dt: float | None = None, rhs_offset: float = 0.0) -> FlowState:
    """One explicit step of phi = log u; Neumann reflection at every stage."""
    if dt is None:
        dt = stable_dt(state, grid, params)
    phi0 = np.log(state.u.values)

    def f(p):
        return rhs_Q(ScalarField(grid, p, neumann=True), grid, params.alpha,
                     params.eps_mc, rhs_offset).values

    if params.stepper == "euler":
        phi1 = phi0 + dt * f(phi0)
    else:
        k1 = f(phi0)
        k2 = f(phi0 + 0.5 * dt * k1)
        k3 = f(phi0 + 0.5 * dt * k2)
        k4 = f(phi0 + dt * k3)
        phi1 = phi0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if grid.mode == FULL2D:
        phi1[0] = phi1[0].mean()
    if not np.all(np.isfinite(phi1)):
        raise FlowError(TERM_BLOWUP + ": non-finite state after step")
    return FlowState(t=state.t + dt, u=ScalarField(grid, np.exp(phi1), neumann=True))


# ---------------------------------------------------------------------------
# numba kernel, axisymmetric fast path

STATUS_OK = 0
STATUS_MC_LOST = 1
STATUS_DT_UNDERFLOW = 2


@njit(cache=True)
def _rhs_axisym(p, out, h, cot, n, alpha, offset, eps_mc):
    """Fills out with Q(p); returns (lambda_max, worst_node, ok)."""
    m = p.shape[0]
    lam_max = 0.0
    for i in range(m):
        if i == 0:
            d1 = 0.0
            d2 = 2.0 * (p[1] - p[0]) / (h * h)
            lap = n * d2
        elif i == m - 1:
            d1 = 0.0
            d2 = 2.0 * (p[m - 2] - p[m - 1]) / (h * h)
            lap = d2
        else:
            d1 = (p[i + 1] - p[i - 1]) / (2.0 * h)
            d2 = (p[i + 1] - 2.0 * p[i] + p[i - 1]) / (h * h)
            lap = d2 + (n - 1) * cot[i] * d1
        v2 = 1.0 + d1 * d1
        denom = n - lap + d1 * d1 * d2 / v2
        ea = math.exp(-alpha * p[i])
        floor = eps_mc * math.exp(p[i]) * math.sqrt(v2)
        if denom <= floor:
            return denom, i, False
        out[i] = ea * v2 / denom - offset
        lam = ea * v2 / (denom * denom)
        if lam > lam_max:
            lam_max = lam
    return lam_max, -1, True


@njit(cache=True)
def _advance_axisym(p, t, t_stop, max_steps, h, cot, n, alpha, offset,
                    cfl, eps_mc, use_rk4):
    """Advance phi in place until t_stop or max_steps.

    Returns (t, steps_taken, status, worst_node, worst_value).
    """
    m = p.shape[0]
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    steps = 0
    while steps < max_steps and t < t_stop:
        lam, node, ok = _rhs_axisym(p, k1, h, cot, n, alpha, offset, eps_mc)
        if not ok:
            return t, steps, STATUS_MC_LOST, node, lam
        dt = cfl * h * h / (2.0 * n * lam)
        if dt < DT_UNDERFLOW * max(1.0, t):
            return t, steps, STATUS_DT_UNDERFLOW, -1, dt
        if t + dt > t_stop:
            dt = t_stop - t
        if use_rk4:
            for i in range(m):
                tmp[i] = p[i] + 0.5 * dt * k1[i]
            lam, node, ok = _rhs_axisym(tmp, k2, h, cot, n, alpha, offset, eps_mc)
            if not ok:
                return t, steps, STATUS_MC_LOST, node, lam
            for i in range(m):
                tmp[i] = p[i] + 0.5 * dt * k2[i]
            lam, node, ok = _rhs_axisym(tmp, k3, h, cot, n, alpha, offset, eps_mc)
            if not ok:
                return t, steps, STATUS_MC_LOST, node, lam
            for i in range(m):
                tmp[i] = p[i] + dt * k3[i]
            lam, node, ok = _rhs_axisym(tmp, k4, h, cot, n, alpha, offset, eps_mc)
            if not ok:
                return t, steps, STATUS_MC_LOST, node, lam
            for i in range(m):
                p[i] = p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        else:
            for i in range(m):
                p[i] = p[i] + dt * k1[i]
        t += dt
        steps += 1
    return t, steps, STATUS_OK, -1, 0.0


# ---------------------------------------------------------------------------
# initial data, run loop


@dataclass
class InitialFamily:
    """Neumann-compatible initial radial profiles.

    Axisymmetric: u0 = r0 (1 + eps cos(k pi theta / theta_max)).
    Angular (full2d, m >= 1): u0 = r0 (1 + eps f_m(theta) cos(m psi)) with
    f_m = (sin theta / sin theta_max)^m * w(theta), w chosen so that
    f_m'(theta_max) = 0.
    """

    r0: float = 1.0
    eps: float = 0.0
    k_radial: int = 1
    m_angular: int = 0


def make_initial_data(grid: CapGrid, family: InitialFamily,
                      alpha: float = 1.0, eps_mc: float = DEFAULT_EPS_MC) -> ScalarField:
    if family.r0 <= 0.0:
        raise ValueError("r0 must be positive")
    if abs(family.eps) >= 1.0:
        raise ValueError("eps too large")
    th = grid.theta
    tm = grid.theta_max
    if family.m_angular == 0:
        prof = 1.0 + family.eps * np.cos(family.k_radial * math.pi * th / tm)
        vals = family.r0 * prof
        if grid.mode == FULL2D:
            vals = np.tile(vals[:, None], (1, grid.n_psi))
    else:
        if grid.mode != FULL2D:
            raise ValueError("angular family requires a full2d grid")
        m = family.m_angular
        cot_tm = math.cos(tm) / math.sin(tm)
        w = 1.0 + m * cot_tm / (2.0 * tm) * (tm ** 2 - th ** 2)
        f_m = (np.sin(th) / math.sin(tm)) ** m * w
        vals = family.r0 * (1.0 + family.eps * f_m[:, None] * np.cos(m * grid.psi)[None, :])
    u0 = ScalarField(grid, vals, neumann=True)
    if np.any(vals <= 0.0):
        raise ValueError("eps too large")
    try:
        geom = graph_geometry(u0, grid, alpha, eps_mc)
    except MeanConvexityError as exc:
        raise ValueError(f"initial data not mean convex ({exc})") from exc
    del geom
    return u0


def _require_t_end(params: FlowParams) -> float:
    if params.t_end is None:
        raise ValueError("t_end not set (map s_end through the rescale context first)")
    if params.t_end <= 0.0:
        raise ValueError("t_end must be positive")
    return params.t_end


def _default_ctx(u0: np.ndarray, alpha: float, n_dim: int):
    from .rescale import RescaleContext
    phi0 = np.log(u0)
    return RescaleContext(alpha=alpha, n_dim=n_dim,
                          c=0.5 * (float(phi0.min()) + float(phi0.max())))


def _diagnostic_row(t: float, u: ScalarField, grid: CapGrid,
                    params: FlowParams, ctx) -> np.ndarray:
    from .rescale import theta as theta_fn, time_map
    geom = u_geometry = graph_geometry(u, grid, params.alpha, params.eps_mc)
    phi = ScalarField(grid, np.log(u.values), neumann=True)
    q = rhs_Q(phi, grid, params.alpha, params.eps_mc).values
    Th = theta_fn(t, ctx)
    s = time_map(t, ctx, "t_to_s")
    grad_u_sup = math.sqrt(float(np.max(gradient(u, grid).norm2)))
    sup_grad_phi = math.sqrt(float(np.max(gradient(phi, grid).norm2)))
    H = geom.mean_curv.values
    row = np.array([
        t, s,
        float(u.values.min()), float(u.values.max()),
        float(q.min()) * Th ** params.alpha, float(q.max()) * Th ** params.alpha,
        sup_grad_phi,
        float(H.min()) * Th, float(H.max()) * Th,
        graph_area(u, grid),
        weighted_speed_integral(u, grid, params.alpha),
        float(H.min()), float(u_geometry.support.values.min()),
        float(u.values.min()) / Th, float(u.values.max()) / Th,
        grad_u_sup / Th,
    ])
    return row


def _validate_initial(u0: ScalarField, grid: CapGrid, params: FlowParams) -> None:
    if np.any(u0.values <= 0.0):
        raise FlowError("initial data not star-shaped: u0 <= 0")
    try:
        graph_geometry(u0, grid, params.alpha, params.eps_mc)
    except MeanConvexityError as exc:
        raise FlowError(f"initial data not mean convex ({exc})") from exc
    res = neumann_residual(u0, grid)
    tol = 50.0 * grid.h_theta ** 2 * float(np.max(np.abs(u0.values))) \
        * max(1.0, 1.0 / grid.theta_max ** 2)
    if res > tol:
        raise FlowError(
            f"initial data violates the Neumann condition: residual {res:.3e} > {tol:.3e}")


def _advance_numpy(phi_vals: np.ndarray, t: float, t_stop: float, max_steps: int,
                   grid: CapGrid, params: FlowParams, rhs_offset: float):
    """Plain-numpy advance used for full2d grids; mirrors the kernel contract."""
    steps = 0
    n = grid.n_dim
    sin_eff = np.maximum(grid.sin_theta, math.sin(grid.h_theta))
    h_loc2 = np.minimum(grid.h_theta, sin_eff * grid.h_psi)[:, None] ** 2
    while steps < max_steps and t < t_stop:
        phi = ScalarField(grid, phi_vals, neumann=True)
        try:
            k1 = rhs_Q(phi, grid, params.alpha, params.eps_mc, rhs_offset).values
        except MeanConvexityError as exc:
            return phi_vals, t, steps, STATUS_MC_LOST, exc
        lam = _lambda_max(phi, grid, params.alpha)
        dt = params.cfl_safety * float(np.min(h_loc2 / (2.0 * n * lam)))
        if dt < DT_UNDERFLOW * max(1.0, t):
            return phi_vals, t, steps, STATUS_DT_UNDERFLOW, None
        dt = min(dt, t_stop - t)

        def f(p):
            return rhs_Q(ScalarField(grid, p, neumann=True), grid,
                         params.alpha, params.eps_mc, rhs_offset).values

        try:
            if params.stepper == "euler":
                phi_vals = phi_vals + dt * k1
            else:
                k2 = f(phi_vals + 0.5 * dt * k1)
                k3 = f(phi_vals + 0.5 * dt * k2)
                k4 = f(phi_vals + dt * k3)
                phi_vals = phi_vals + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        except MeanConvexityError as exc:
            return phi_vals, t, steps, STATUS_MC_LOST, exc
        phi_vals[0] = phi_vals[0].mean()
        t += dt
        steps += 1
    if not np.all(np.isfinite(phi_vals)):
        return phi_vals, t, steps, STATUS_DT_UNDERFLOW, None
    return phi_vals, t, steps, STATUS_OK, None


def _run_loop(u0: ScalarField, grid: CapGrid, params: FlowParams, ctx,
              t_end: float, rhs_offset: float, kind: str,
              row_fn=None) -> Trajectory:
    """Shared time loop: record every `record_every` steps, hit snapshot
    times and t_end exactly.

    ``row_fn(time, u_field)`` builds a diagnostic row; defaults to the
    physical-run diagnostics.
    """
    if row_fn is None:
        def row_fn(tt, uu):
            return _diagnostic_row(tt, uu, grid, params, ctx)
    phi = np.log(u0.values)
    t = 0.0
    stops = sorted({float(ts) for ts in params.snapshot_times if 0.0 < ts <= t_end})
    stops.append(t_end)
    snap_times = set(stops[:-1]) | {0.0, t_end}

    rows = [row_fn(0.0, u0)]
    snapshots = [(0.0, u0.values.copy())]
    termination = TERM_REACHED
    error_detail = None

    axis = grid.mode == AXISYMMETRIC
    use_rk4 = params.stepper == "rk4"

    for t_stop in stops:
        while t < t_stop:
            if axis:
                t, steps, status, node, value = _advance_axisym(
                    phi, t, t_stop, params.record_every, grid.h_theta, grid.cot,
                    grid.n_dim, params.alpha, rhs_offset,
                    params.cfl_safety, params.eps_mc, use_rk4)
                exc = None
            else:
                phi, t, steps, status, exc = _advance_numpy(
                    phi, t, t_stop, params.record_every, grid, params, rhs_offset)
            if status == STATUS_MC_LOST:
                termination = TERM_MC_LOST
                error_detail = exc or FlowError(
                    f"mean convexity lost at node {node} (denominator {value:.3e})")
                break
            if status == STATUS_DT_UNDERFLOW:
                termination = TERM_BLOWUP
                error_detail = FlowError("dt underflow / non-finite state")
                break
            if not np.all(np.isfinite(phi)):
                termination = TERM_BLOWUP
                error_detail = FlowError("non-finite state")
                break
            u = ScalarField(grid, np.exp(phi), neumann=True)
            rows.append(row_fn(t, u))
        if termination != TERM_REACHED:
            break
        if t_stop in snap_times or t_stop == t_end:
            snapshots.append((t_stop, np.exp(phi.copy())))

    traj = Trajectory(
        params=params, grid_ref=grid, ctx=ctx, kind=kind,
        samples=np.array(rows), snapshots=snapshots,
        termination=termination,
    )
    if termination != TERM_REACHED:
        raise FlowIncomplete(termination, traj, error_detail)
    return traj


class FlowIncomplete(FlowError):
    """Raised when a run terminates before t_end; carries the partial trajectory."""

    def __init__(self, termination, trajectory, cause):
        super().__init__(f"run terminated early: {termination}"
                         + (f" ({cause})" if cause else ""))
        self.termination = termination
        self.trajectory = trajectory
        self.cause = cause


def run_flow(u0: ScalarField, grid: CapGrid, params: FlowParams,
             ctx=None) -> Trajectory:
    """Integrate the physical flow to params.t_end with adaptive stepping."""
    grid.check_field(u0)
    _validate_initial(u0, grid, params)
    if ctx is None:
        ctx = _default_ctx(u0.values, params.alpha, grid.n_dim)
    if params.t_end is None and params.s_end is not None:
        from .rescale import time_map
        params = replace(params, t_end=time_map(params.s_end, ctx, "s_to_t"))
    t_end = _require_t_end(params)
    return _run_loop(u0, grid, params, ctx, t_end, rhs_offset=0.0, kind="physical")
