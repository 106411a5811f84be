"""Geometry of the radial graph hypersurface over the cap.

Two independent computation paths:

* :func:`graph_geometry` uses the closed forms in the graph chart
  (metric ``g_ij = u^2 sigma_ij + u_i u_j``, second fundamental form
  ``h_ij = (1/v)(-u_ij + u sigma_ij + 2 u_i u_j / u)``, etc.).
* :func:`embedding_oracle` works purely on ambient Cartesian coordinates of
  the embedding ``X = u(x) x``: tangents and second derivatives by finite
  differences, normal by a cross product, ``h_ij = -<d^2 X, nu>``.  It shares
  no geometric algebra with the closed forms and serves as a cross-check.
  The oracle is implemented for n = 2 (axisymmetric fields are lifted to a
  product grid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid as gridmod
from .grid import (
    AXISYMMETRIC, FULL2D, CapGrid, ScalarField, SymTensorField, CovectorField,
    gradient, hessian, trace_hessian, grad_grad_hessian, integrate,
    pole_normal_frame,
)

DEFAULT_EPS_MC = 1e-8


class GeometryError(ValueError):
    """Base class for geometric admissibility failures."""


class NotStarShapedError(GeometryError):
    """Radial graph function failed positivity."""


class MeanConvexityError(GeometryError):
    """Mean curvature dropped to or below the configured floor."""

    def __init__(self, msg, node=None, value=None):
        super().__init__(msg)
        self.node = node
        self.value = value


@dataclass(eq=False)
class GraphGeometry:
    """All pointwise quantities of the graph hypersurface at one instant."""

    grid_ref: CapGrid
    u: ScalarField
    v: ScalarField                  # tilt factor sqrt(1 + |D log u|^2)
    metric: SymTensorField          # g_ij
    inv_metric: SymTensorField      # g^ij (NaN on the pole row of full2d grids)
    second_ff: SymTensorField       # h_ij
    shape: np.ndarray               # mixed h^i_j; see module docstring
    mean_curv: ScalarField          # H
    normal: np.ndarray              # chart-frame components of nu: (radial, theta[, psi])
    support: ScalarField            # w = <X, nu> = u / v
    speed: ScalarField              # Phi = 1 / (u^alpha H)
    psi: ScalarField                # Psi = Phi / w
    alpha: float


def _tilt(u: ScalarField, grid: CapGrid):
    du = gradient(u, grid)
    phi_norm2 = du.norm2 / u.values ** 2
    v = np.sqrt(1.0 + phi_norm2)
    return du, v


def graph_geometry(u: ScalarField, grid: CapGrid, alpha: float,
                   eps_mc: float = DEFAULT_EPS_MC) -> GraphGeometry:
    """Evaluate every geometric quantity of graph(u) from the closed forms."""
    grid.check_field(u)
    uv = u.values
    if np.any(uv <= 0.0):
        raise NotStarShapedError("not star-shaped: u <= 0 at some node")

    du, v = _tilt(u, grid)
    d2u = hessian(u, grid)
    n = grid.n_dim

    if grid.mode == AXISYMMETRIC:
        ut = du.components[..., 0]
        u_tt = d2u.components[..., 0]
        u_ang = d2u.components[..., 1]
        g_tt = uv * uv + ut * ut            # = u^2 v^2
        g_ang = uv * uv
        ginv_tt = 1.0 / g_tt
        ginv_ang = 1.0 / g_ang
        h_tt = (-u_tt + uv + 2.0 * ut * ut / uv) / v
        h_ang = (-u_ang + uv) / v
        metric = np.stack([g_tt, g_ang], axis=-1)
        inv_metric = np.stack([ginv_tt, ginv_ang], axis=-1)
        second_ff = np.stack([h_tt, h_ang], axis=-1)
        shape = np.stack([ginv_tt * h_tt, ginv_ang * h_ang], axis=-1)
        H = shape[..., 0] + (n - 1) * shape[..., 1]
        normal = np.stack([np.ones_like(uv), -du.raised[..., 0] / uv ** 2], axis=-1)
        normal /= v[..., None]
    else:
        ut = du.components[..., 0]
        up = du.components[..., 1]
        sin2 = grid.sin_theta[:, None] ** 2
        sigma_pp = np.broadcast_to(sin2, uv.shape)
        g_tt = uv * uv + ut * ut
        g_tp = ut * up
        g_pp = uv * uv * sigma_pp + up * up
        metric = np.stack([g_tt, g_tp, g_pp], axis=-1)
        det = g_tt * g_pp - g_tp * g_tp
        with np.errstate(divide="ignore", invalid="ignore"):
            ginv_tt = g_pp / det
            ginv_tp = -g_tp / det
            ginv_pp = g_tt / det
        ginv_tt[0] = np.nan
        ginv_tp[0] = np.nan
        ginv_pp[0] = np.nan
        inv_metric = np.stack([ginv_tt, ginv_tp, ginv_pp], axis=-1)
        h_tt = (-d2u.components[..., 0] + uv + 2.0 * ut * ut / uv) / v
        h_tp = (-d2u.components[..., 1] + 2.0 * ut * up / uv) / v
        h_pp = (-d2u.components[..., 2] + uv * sigma_pp + 2.0 * up * up / uv) / v
        h_tt[0] = ((-d2u.components[..., 0] + uv) / v)[0]
        h_tp[0] = 0.0
        h_pp[0] = 0.0
        second_ff = np.stack([h_tt, h_tp, h_pp], axis=-1)
        shape = np.empty(uv.shape + (2, 2))
        shape[..., 0, 0] = ginv_tt * h_tt + ginv_tp * h_tp
        shape[..., 0, 1] = ginv_tt * h_tp + ginv_tp * h_pp
        shape[..., 1, 0] = ginv_tp * h_tt + ginv_pp * h_tp
        shape[..., 1, 1] = ginv_tp * h_tp + ginv_pp * h_pp
        # H via the scalar trace formula, pole included through the ring limit
        phi = ScalarField(grid, np.log(uv), neumann=u.neumann)
        tr = trace_hessian(phi, grid)
        con = grad_grad_hessian(phi, grid)
        H = (n - (tr - con / v ** 2)) / (uv * v)
        shape[0] = np.nan
        shape[0, :, 0, 0] = 0.5 * H[0]
        shape[0, :, 1, 1] = 0.5 * H[0]
        normal = np.stack([np.ones_like(uv),
                           -du.raised[..., 0] / uv ** 2,
                           -du.raised[..., 1] / uv ** 2], axis=-1)
        normal /= v[..., None]

    if np.any(H <= eps_mc):
        idx = int(np.argmin(H))
        raise MeanConvexityError(
            f"mean convexity lost: H = {H.flat[idx]:.3e} at node {idx}",
            node=idx, value=float(H.flat[idx]),
        )

    w = uv / v
    speed = 1.0 / (uv ** alpha * H)
    return GraphGeometry(
        grid_ref=grid, u=u,
        v=ScalarField(grid, v),
        metric=SymTensorField(grid, metric),
        inv_metric=SymTensorField(grid, inv_metric),
        second_ff=SymTensorField(grid, second_ff),
        shape=shape,
        mean_curv=ScalarField(grid, H),
        normal=normal,
        support=ScalarField(grid, w),
        speed=ScalarField(grid, speed),
        psi=ScalarField(grid, speed / w),
        alpha=alpha,
    )


def graph_area(u: ScalarField, grid: CapGrid) -> float:
    """n-dimensional area of graph(u): integral of u^n v over the cap."""
    grid.check_field(u)
    if np.any(u.values <= 0.0):
        raise NotStarShapedError("not star-shaped: u <= 0 at some node")
    _, v = _tilt(u, grid)
    return float(np.sum(grid.quad_weights * u.values ** grid.n_dim * v))


def weighted_speed_integral(u: ScalarField, grid: CapGrid, alpha: float) -> float:
    """Integral of u^(-alpha) over graph(u), i.e. of u^(n-alpha) v over the cap."""
    _, v = _tilt(u, grid)
    return float(np.sum(grid.quad_weights * u.values ** (grid.n_dim - alpha) * v))


# ---------------------------------------------------------------------------
# embedding oracle (independent path, n = 2)


@dataclass(eq=False)
class OracleGeometry:
    """Finite-difference geometry of the ambient embedding on a product grid.

    All arrays have shape (n_theta, n_psi); the pole row is NaN where the
    cross-product construction degenerates.
    """

    theta: np.ndarray
    psi: np.ndarray
    metric: np.ndarray      # (..., 3): g_tt, g_tp, g_pp
    second_ff: np.ndarray   # (..., 3)
    mean_curv: np.ndarray
    normal: np.ndarray      # ambient Cartesian components (..., 3)
    area: float


def _lift(u: ScalarField, grid: CapGrid, n_psi: int | None):
    if grid.mode == FULL2D:
        return u.values.copy(), grid.psi, grid.h_psi
    if n_psi is None:
        n_psi = grid.n_theta + (grid.n_theta % 2)
        n_psi = max(n_psi, 16)
    h_psi = 2.0 * math.pi / n_psi
    psi = np.arange(n_psi) * h_psi
    return np.tile(u.values[:, None], (1, n_psi)), psi, h_psi


def embedding_oracle(u: ScalarField, grid: CapGrid, n_psi: int | None = None) -> OracleGeometry:
    """Geometry of graph(u) from ambient finite differences (n = 2 only)."""
    grid.check_field(u)
    if grid.n_dim != 2:
        raise ValueError("embedding oracle is implemented for n_dim = 2 only")
    if np.any(u.values <= 0.0):
        raise NotStarShapedError("not star-shaped: u <= 0 at some node")

    U, psi, h_psi = _lift(u, grid, n_psi)
    n_theta, npsi = U.shape
    th = grid.theta
    st, ct = np.sin(th)[:, None], np.cos(th)[:, None]
    cp, sp = np.cos(psi)[None, :], np.sin(psi)[None, :]
    direction = np.stack([st * cp, st * sp, np.broadcast_to(ct, U.shape)], axis=-1)
    X = U[..., None] * direction

    h = grid.h_theta
    half = npsi // 2

    def pad_theta(A):
        """Ghost rows: across-pole image below, one-sided handled separately above."""
        out = np.empty((n_theta + 1,) + A.shape[1:])
        out[0] = np.roll(A[1], half, axis=0)
        out[1:] = A
        return out

    Xp = pad_theta(X)
    X_t = np.empty_like(X)
    X_t[:-1] = (Xp[2:] - Xp[:-2]) / (2.0 * h)
    X_t[-1] = (3.0 * X[-1] - 4.0 * X[-2] + X[-3]) / (2.0 * h)
    X_tt = np.empty_like(X)
    X_tt[:-1] = (Xp[2:] - 2.0 * Xp[1:-1] + Xp[:-2]) / h ** 2
    X_tt[-1] = (2.0 * X[-1] - 5.0 * X[-2] + 4.0 * X[-3] - X[-4]) / h ** 2

    X_p = (np.roll(X, -1, axis=1) - np.roll(X, 1, axis=1)) / (2.0 * h_psi)
    X_pp = (np.roll(X, -1, axis=1) - 2.0 * X + np.roll(X, 1, axis=1)) / h_psi ** 2
    X_tp = (np.roll(X_t, -1, axis=1) - np.roll(X_t, 1, axis=1)) / (2.0 * h_psi)

    g_tt = np.einsum("...k,...k->...", X_t, X_t)
    g_tp = np.einsum("...k,...k->...", X_t, X_p)
    g_pp = np.einsum("...k,...k->...", X_p, X_p)

    nu = np.cross(X_t, X_p)
    norm = np.linalg.norm(nu, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = nu / norm[..., None]
    # orient outward: positive radial component
    radial = np.einsum("...k,...k->...", nu, direction)
    nu *= np.sign(radial)[..., None]
    nu[0] = np.nan

    h_tt = -np.einsum("...k,...k->...", X_tt, nu)
    h_tp = -np.einsum("...k,...k->...", X_tp, nu)
    h_pp = -np.einsum("...k,...k->...", X_pp, nu)

    det = g_tt * g_pp - g_tp ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        H = (g_pp * h_tt - 2.0 * g_tp * h_tp + g_tt * h_pp) / det
    H[0] = np.nan

    # area from the FD-induced volume element; the pole row contributes 0
    sqrt_det = np.sqrt(np.maximum(det, 0.0))
    trap = np.ones(n_theta)
    trap[0] = trap[-1] = 0.5
    area = float(np.sum(sqrt_det * trap[:, None]) * h * h_psi)

    return OracleGeometry(
        theta=th, psi=psi,
        metric=np.stack([g_tt, g_tp, g_pp], axis=-1),
        second_ff=np.stack([h_tt, h_tp, h_pp], axis=-1),
        mean_curv=H, normal=nu, area=area,
    )
