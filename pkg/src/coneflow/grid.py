"""Discrete differential geometry on a geodesic cap of the round unit sphere.

Two grid modes are supported:

* ``axisymmetric`` -- a 1-D grid in the polar angle theta, valid for any
  hypersurface dimension ``n_dim`` as long as all fields are rotationally
  symmetric.  Symmetric 2-tensors are stored in the reduced form
  ``(T_tt, T_ang)`` where ``T_ang`` is the scalar multiplying the angular
  block ``sigma_ab`` of the round metric, so all stored components stay
  finite at the pole.
* ``full2d`` -- a 2-D (theta, psi) polar grid on S^2 (``n_dim == 2`` only),
  psi periodic.  Tensors carry raw chart components ``(T_tt, T_tp, T_pp)``.
  The chart degenerates at the pole; pole rows of chart tensors hold the
  componentwise limits and contracted quantities are evaluated through the
  normal-coordinate ring limits (see :func:`pole_normal_frame`).

Derivatives are centered second-order stencils.  The pole uses the even /
across-pole reflection, the outer boundary theta = theta_max uses either the
Neumann ghost reflection (for fields flagged as satisfying the boundary
condition) or one-sided second-order stencils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

AXISYMMETRIC = "axisymmetric"
FULL2D = "full2d"


class GridError(ValueError):
    """Invalid grid construction parameters."""


class GridMismatchError(ValueError):
    """A field was used with a grid it does not live on."""


def sphere_area(n_minus_1: int) -> float:
    """Surface area of the unit sphere S^(n-1) in R^n."""
    n = n_minus_1 + 1
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(eq=False)
class CapGrid:
    """Discretized geodesic cap of S^n with polar radius ``theta_max``."""

    n_dim: int
    theta_max: float
    mode: str
    n_theta: int
    n_psi: int  # 0 in axisymmetric mode
    theta: np.ndarray  # (n_theta,)
    psi: np.ndarray | None  # (n_psi,) or None
    h_theta: float
    h_psi: float  # 0.0 in axisymmetric mode
    quad_weights: np.ndarray  # field-shaped
    boundary_index: np.ndarray  # flat indices of theta = theta_max nodes
    # cached chart data; cot[0] is unused (pole handled separately)
    cot: np.ndarray = field(repr=False, default=None)
    sin_theta: np.ndarray = field(repr=False, default=None)

    @property
    def shape(self) -> tuple:
        if self.mode == AXISYMMETRIC:
            return (self.n_theta,)
        return (self.n_theta, self.n_psi)

    def check_field(self, f) -> None:
        if f.grid_ref is not self:
            raise GridMismatchError("field does not live on this grid")


@dataclass(eq=False)
class ScalarField:
    """One real value per grid node.

    ``neumann`` flags fields known to satisfy the discrete Neumann condition
    at theta_max; derivative stencils then use the ghost reflection instead
    of one-sided differences.
    """

    grid_ref: CapGrid
    values: np.ndarray
    neumann: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid_ref.shape:
            raise GridMismatchError(
                f"field shape {self.values.shape} != grid shape {self.grid_ref.shape}"
            )


@dataclass(eq=False)
class CovectorField:
    """Chart components of a covector, with raised components and |Df|^2 cached.

    Axisymmetric: ``components[..., 0] = f_theta``.
    Full2d: ``components[..., 0] = f_theta``, ``components[..., 1] = f_psi``.
    """

    grid_ref: CapGrid
    components: np.ndarray
    raised: np.ndarray
    norm2: np.ndarray


@dataclass(eq=False)
class SymTensorField:
    """Symmetric 2-tensor in the storage convention of this module.

    Axisymmetric: ``components[..., (0, 1)] = (T_tt, T_ang)`` with
    ``T_ab = T_ang * sigma_ab`` on the angular block.
    Full2d: ``components[..., (0, 1, 2)] = (T_tt, T_tp, T_pp)``.
    """

    grid_ref: CapGrid
    components: np.ndarray


def build_cap_grid(n_dim: int, theta_max: float, n_theta: int,
                   mode: str = AXISYMMETRIC, n_psi: int = 0) -> CapGrid:
    """Build a cap grid; quadrature weights integrate against the round measure."""
    if n_dim < 2:
        raise GridError("n_dim must be >= 2")
    if not 0.0 < theta_max <= math.pi / 2.0 + 1e-15:
        raise GridError("cone not convex: require 0 < theta_max <= pi/2")
    if n_theta < 3:
        raise GridError("need at least 3 theta nodes")
    if mode == FULL2D:
        if n_dim != 2:
            raise GridError("full2d mode requires n_dim = 2")
        if n_psi < 8:
            raise GridError("full2d mode requires n_psi >= 8")
        if n_psi % 2 != 0:
            raise GridError("full2d mode requires even n_psi (across-pole reflection)")
    elif mode != AXISYMMETRIC:
        raise GridError(f"unknown mode {mode!r}")

    theta = np.linspace(0.0, theta_max, n_theta)
    h_theta = theta_max / (n_theta - 1)
    sin_theta = np.sin(theta)
    cot = np.zeros(n_theta)
    cot[1:] = np.cos(theta[1:]) / sin_theta[1:]

    trap = np.ones(n_theta)
    trap[0] = trap[-1] = 0.5

    if mode == AXISYMMETRIC:
        quad = sphere_area(n_dim - 1) * sin_theta ** (n_dim - 1) * h_theta * trap
        psi = None
        h_psi = 0.0
        boundary = np.array([n_theta - 1])
        n_psi = 0
    else:
        h_psi = 2.0 * math.pi / n_psi
        psi = np.arange(n_psi) * h_psi
        quad = (sin_theta * h_theta * trap)[:, None] * np.full(n_psi, h_psi)
        boundary = np.arange((n_theta - 1) * n_psi, n_theta * n_psi)

    return CapGrid(
        n_dim=n_dim, theta_max=float(theta_max), mode=mode,
        n_theta=n_theta, n_psi=n_psi, theta=theta, psi=psi,
        h_theta=h_theta, h_psi=h_psi, quad_weights=quad,
        boundary_index=boundary, cot=cot, sin_theta=sin_theta,
    )


# ---------------------------------------------------------------------------
# finite-difference building blocks


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite field values")


def d_theta(f: np.ndarray, grid: CapGrid, neumann: bool) -> np.ndarray:
    """First derivative in theta, second order, pole and boundary handled."""
    h = grid.h_theta
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    if grid.mode == AXISYMMETRIC:
        out[0] = 0.0  # even reflection at the pole
        if neumann:
            out[-1] = 0.0
        else:
            out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    else:
        half = grid.n_psi // 2
        out[0] = (f[1] - np.roll(f[1], half)) / (2.0 * h)
        if neumann:
            out[-1] = 0.0
        else:
            out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return out


def d2_theta(f: np.ndarray, grid: CapGrid, neumann: bool) -> np.ndarray:
    h2 = grid.h_theta ** 2
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h2
    if grid.mode == AXISYMMETRIC:
        out[0] = 2.0 * (f[1] - f[0]) / h2
        if neumann:
            out[-1] = 2.0 * (f[-2] - f[-1]) / h2
        else:
            out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h2
    else:
        half = grid.n_psi // 2
        out[0] = (f[1] - 2.0 * f[0] + np.roll(f[1], half)) / h2
        if neumann:
            out[-1] = 2.0 * (f[-2] - f[-1]) / h2
        else:
            out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h2
    return out


def d_psi(f: np.ndarray, grid: CapGrid) -> np.ndarray:
    return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * grid.h_psi)


def d2_psi(f: np.ndarray, grid: CapGrid) -> np.ndarray:
    return (np.roll(f, -1, axis=1) - 2.0 * f + np.roll(f, 1, axis=1)) / grid.h_psi ** 2


def d_theta_psi(f: np.ndarray, grid: CapGrid, neumann: bool) -> np.ndarray:
    return d_psi(d_theta(f, grid, neumann), grid)


def pole_normal_frame(f: np.ndarray, grid: CapGrid) -> dict:
    """Normal-coordinate derivative data at the pole of a full2d field.

    Extracted from Fourier moments of the first theta ring: values ``f0``,
    gradient ``(fx, fy)``, Hessian ``(fxx, fxy, fyy)`` and Laplacian ``lap``,
    all second-order accurate.
    """
    h = grid.h_theta
    ring = f[1]
    f0 = float(f[0].mean())
    c1 = np.cos(grid.psi)
    s1 = np.sin(grid.psi)
    fx = 2.0 * float((ring * c1).mean()) / h
    fy = 2.0 * float((ring * s1).mean()) / h
    lap = 4.0 * (float(ring.mean()) - f0) / h ** 2
    m2c = float((ring * np.cos(2.0 * grid.psi)).mean())
    m2s = float((ring * np.sin(2.0 * grid.psi)).mean())
    # m2c = h^2 (fxx - fyy)/8, m2s = h^2 fxy / 4, fxx + fyy = lap
    diff = 8.0 * m2c / h ** 2
    fxy = 4.0 * m2s / h ** 2
    fxx = 0.5 * (lap + diff)
    fyy = 0.5 * (lap - diff)
    return {"f0": f0, "fx": fx, "fy": fy, "lap": lap,
            "fxx": fxx, "fxy": fxy, "fyy": fyy}


# ---------------------------------------------------------------------------
# public operations


def gradient(f: ScalarField, grid: CapGrid) -> CovectorField:
    """Covariant gradient (= coordinate derivative) of a scalar field."""
    grid.check_field(f)
    _check_finite(f.values)
    vals = f.values
    ft = d_theta(vals, grid, f.neumann)
    if grid.mode == AXISYMMETRIC:
        comps = ft[:, None]
        raised = comps.copy()  # sigma^tt = 1
        norm2 = ft * ft
    else:
        fp = d_psi(vals, grid)
        fp[0] = 0.0
        comps = np.stack([ft, fp], axis=-1)
        raised = np.empty_like(comps)
        raised[..., 0] = ft
        sin2 = grid.sin_theta[:, None] ** 2
        raised[1:, :, 1] = fp[1:] / sin2[1:]
        raised[0, :, 1] = 0.0
        norm2 = ft * ft
        norm2[1:] += fp[1:] ** 2 / sin2[1:]
        pole = pole_normal_frame(vals, grid)
        norm2[0] = pole["fx"] ** 2 + pole["fy"] ** 2
    return CovectorField(grid_ref=grid, components=comps, raised=raised, norm2=norm2)


def hessian(f: ScalarField, grid: CapGrid) -> SymTensorField:
    """Covariant Hessian with the round-metric Christoffel symbols baked in."""
    grid.check_field(f)
    _check_finite(f.values)
    vals = f.values
    ft = d_theta(vals, grid, f.neumann)
    ftt = d2_theta(vals, grid, f.neumann)
    if grid.mode == AXISYMMETRIC:
        ang = np.empty_like(vals)
        ang[1:] = grid.cot[1:] * ft[1:]
        ang[0] = ftt[0]  # smooth limit cot(theta) f_theta -> f_theta_theta
        comps = np.stack([ftt, ang], axis=-1)
    else:
        fp = d_psi(vals, grid)
        ftp = d_theta_psi(vals, grid, f.neumann)
        fpp = d2_psi(vals, grid)
        tp = np.empty_like(vals)
        tp[1:] = ftp[1:] - grid.cot[1:, None] * fp[1:]
        tp[0] = 0.0
        pp = np.empty_like(vals)
        sc = (grid.sin_theta * np.cos(grid.theta))[:, None]
        pp[:] = fpp + sc * ft
        pp[0] = 0.0
        comps = np.stack([ftt, tp, pp], axis=-1)
    return SymTensorField(grid_ref=grid, components=comps)


def trace_hessian(f: ScalarField, grid: CapGrid) -> np.ndarray:
    """Laplace-Beltrami of f; pole of a full2d grid via the ring limit."""
    ft = d_theta(f.values, grid, f.neumann)
    ftt = d2_theta(f.values, grid, f.neumann)
    if grid.mode == AXISYMMETRIC:
        out = np.empty_like(f.values)
        out[1:] = ftt[1:] + (grid.n_dim - 1) * grid.cot[1:] * ft[1:]
        out[0] = grid.n_dim * ftt[0]
        return out
    fpp = d2_psi(f.values, grid)
    out = np.empty_like(f.values)
    sin2 = grid.sin_theta[:, None] ** 2
    out[1:] = ftt[1:] + grid.cot[1:, None] * ft[1:] + fpp[1:] / sin2[1:]
    out[0] = pole_normal_frame(f.values, grid)["lap"]
    return out


def grad_grad_hessian(f: ScalarField, grid: CapGrid) -> np.ndarray:
    """The contraction f^i f^j (D^2 f)_ij used by the flow operator."""
    if grid.mode == AXISYMMETRIC:
        ft = d_theta(f.values, grid, f.neumann)
        ftt = d2_theta(f.values, grid, f.neumann)
        return ft * ft * ftt
    g = gradient(f, grid)
    hess = hessian(f, grid)
    ft = g.components[..., 0]
    fp_up = g.raised[..., 1]
    tt = hess.components[..., 0]
    tp = hess.components[..., 1]
    pp = hess.components[..., 2]
    out = ft * ft * tt + 2.0 * ft * fp_up * tp + fp_up * fp_up * pp
    pole = pole_normal_frame(f.values, grid)
    out[0] = (pole["fx"] ** 2 * pole["fxx"]
              + 2.0 * pole["fx"] * pole["fy"] * pole["fxy"]
              + pole["fy"] ** 2 * pole["fyy"])
    return out


def integrate(f: ScalarField, grid: CapGrid) -> float:
    """Quadrature of f against the round measure of the cap."""
    grid.check_field(f)
    return float(np.sum(grid.quad_weights * f.values))


def cap_area(grid: CapGrid) -> float:
    """Discrete area of the cap, integrate(1)."""
    return float(np.sum(grid.quad_weights))


def neumann_residual(f: ScalarField, grid: CapGrid) -> float:
    """Max |one-sided d f / d theta| over the boundary theta = theta_max."""
    h = grid.h_theta
    vals = f.values
    db = (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * h)
    return float(np.max(np.abs(db)))
