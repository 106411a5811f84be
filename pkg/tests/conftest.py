"""Shared fixtures.  The expensive reference runs are session-scoped so the
acceptance suite and the unit suites integrate each flow exactly once."""

import numpy as np
import pytest

from coneflow import (build_cap_grid, make_initial_data, FlowParams, run_flow,
                      InitialFamily)
from coneflow.rescale import RescaleContext, run_rescaled_flow, time_map, theta

BENCH_THETA_MAX = np.pi / 3


def _bench_setup(n_theta, mode="axisymmetric", eps=0.05, m_angular=0, n_psi=16):
    grid = build_cap_grid(n_dim=2, theta_max=BENCH_THETA_MAX, n_theta=n_theta,
                          mode=mode, n_psi=n_psi)
    fam = InitialFamily(r0=1.0, eps=eps, k_radial=1, m_angular=m_angular)
    u0 = make_initial_data(grid, fam)
    ctx = RescaleContext.midpoint(np.asarray(u0.values).ravel(), alpha=1.0,
                                  n_dim=2)
    return grid, u0, ctx


@pytest.fixture(scope="session")
def bench201():
    """Perturbed axisymmetric benchmark integrated to s = 10.

    Snapshots: a closely spaced triple near t = 1 for the evolution-identity
    check, plus s-equispaced snapshots for the Hoelder diagnostic.
    """
    grid, u0, ctx = _bench_setup(201)
    snaps = (0.995, 1.0, 1.005) + tuple(
        time_map(s, ctx, "s_to_t") for s in (2.0, 4.0, 6.0, 8.0))
    params = FlowParams(alpha=1.0, s_end=10.0, snapshot_times=snaps)
    traj = run_flow(u0, grid, params, ctx=ctx)
    return {"grid": grid, "u0": u0, "ctx": ctx, "params": params, "traj": traj}


@pytest.fixture(scope="session")
def twopath101():
    """Physical and direct-rescaled runs of the benchmark at N=101 to s=2,
    plus the physical run at N=201 for the discretization-error yardstick."""
    out = {}
    for key, n_theta in (("phys101", 101), ("phys201", 201)):
        grid, u0, ctx = _bench_setup(n_theta)
        params = FlowParams(alpha=1.0, s_end=2.0,
                            snapshot_times=(time_map(1.0, ctx, "s_to_t"),))
        out[key] = (grid, u0, ctx, run_flow(u0, grid, params, ctx=ctx))
    grid, u0, ctx = _bench_setup(101)
    from coneflow.grid import ScalarField
    u0t = ScalarField(grid, u0.values / theta(0.0, ctx), neumann=True)
    params = FlowParams(alpha=1.0, s_end=2.0, snapshot_times=(1.0,))
    out["resc101"] = (grid, u0t, ctx,
                      run_rescaled_flow(u0t, grid, params, ctx))
    return out


@pytest.fixture(scope="session")
def full2d_axisym():
    """Axisymmetric initial data evolved on the 2-D grid, with the matched
    1-D run on the same theta nodes."""
    grid2, u02, ctx2 = _bench_setup(25, mode="full2d", n_psi=8)
    params = FlowParams(alpha=1.0, s_end=5.0)
    traj2 = run_flow(u02, grid2, params, ctx=ctx2)
    grid1, u01, ctx1 = _bench_setup(25)
    traj1 = run_flow(u01, grid1, params, ctx=ctx1)
    return {"grid2": grid2, "u02": u02, "ctx2": ctx2, "traj2": traj2,
            "grid1": grid1, "u01": u01, "ctx1": ctx1, "traj1": traj1}


@pytest.fixture(scope="session")
def full2d_m2():
    """m = 2 angular perturbation on the 2-D grid, run until round."""
    grid, u0, ctx = _bench_setup(25, mode="full2d", n_psi=8, eps=0.05,
                                 m_angular=2)
    params = FlowParams(alpha=1.0, s_end=5.0)
    traj = run_flow(u0, grid, params, ctx=ctx)
    return {"grid": grid, "u0": u0, "ctx": ctx, "traj": traj}


@pytest.fixture(scope="session")
def model_run():
    """Constant data u0 = 1, alpha = 1, n = 2, physical horizon t = 4."""
    grid = build_cap_grid(n_dim=2, theta_max=BENCH_THETA_MAX, n_theta=101)
    u0 = make_initial_data(grid, InitialFamily(r0=1.0, eps=0.0))
    ctx = RescaleContext(alpha=1.0, n_dim=2, c=0.0)
    params = FlowParams(alpha=1.0, t_end=4.0)
    traj = run_flow(u0, grid, params, ctx=ctx)
    return {"grid": grid, "u0": u0, "ctx": ctx, "traj": traj}
