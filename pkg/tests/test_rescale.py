"""Slow-time rescaling: model radius, time maps, gauge identities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coneflow import build_cap_grid, make_initial_data, run_flow, FlowParams
from coneflow.flow import InitialFamily
from coneflow.grid import ScalarField, gradient
from coneflow.geometry import graph_geometry, graph_area
from coneflow.rescale import (RescaleContext, rescale_trajectory,
                              run_rescaled_flow, theta, time_map)


def cap(n_theta=101, theta_max=np.pi / 3):
    return build_cap_grid(n_dim=2, theta_max=theta_max, n_theta=n_theta)


class TestModelRadius:
    def test_alpha1_values(self):
        ctx = RescaleContext(alpha=1.0, n_dim=2, c=0.0)
        assert theta(0.0, ctx) == 1.0
        assert theta(2.0, ctx) == pytest.approx(2.0)   # t/2 + 1
        assert theta(4.0, ctx) == pytest.approx(3.0)

    def test_alpha0_values(self):
        ctx = RescaleContext(alpha=0.0, n_dim=2, c=0.0)
        assert theta(2.0, ctx) == pytest.approx(math.e)

    def test_time_map_closed_form(self):
        # s(t) = (n/alpha) log(1 + alpha t / (n e^{alpha c}))
        ctx = RescaleContext(alpha=1.0, n_dim=2, c=0.0)
        assert time_map(2.0, ctx, "t_to_s") == pytest.approx(2 * math.log(2))

    @given(t=st.floats(0.0, 1e4), alpha=st.sampled_from([0.0, 0.5, 1.0, 2.0]),
           c=st.floats(-1.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_time_map_roundtrip(self, t, alpha, c):
        ctx = RescaleContext(alpha=alpha, n_dim=2, c=c)
        s = time_map(t, ctx, "t_to_s")
        assert time_map(s, ctx, "s_to_t") == pytest.approx(t, rel=1e-12,
                                                           abs=1e-12)
        assert s >= 0.0

    @given(t=st.floats(0.0, 100.0), alpha=st.sampled_from([0.5, 1.0]),
           c=st.floats(-1.0, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_theta_is_model_solution(self, t, alpha, c):
        # Theta solves Theta' = Theta^(1-alpha)/n with Theta(0) = e^c
        ctx = RescaleContext(alpha=alpha, n_dim=2, c=c)
        dt = 1e-5 * (1.0 + t)
        lhs = (theta(t + dt, ctx) - theta(t - dt, ctx)) / (2 * dt) if t > dt \
            else (theta(t + dt, ctx) - theta(t, ctx)) / dt
        assert lhs == pytest.approx(theta(t, ctx) ** (1 - alpha) / 2, rel=1e-4)

    def test_midpoint_policy(self):
        vals = np.array([0.5, 1.0, 2.0])
        ctx = RescaleContext.midpoint(vals, alpha=1.0, n_dim=2)
        assert ctx.c == pytest.approx(0.5 * (math.log(0.5) + math.log(2.0)))


class TestGaugeIdentities:
    def test_H_tilde_equals_H_of_utilde(self):
        # H~ = Theta H is exactly the mean curvature of u~ = u / Theta
        g = cap(201)
        u0 = make_initial_data(g, InitialFamily(eps=0.05))
        Th = 1.7
        ut = ScalarField(g, u0.values / Th, neumann=True)
        H = graph_geometry(u0, g, alpha=1.0).mean_curv.values
        Ht = graph_geometry(ut, g, alpha=1.0).mean_curv.values
        assert np.allclose(Ht, Th * H, rtol=1e-12)

    def test_gradient_phi_invariant(self):
        g = cap(101)
        u0 = make_initial_data(g, InitialFamily(eps=0.05))
        pt1 = ScalarField(g, np.log(u0.values), neumann=True)
        pt2 = ScalarField(g, np.log(u0.values / 3.1), neumann=True)
        assert np.allclose(gradient(pt1, g).norm2, gradient(pt2, g).norm2,
                           atol=1e-15)

    def test_area_scaling(self):
        g = cap(101)
        u0 = make_initial_data(g, InitialFamily(eps=0.05))
        Th = 2.3
        ut = ScalarField(g, u0.values / Th, neumann=True)
        assert graph_area(u0, g) == pytest.approx(
            Th ** g.n_dim * graph_area(ut, g), rel=1e-13)


class TestRescaleTrajectory:
    def test_posthoc_representation(self):
        g = cap(51)
        u0 = make_initial_data(g, InitialFamily(eps=0.05))
        ctx = RescaleContext.midpoint(u0.values, alpha=1.0, n_dim=2)
        traj = run_flow(u0, g, FlowParams(alpha=1.0, t_end=2.0,
                                          snapshot_times=(1.0,)), ctx=ctx)
        resc = rescale_trajectory(traj, ctx)
        assert resc.kind == "rescaled"
        # samples unchanged, snapshots re-expressed
        assert np.array_equal(resc.samples, traj.samples)
        for (t, u), (s, ut) in zip(traj.snapshots, resc.snapshots):
            assert s == pytest.approx(time_map(t, ctx, "t_to_s"))
            assert np.allclose(ut, u / theta(t, ctx), rtol=1e-14)

    def test_model_fixed_point(self):
        # constant data at radius e^c is a stationary point of the rescaled flow
        g = cap(51)
        ctx = RescaleContext(alpha=1.0, n_dim=2, c=0.0)
        u0t = ScalarField(g, np.ones(51), neumann=True)
        traj = run_rescaled_flow(u0t, g, FlowParams(alpha=1.0, s_end=1.0), ctx)
        _, ufin = traj.snapshots[-1]
        assert np.max(np.abs(ufin - 1.0)) < 1e-12

    def test_direct_run_columns_match_physical_schema(self):
        g = cap(51)
        u0 = make_initial_data(g, InitialFamily(eps=0.05))
        ctx = RescaleContext.midpoint(u0.values, alpha=1.0, n_dim=2)
        u0t = ScalarField(g, u0.values / theta(0.0, ctx), neumann=True)
        traj = run_rescaled_flow(u0t, g, FlowParams(alpha=1.0, s_end=0.5), ctx)
        # row 0 must agree with the physical diagnostic row at t = 0
        phys = run_flow(u0, g, FlowParams(alpha=1.0, t_end=0.1), ctx=ctx)
        assert np.allclose(traj.samples[0], phys.samples[0], rtol=1e-10,
                           atol=1e-12)

    def test_s_end_requires_value(self):
        g = cap(51)
        u0t = ScalarField(g, np.ones(51), neumann=True)
        with pytest.raises(ValueError, match="s_end"):
            run_rescaled_flow(u0t, g, FlowParams(alpha=1.0, t_end=1.0), None)


class TestTwoPathConsistency:
    def test_matched_s(self, twopath101):
        """Direct rescaled integration vs post-hoc rescaling of the physical
        run, compared at s = 1 and s = 2 against the N=101 -> N=201
        discretization error of the physical path."""
        grid1, _, ctx1, phys101 = twopath101["phys101"]
        grid2, _, ctx2, phys201 = twopath101["phys201"]
        _, _, _, resc101 = twopath101["resc101"]
        post = rescale_trajectory(phys101, ctx1)
        for (s_a, ua), (s_b, ub) in zip(post.snapshots[1:], resc101.snapshots[1:]):
            assert s_a == pytest.approx(s_b, abs=1e-12)
        # discretization yardstick: same path on half the mesh width
        post2 = rescale_trajectory(phys201, ctx2)
        err_disc = max(
            float(np.max(np.abs(a[1][::1] - b[1][::2])))
            for a, b in zip(post.snapshots[1:], post2.snapshots[1:]))
        err_paths = max(
            float(np.max(np.abs(a[1] - b[1])))
            for a, b in zip(post.snapshots[1:], resc101.snapshots[1:]))
        assert err_paths <= 2.0 * err_disc
