"""A-priori estimate checks: genuine passes and fault-injected duals."""

import copy
import json

import numpy as np
import pytest

from coneflow.flow import SAMPLE_COLUMNS, FlowParams, run_flow
from coneflow import verify as V


def corrupted(traj, column, fn):
    bad = copy.copy(traj)
    bad.samples = traj.samples.copy()
    j = SAMPLE_COLUMNS.index(column)
    bad.samples[:, j] = fn(bad.samples[:, j])
    return bad


class TestDerivedConstants:
    def test_formula_matches_bruteforce(self, bench201):
        a = V.derived_constants(bench201["traj"])
        b = V.derived_constants_bruteforce(bench201["traj"])
        for key in a:
            assert abs(a[key] - b[key]) <= 1e-12 * max(1.0, abs(a[key])), key

    def test_band_ordering(self, bench201):
        cs = V.derived_constants(bench201["traj"])
        assert 0 < cs["c3"] < cs["c4"]
        assert cs["c1"] <= 1.0 <= cs["c2"]
        assert cs["m1"] <= 1.0 / 2 <= cs["m2"]


class TestChecksPassOnBenchmark:
    def test_all_default_checks(self, bench201):
        results = V.run_checks(bench201["traj"],
                               V.DEFAULT_CHECKS + V.SNAPSHOT_CHECKS)
        failed = [r.name for r in results if not r.passed]
        assert failed == []

    def test_checks_deterministic(self, bench201):
        r1 = V.run_checks(bench201["traj"])
        r2 = V.run_checks(bench201["traj"])
        for a, b in zip(r1, r2):
            assert (a.name, a.passed, a.margin, a.tolerance) == \
                   (b.name, b.passed, b.margin, b.tolerance)

    def test_report_serializable(self, bench201):
        results = V.run_checks(bench201["traj"])
        rep = V.build_report(results,
                             constants=V.derived_constants(bench201["traj"]),
                             meta={"case": "benchmark"})
        assert rep.passed
        tree = json.loads(json.dumps(rep.to_dict(), sort_keys=True))
        assert tree["passed"] is True
        assert len(tree["checks"]) == len(results)

    def test_report_rejects_duplicates(self, bench201):
        r = V.check_c0(bench201["traj"])
        with pytest.raises(ValueError, match="duplicate"):
            V.build_report([r, r])
        with pytest.raises(ValueError, match="empty"):
            V.build_report([])


class TestFaultInjection:
    """Every check must reject a run that violates its estimate."""

    def test_c0_catches_corruption(self, bench201):
        bad = corrupted(bench201["traj"], "u_max",
                        lambda col: np.where(np.arange(len(col)) == 50,
                                             2.0 * col, col))
        assert not V.check_c0(bad).passed

    def test_phidot_catches_corruption(self, bench201):
        # corrupt only late rows so the initial-data bound stays honest
        bad = corrupted(bench201["traj"], "phidot_theta_max",
                        lambda c: np.where(np.arange(len(c)) > 10,
                                           1.5 * c, c))
        assert not V.check_phidot(bad).passed

    def test_gradient_monotone_catches_reversal(self, bench201):
        bad = corrupted(bench201["traj"], "sup_grad_phi", lambda c: c[::-1])
        assert not V.check_gradient_monotone(bad).passed

    def test_H_band_shrunk_100x_fails(self, bench201):
        assert V.check_H_theta(bench201["traj"]).passed
        assert not V.check_H_theta(bench201["traj"], band_scale=0.01).passed

    def test_area_law_catches_corruption(self, bench201):
        bad = corrupted(bench201["traj"], "area",
                        lambda c: np.where(np.arange(len(c)) == 40,
                                           1.001 * c, c))
        assert not V.check_area_law(bad).passed

    def test_evolution_identities_fault_injection(self, bench201):
        good = V.check_evolution_identities(bench201["traj"])
        assert good.passed
        bad = V.check_evolution_identities(bench201["traj"], speed_factor=2.0)
        assert not bad.passed

    def test_gradient_decay_rejects_flat_and_growing(self, bench201):
        traj = bench201["traj"]
        flat = np.full(traj.n_samples, 0.05)
        grow = 0.01 * np.exp(0.1 * traj.col("s"))
        assert not V.check_gradient_decay(traj, series_override=flat).passed
        assert not V.check_gradient_decay(traj, series_override=grow).passed

    def test_holder_rejects_growth(self, bench201):
        n = 40
        growing = 0.1 * np.exp(np.linspace(0, 3, n))
        r = V.check_holder_diagnostic(bench201["traj"],
                                      series_override=growing)
        assert not r.passed

    def test_radius_rejects_displaced_limit(self, bench201):
        traj = bench201["traj"]
        u0 = bench201["u0"].values
        assert V.check_radius(traj, u0).passed
        # a limit shape three times larger cannot satisfy the area sandwich
        bad = copy.copy(traj)
        bad.snapshots = list(traj.snapshots)
        t_fin, u_fin = bad.snapshots[-1]
        bad.snapshots[-1] = (t_fin, 3.0 * u_fin)
        assert not V.check_radius(bad, u0).passed


class TestEvolutionIdentityDetails:
    def test_measured_constants_reported(self, bench201):
        r = V.check_evolution_identities(bench201["traj"])
        assert "measured C_t" in r.details
        assert r.tolerance > 0

    def test_requires_close_snapshots(self, bench201):
        traj = copy.copy(bench201["traj"])
        traj.snapshots = [traj.snapshots[0], traj.snapshots[-1]]
        with pytest.raises(ValueError, match="closely spaced"):
            V.check_evolution_identities(traj)


class TestModelRunMargins:
    def test_area_law_tight_on_model(self, model_run):
        r = V.check_area_law(model_run["traj"], tol_floor=1e-8)
        assert r.passed
        assert "residual" in r.details

    def test_c0_exact_on_model(self, model_run):
        r = V.check_c0(model_run["traj"])
        assert r.passed
        # sandwich collapses for constant data: margin ~ round-off
        assert abs(r.margin) < 1e-10
