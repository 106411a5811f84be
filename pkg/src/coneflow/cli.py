"""Command-line driver: TOML configs, experiment runs, file I/O.

This is the only module with side effects.  `coneflow run config.toml`
integrates the flow, writes the diagnostic time series, snapshot files,
the verification report and an echo of the effective config, and exits 0
iff the run completed and every enabled check passed.

Output files (all plain text, byte-stable across reruns):

* ``timeseries.csv``  -- header then one row per recorded sample,
  columns exactly as in :data:`coneflow.flow.SAMPLE_COLUMNS`;
* ``snap_<k>.csv``    -- ``# key = value`` header lines (n_dim, theta_max,
  mode, t, s) then ``theta,u`` rows (``theta,psi,u`` on 2-D grids);
* ``report.json``     -- the EstimateReport tree, keys sorted;
* ``config.echo``     -- the effective configuration (defaults expanded),
  itself a valid config.

Floats are written with ``repr`` (shortest round-trip decimal), which is
what makes reruns byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import AXISYMMETRIC, FULL2D, CapGrid, ScalarField, build_cap_grid, GridError
from .geometry import graph_geometry, embedding_oracle, GeometryError
from .flow import (FlowParams, FlowError, FlowIncomplete, InitialFamily,
                   Trajectory, SAMPLE_COLUMNS, make_initial_data, run_flow)
from .rescale import RescaleContext, time_map
from . import verify as V


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "name": "experiment",
    "grid": {"n_dim": 2, "theta_max": math.pi / 3, "mode": AXISYMMETRIC,
             "n_theta": 101, "n_psi": 16},
    "flow": {"alpha": 1.0, "t_end": None, "s_end": None, "stepper": "rk4",
             "cfl_safety": 0.4, "eps_mc": 1e-8, "record_every": 50},
    "initial": {"r0": 1.0, "eps": 0.0, "k_radial": 1, "m_angular": 0},
    "rescale": {"c": "midpoint"},
    "output": {"out_dir": "out", "snapshot_times": []},
    "verify": {"enabled": list(V.DEFAULT_CHECKS), "slack_coeff": 1.0,
               "area_tol_floor": 1e-6, "delta_max": 0.1,
               "r2_min": 0.98, "roundness": 1e-3, "growth_factor": 1.5},
}


@dataclass
class Config:
    name: str
    grid: dict
    flow: dict
    initial: dict
    rescale: dict
    output: dict
    verify: dict

    def as_dict(self) -> dict:
        return {"name": self.name, "grid": dict(self.grid),
                "flow": dict(self.flow), "initial": dict(self.initial),
                "rescale": dict(self.rescale), "output": dict(self.output),
                "verify": dict(self.verify)}


def _merge_section(section: str, given: dict) -> dict:
    base = dict(_DEFAULTS[section])
    for key, val in given.items():
        if key not in base:
            raise ConfigError(f"unknown key [{section}] {key!r}")
        base[key] = val
    return base


def parse_config(text: str) -> Config:
    """Parse and fully validate a TOML config; unknown keys are rejected."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table of sections")
    name = raw.pop("name", _DEFAULTS["name"])
    if not isinstance(name, str):
        raise ConfigError("'name' must be a string")
    sections = {}
    for sec in ("grid", "flow", "initial", "rescale", "output", "verify"):
        given = raw.pop(sec, {})
        if not isinstance(given, dict):
            raise ConfigError(f"[{sec}] must be a table")
        sections[sec] = _merge_section(sec, given)
    if raw:
        raise ConfigError(f"unknown key(s) at top level: {sorted(raw)}")
    cfg = Config(name=name, **sections)
    _validate(cfg)
    return cfg


def _validate(cfg: Config) -> None:
    g = cfg.grid
    if g["mode"] not in (AXISYMMETRIC, FULL2D):
        raise ConfigError(f"[grid] mode must be '{AXISYMMETRIC}' or '{FULL2D}'")
    if not 0.0 < g["theta_max"] <= math.pi / 2:
        raise ConfigError("[grid] theta_max: cone not convex "
                          "(need 0 < theta_max <= pi/2)")
    if int(g["n_theta"]) < 5:
        raise ConfigError("[grid] n_theta must be >= 5")
    f = cfg.flow
    if f["alpha"] < 0.0:
        raise ConfigError("[flow] alpha must be >= 0")
    if f["t_end"] is not None and f["s_end"] is not None:
        raise ConfigError("[flow] give t_end or s_end, not both")
    if f["t_end"] is None and f["s_end"] is None:
        f["s_end"] = 10.0
    if f["stepper"] not in ("euler", "rk4"):
        raise ConfigError("[flow] stepper must be 'euler' or 'rk4'")
    if not 0.0 < f["cfl_safety"] <= 1.0:
        raise ConfigError("[flow] cfl_safety must be in (0, 1]")
    if int(f["record_every"]) < 1:
        raise ConfigError("[flow] record_every must be >= 1")
    ini = cfg.initial
    if ini["r0"] <= 0.0:
        raise ConfigError("[initial] r0 must be positive")
    c = cfg.rescale["c"]
    if not (c == "midpoint" or isinstance(c, (int, float))):
        raise ConfigError("[rescale] c must be 'midpoint' or a number")
    for chk in cfg.verify["enabled"]:
        if chk not in V.DEFAULT_CHECKS + V.SNAPSHOT_CHECKS:
            raise ConfigError(f"[verify] unknown check {chk!r}")
    times = cfg.output["snapshot_times"]
    if any(t < 0 for t in times) or sorted(times) != list(times):
        raise ConfigError("[output] snapshot_times must be sorted and >= 0")


def apply_overrides(text: str, overrides: list) -> str:
    """Apply --override key=value pairs (dotted paths) to the raw TOML text."""
    if not overrides:
        return text
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"bad override {item!r} (need key=value)")
        key, _, val = item.partition("=")
        try:
            parsed = tomllib.loads(f"v = {val}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = val.strip()
        node = raw
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a value")
        node[parts[-1]] = parsed
    return _toml_dump(raw)


# ---------------------------------------------------------------------------
# serialization helpers


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return repr(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def _toml_dump(tree: dict) -> str:
    lines = []
    for key in sorted(k for k, v in tree.items() if not isinstance(v, dict)):
        lines.append(f"{key} = {_toml_value(tree[key])}")
    for sec in sorted(k for k, v in tree.items() if isinstance(v, dict)):
        lines.append("")
        lines.append(f"[{sec}]")
        for key in sorted(tree[sec]):
            if tree[sec][key] is None:
                continue
            lines.append(f"{key} = {_toml_value(tree[sec][key])}")
    return "\n".join(lines) + "\n"


def _csv_row(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_timeseries(path: Path, traj: Trajectory) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(SAMPLE_COLUMNS) + "\n")
        for row in traj.samples:
            fh.write(_csv_row(row) + "\n")


def write_snapshot(path: Path, grid: CapGrid, tval: float, sval: float,
                   values: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(f"# n_dim = {grid.n_dim}\n")
        fh.write(f"# theta_max = {repr(float(grid.theta_max))}\n")
        fh.write(f"# mode = {grid.mode}\n")
        fh.write(f"# t = {repr(float(tval))}\n")
        fh.write(f"# s = {repr(float(sval))}\n")
        if grid.mode == AXISYMMETRIC:
            fh.write("theta,u\n")
            for th, u in zip(grid.theta, values):
                fh.write(f"{repr(float(th))},{repr(float(u))}\n")
        else:
            fh.write("theta,psi,u\n")
            for i, th in enumerate(grid.theta):
                for j, ps in enumerate(grid.psi):
                    fh.write(f"{repr(float(th))},{repr(float(ps))},"
                             f"{repr(float(values[i, j]))}\n")


def read_snapshot(path: Path):
    head = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                head[key.strip()] = val.strip()
            elif line and not line[0].isalpha():
                rows.append([float(x) for x in line.split(",")])
    return head, np.array(rows)


# ---------------------------------------------------------------------------
# orchestration


def _build_run_objects(cfg: Config):
    g = cfg.grid
    grid = build_cap_grid(n_dim=int(g["n_dim"]), theta_max=float(g["theta_max"]),
                          n_theta=int(g["n_theta"]), mode=g["mode"],
                          n_psi=int(g["n_psi"]))
    ini = cfg.initial
    u0 = make_initial_data(grid, InitialFamily(
        r0=float(ini["r0"]), eps=float(ini["eps"]),
        k_radial=int(ini["k_radial"]), m_angular=int(ini["m_angular"])))
    c = cfg.rescale["c"]
    if c == "midpoint":
        ctx = RescaleContext.midpoint(u0.values, alpha=float(cfg.flow["alpha"]),
                                      n_dim=grid.n_dim)
    else:
        ctx = RescaleContext(alpha=float(cfg.flow["alpha"]), n_dim=grid.n_dim,
                             c=float(c))
    f = cfg.flow
    params = FlowParams(alpha=float(f["alpha"]), cfl_safety=float(f["cfl_safety"]),
                        t_end=f["t_end"], s_end=f["s_end"], stepper=f["stepper"],
                        eps_mc=float(f["eps_mc"]),
                        snapshot_times=tuple(float(x) for x in
                                             cfg.output["snapshot_times"]),
                        record_every=int(f["record_every"]))
    return grid, u0, ctx, params


def _run_enabled_checks(traj: Trajectory, cfg: Config, u0: np.ndarray) -> list:
    vf = cfg.verify
    dispatch = {
        "c0": lambda: V.check_c0(traj, slack_coeff=vf["slack_coeff"]),
        "phidot": lambda: V.check_phidot(traj, slack_coeff=vf["slack_coeff"]),
        "gradient_monotone": lambda: V.check_gradient_monotone(
            traj, slack_coeff=vf["slack_coeff"]),
        "H_theta": lambda: V.check_H_theta(traj),
        "area_law": lambda: V.check_area_law(
            traj, tol_floor=vf["area_tol_floor"], slack_coeff=vf["slack_coeff"]),
        "evolution_identities": lambda: V.check_evolution_identities(
            traj, delta_max=vf["delta_max"]),
        "holder": lambda: V.check_holder_diagnostic(
            traj, growth_factor=vf["growth_factor"]),
        "gradient_decay": lambda: V.check_gradient_decay(traj, r2_min=vf["r2_min"]),
        "radius": lambda: V.check_radius(traj, u0, roundness=vf["roundness"]),
    }
    return [dispatch[name]() for name in vf["enabled"]]


def _effective_echo(cfg: Config, ctx: RescaleContext) -> str:
    tree = cfg.as_dict()
    tree["rescale"]["c"] = float(ctx.c)
    return _toml_dump(tree)


def run_experiment(cfg: Config, out_dir: Path) -> int:
    """Run the configured flow, write all artifacts, return the exit status."""
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        grid, u0, ctx, params = _build_run_objects(cfg)
    except (GridError, GeometryError, FlowError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    (out_dir / "config.echo").write_text(_effective_echo(cfg, ctx))
    termination = "completed"
    try:
        traj = run_flow(u0, grid, params, ctx=ctx)
    except FlowIncomplete as exc:
        traj = exc.trajectory
        termination = exc.termination
    write_timeseries(out_dir / "timeseries.csv", traj)
    for k, (tval, vals) in enumerate(traj.snapshots):
        sval = time_map(tval, ctx, "t_to_s")
        write_snapshot(out_dir / f"snap_{k}.csv", grid, tval, sval, vals)
    try:
        results = _run_enabled_checks(traj, cfg, u0.values)
    except (ValueError, GeometryError) as exc:
        print(f"error: verification failed to run: {exc}", file=sys.stderr)
        return 2
    report = V.build_report(
        results, constants=V.derived_constants(traj),
        meta={"name": cfg.name, "termination": termination,
              "n_theta": grid.n_theta, "mode": grid.mode,
              "alpha": params.alpha, "c": ctx.c,
              "samples": int(traj.n_samples)})
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} "
              f"margin={r.margin:.3e}")
    if termination != "completed":
        print(f"error: run terminated early: {termination}", file=sys.stderr)
        return 1
    return 0 if report.passed else 1


def verify_directory(run_dir: Path) -> int:
    """Re-run the enabled checks on a previously written run directory."""
    echo = run_dir / "config.echo"
    if not echo.exists():
        print(f"error: {echo} not found", file=sys.stderr)
        return 2
    cfg = parse_config(echo.read_text())
    grid, u0, ctx, params = _build_run_objects(cfg)
    samples = np.loadtxt(run_dir / "timeseries.csv", delimiter=",", skiprows=1,
                         ndmin=2)
    header = (run_dir / "timeseries.csv").read_text().splitlines()[0]
    if tuple(header.split(",")) != SAMPLE_COLUMNS:
        print("error: timeseries.csv columns do not match the schema",
              file=sys.stderr)
        return 2
    snapshots = []
    for k in range(len(sorted(run_dir.glob("snap_*.csv")))):
        head, rows = read_snapshot(run_dir / f"snap_{k}.csv")
        if grid.mode == AXISYMMETRIC:
            vals = rows[:, 1]
        else:
            vals = rows[:, 2].reshape(grid.n_theta, grid.n_psi)
        snapshots.append((float(head["t"]), vals))
    traj = Trajectory(params=params, grid_ref=grid, ctx=ctx, kind="physical",
                      samples=samples, snapshots=snapshots,
                      termination="completed")
    results = _run_enabled_checks(traj, cfg, u0.values)
    report = V.build_report(results, constants=V.derived_constants(traj),
                            meta={"name": cfg.name, "source": "verify"})
    (run_dir / "report.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} margin={r.margin:.3e}")
    return 0 if report.passed else 1


def convergence_study(cfg: Config, grids: list, out_dir: Path) -> int:
    """Run the experiment over several grids and tabulate observed orders."""
    if len(grids) < 3:
        print("error: need >= 3 grids", file=sys.stderr)
        return 2
    if sorted(grids) != list(grids) or len(set(grids)) != len(grids):
        print("error: grid list must be strictly increasing", file=sys.stderr)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    is_model = (cfg.initial["eps"] == 0.0
                and cfg.grid["mode"] == AXISYMMETRIC)
    rows = []
    for n_theta in grids:
        sub = Config(**cfg.as_dict())
        sub.grid = dict(cfg.grid); sub.grid["n_theta"] = int(n_theta)
        grid, u0, ctx, params = _build_run_objects(sub)
        traj = run_flow(u0, grid, params, ctx=ctx)
        # model-solution error (only defined for constant initial data)
        if is_model:
            t_end = traj.col("t")[-1]
            alpha, r0 = params.alpha, float(cfg.initial["r0"])
            if alpha > 0:
                exact = (alpha * t_end / grid.n_dim + r0 ** alpha) ** (1 / alpha)
            else:
                exact = r0 * math.exp(t_end / grid.n_dim)
            _, ufin = traj.snapshots[-1]
            err_model = float(np.max(np.abs(ufin - exact))) / exact
        else:
            err_model = math.nan
        # closed-form vs embedding-oracle mean curvature on the initial data
        if grid.n_dim == 2 and grid.mode == AXISYMMETRIC:
            geom = graph_geometry(u0, grid, params.alpha)
            orc = embedding_oracle(u0, grid)
            err_h = float(np.nanmax(np.abs(geom.mean_curv.values[:, None]
                                           - orc.mean_curv)))
        else:
            err_h = math.nan
        fp = V._centered_dfdt(traj.col("t"), traj.col("area"))
        err_area = float(np.max(np.abs(
            fp - traj.col("integral_u_minus_alpha")[1:-1])
            / traj.col("integral_u_minus_alpha")[1:-1]))
        rows.append((int(n_theta), grid.h_theta, err_model, err_h, err_area))

    def order_and_flag(col):
        out = [("", "")]
        for (na, ha, *ea), (nb, hb, *eb) in zip(rows, rows[1:]):
            e1, e2 = ea[col], eb[col]
            if not (math.isfinite(e1) and math.isfinite(e2)) or e2 <= 0:
                out.append(("", "undefined"))
                continue
            p = math.log(e1 / e2) / math.log(ha / hb)
            flag = "time-dominated" if (e1 < 1e-10 or e1 / e2 < 2 ** 0.5) else ""
            out.append((repr(float(p)), flag))
        return out

    om, oh, oa = order_and_flag(0), order_and_flag(1), order_and_flag(2)
    with open(out_dir / "orders.csv", "w") as fh:
        fh.write("n_theta,h,model_err,model_order,model_flag,"
                 "H_oracle_err,H_order,H_flag,"
                 "area_residual,area_order,area_flag\n")
        for i, (nt, h, em, ehh, ea) in enumerate(rows):
            fh.write(f"{nt},{repr(float(h))},{repr(float(em))},{om[i][0]},"
                     f"{om[i][1]},{repr(float(ehh))},{oh[i][0]},{oh[i][1]},"
                     f"{repr(float(ea))},{oa[i][0]},{oa[i][1]}\n")
    print((out_dir / "orders.csv").read_text(), end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="coneflow",
        description="Inverse-curvature flow of star-shaped caps in a convex "
                    "cone: run experiments, verify recorded runs, study "
                    "convergence.")
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config", type=Path)
    p_ver = sub.add_parser("verify", help="re-check a written run directory")
    p_ver.add_argument("run_dir", type=Path)
    p_study = sub.add_parser("study", help="convergence study over grids")
    p_study.add_argument("config", type=Path)
    p_study.add_argument("--grids", required=True,
                         help="comma-separated N_theta list, e.g. 51,101,201")
    for p in (p_run, p_study):
        p.add_argument("--out-dir", type=Path, default=None)
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE")
        p.add_argument("--seed", type=int, default=0,
                       help="reserved; runs are deterministic")
    args = parser.parse_args(argv)
    try:
        if args.verb == "verify":
            return verify_directory(args.run_dir)
        text = args.config.read_text()
        text = apply_overrides(text, args.override)
        cfg = parse_config(text)
        out_dir = args.out_dir or Path(cfg.output["out_dir"])
        if args.verb == "run":
            return run_experiment(cfg, out_dir)
        grids = [int(x) for x in args.grids.split(",") if x]
        return convergence_study(cfg, grids, out_dir)
    except (ConfigError, GridError, GeometryError, FlowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
