"""Configuration-driven command line entry point.

Subcommands mirror the run types: horizons, certify-redshift, evolve,
evolve-dirichlet, qnm, gap-scan, decay-fit, crosscheck, convergence, plus
list-scenarios.  Every run reads a flat key = value configuration (from a
file or a named preset), writes its artifacts (CSV time series, JSON-lines
records, optional raw field dumps) into the output directory, and drops a
manifest with the configuration hash.  Identical configuration and seed
give byte-identical CSV output; only the manifest carries timing.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    PRESETS,
    ConfigError,
    ScenarioConfig,
    load_config,
    preset_config,
)


def _fail(kind: str, detail: str, code: int = 1) -> int:
    sys.stderr.write(json.dumps({"error": kind, "detail": detail}) + "\n")
    return code


def _out_dir(cfg: ScenarioConfig, override: str | None) -> Path:
    out = override or os.environ.get("KDSLAB_OUT") or cfg["out_dir"] \
        or f"runs/{cfg['name']}"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, cfg: ScenarioConfig, t_wall: float) -> None:
    manifest = {
        "config_sha256": hashlib.sha256(cfg.text.encode()).hexdigest(),
        "config_path": cfg.source_path,
        "run": cfg.run,
        "name": cfg["name"],
        "seed": cfg["seed"],
        "version": __version__,
        "wall_seconds": round(t_wall, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _write_jsonl(path: Path, records) -> None:
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def _write_csv(path: Path, columns: dict) -> None:
    keys = list(columns)
    rows = zip(*(columns[key] for key in keys))
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(keys)
        for row in rows:
            writer.writerow([repr(float(val)) for val in row])


def read_series_csv(path) -> dict:
    """Read a series CSV back into float arrays keyed by column."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        cols = {key: [] for key in header}
        for row in reader:
            for key, val in zip(header, row):
                cols[key].append(float(val))
    return {key: np.array(val) for key, val in cols.items()}


def write_fields_binary(path, run) -> None:
    """Raw snapshot dump: dims, coordinates, then row-major field planes.

    Layout (little-endian): int64 n_r, int64 n_theta, int64 n_snap;
    float64 r[n_r]; float64 theta[n_theta]; float64 times[n_snap]; then per
    snapshot four row-major float64 planes (Re u, Im u, Re v, Im v).
    """
    grid = run.grid
    with open(path, "wb") as handle:
        np.array([grid.r.size, grid.theta.size, len(run.snapshots)],
                 dtype="<i8").tofile(handle)
        grid.r.astype("<f8").tofile(handle)
        grid.theta.astype("<f8").tofile(handle)
        np.asarray(run.snapshot_times, dtype="<f8").tofile(handle)
        for u, v in run.snapshots:
            for plane in (u.real, u.imag, v.real, v.imag):
                np.ascontiguousarray(plane, dtype="<f8").tofile(handle)


def read_fields_binary(path):
    """Inverse of :func:`write_fields_binary`."""
    with open(path, "rb") as handle:
        dims = np.fromfile(handle, dtype="<i8", count=3)
        n_r, n_theta, n_snap = (int(d) for d in dims)
        r = np.fromfile(handle, dtype="<f8", count=n_r)
        theta = np.fromfile(handle, dtype="<f8", count=n_theta)
        times = np.fromfile(handle, dtype="<f8", count=n_snap)
        snaps = []
        for _ in range(n_snap):
            planes = [np.fromfile(handle, dtype="<f8",
                                  count=n_r * n_theta).reshape(n_r, n_theta)
                      for _ in range(4)]
            snaps.append((planes[0] + 1j * planes[1],
                          planes[2] + 1j * planes[3]))
    return r, theta, times, snaps


# ---------------------------------------------------------------------------
# Run implementations
# ---------------------------------------------------------------------------

def _run_horizons(cfg: ScenarioConfig, out: Path) -> None:
    from .spacetime import find_horizons, resolve_extension
    params = resolve_extension(cfg.black_hole())
    hor = find_horizons(params)
    _write_jsonl(out / "geometry.jsonl", [{
        "r_minus": hor.r_minus,
        "r_plus": hor.r_plus,
        "kappa_minus": hor.kappa_minus,
        "kappa_plus": hor.kappa_plus,
        "alpha": params.alpha,
    }])


def _run_certify(cfg: ScenarioConfig, out: Path) -> None:
    from .energy import certify_redshift, redshift_field
    params = cfg.black_hole()
    x_field = redshift_field(
        params,
        sigma0=cfg["certify.sigma0"],
        slope=cfg["certify.slope"],
        zero_time_gradient=bool(cfg["certify.zero_time_gradient"]),
    )
    report = certify_redshift(params, x_field,
                              n_samples=cfg["certify.n_samples"],
                              seed=cfg["seed"], raise_on_failure=False)
    _write_jsonl(out / "certification.jsonl", [report.to_record()])
    if not report.passed:
        raise RuntimeError(f"certification failed: {report.failure} "
                           f"at {report.failure_point}")


def _evolve_common(cfg: ScenarioConfig, dirichlet: bool):
    from .solver import (
        KerrStarProvider,
        extended_grid,
        forward_solve,
        forward_solve_dirichlet,
        redshift_damping_arrays,
    )
    params = cfg.black_hole()
    source = cfg.source_spec()
    kwargs = dict(
        n_r=cfg["n_r"], n_theta=cfg["n_theta"], cfl=cfg["cfl"],
        time_shift=cfg["time_shift"], ko_eps=cfg["ko_eps"],
        snapshot_every=cfg["snapshot_every"],
        series_every_steps=cfg["series_every_steps"],
    )
    if dirichlet:
        run = forward_solve_dirichlet(params, source, cfg["t_end"],
                                      side=cfg["dirichlet_side"], **kwargs)
    else:
        damping = None
        if cfg["damping"] > 0.0:
            provider = KerrStarProvider(params, time_shift=cfg["time_shift"])
            grid = extended_grid(params, cfg["n_r"], cfg["n_theta"])
            damping = redshift_damping_arrays(params, grid,
                                              provider.transition,
                                              strength=cfg["damping"])
            run = forward_solve(params, grid, source, cfg["t_end"],
                                damping=damping, **kwargs)
        else:
            run = forward_solve(params, None, source, cfg["t_end"], **kwargs)
    run.meta["source"] = source
    run.meta["time_shift"] = cfg["time_shift"]
    return params, source, run


def _series_columns(run) -> dict:
    cols = {"t": run.times}
    cols.update(run.series)
    return cols


def _run_evolve(cfg: ScenarioConfig, out: Path) -> None:
    from .diagnostics import decay_fit, pi0
    params, source, run = _evolve_common(cfg, dirichlet=False)
    _write_csv(out / "series.csv", _series_columns(run))
    if cfg["write_fields"]:
        write_fields_binary(out / "fields.bin", run)
    u_final = run.snapshots[-1][0]
    report = {
        "final_time": float(run.snapshot_times[-1]),
        "final_sup": float(np.abs(u_final).max()),
        "final_l2": float(run.series["l2"][-1]),
    }
    if source.m == 0:
        limit = pi0(params, source)
        report["pi0"] = limit
        if limit != 0.0:
            report["pi0_rel_deviation"] = float(
                np.abs(u_final - limit).max() / abs(limit))
    try:
        fit = decay_fit(run.times, run.series["l2_core"],
                        t_min=source.t_off + 10.0)
        report["tail_fit"] = fit.to_record()
    except Exception:
        pass
    (out / "report.json").write_text(json.dumps(report, indent=2,
                                                sort_keys=True) + "\n")


def _run_evolve_dirichlet(cfg: ScenarioConfig, out: Path) -> None:
    from .diagnostics import decay_fit
    from .energy import redshift_field
    from .solver import KerrStarProvider, ModeSolver, radial_flux

    params, source, run = _evolve_common(cfg, dirichlet=True)
    _write_csv(out / "series.csv", _series_columns(run))

    provider = KerrStarProvider(params, time_shift=cfg["time_shift"])
    wall = 0 if cfg["dirichlet_side"] == "outer" else -1
    orientation = -1.0 if cfg["dirichlet_side"] == "outer" else 1.0
    solver = ModeSolver(provider, run.grid, run.m)
    x_geo = redshift_field(params)
    xv = x_geo.eval(run.grid.r[:, None], run.grid.theta[None, :]) \
        * np.ones(run.grid.shape + (1,))
    q0 = provider.transition.time_shift
    s_prof = provider.transition.switch(run.grid.r)[:, None] \
        * np.ones(run.grid.shape)
    x_solver = np.zeros(run.grid.shape + (4,))
    x_solver[..., 0] = xv[..., 0] + q0 * s_prof * xv[..., 1]
    x_solver[..., 1] = xv[..., 1]
    flux = [radial_flux(solver, u, v, wall, x_solver, orientation=orientation)
            for u, v in run.snapshots]
    _write_csv(out / "wall_flux.csv",
               {"t": run.snapshot_times, "flux": np.array(flux)})

    t_min = cfg["fit.t_min"]
    if t_min is None:
        t_min = source.t_off + 4.0
    fit = decay_fit(run.times, run.series["l2"], t_min=t_min)
    report = {
        "nu1_fit": fit.nu,
        "fit": fit.to_record(),
        "wall_flux_min": float(np.min(flux)),
        "wall_flux_nonnegative": bool(np.min(flux) >= -1e-10 * max(
            1.0, float(np.max(np.abs(flux))))),
    }
    (out / "report.json").write_text(json.dumps(report, indent=2,
                                                sort_keys=True) + "\n")


def _run_qnm(cfg: ScenarioConfig, out: Path) -> None:
    from .spectral import qnm_mode
    params = cfg.black_hole()
    guess = complex(cfg["qnm.guess_re"], cfg["qnm.guess_im"])
    mode = qnm_mode(params, cfg["qnm.l"], cfg["qnm.m"], guess)
    _write_csv(out / "modes.csv", {
        "m": [mode.m], "l": [mode.l],
        "re_omega": [mode.omega.real], "im_omega": [mode.omega.imag],
        "lam_re": [mode.lam.real], "lam_im": [mode.lam.imag],
        "residual": [mode.residual],
    })


def _run_gap_scan(cfg: ScenarioConfig, out: Path) -> None:
    from .spectral import spectral_gap_scan
    params = cfg.black_hole()
    box = tuple(cfg["scan.box"])
    report = spectral_gap_scan(params, m_max=cfg["scan.m_max"],
                               l_max=cfg["scan.l_max"], box=box)
    modes = sorted(report.modes, key=lambda mo: (-mo.omega.imag, mo.omega.real))
    _write_csv(out / "modes.csv", {
        "m": [mo.m for mo in modes],
        "l": [mo.l for mo in modes],
        "re_omega": [mo.omega.real for mo in modes],
        "im_omega": [mo.omega.imag for mo in modes],
        "lam_re": [mo.lam.real for mo in modes],
        "lam_im": [mo.lam.imag for mo in modes],
        "residual": [mo.residual for mo in modes],
    })
    _write_jsonl(out / "scan_cells.jsonl", report.to_records())
    (out / "report.json").write_text(json.dumps({
        "nu_empirical": report.nu_empirical,
        "zero_mode_found": report.zero_mode_found,
        "n_modes": len(report.modes),
        "box": list(report.box),
    }, indent=2, sort_keys=True) + "\n")


def _run_decay_fit(cfg: ScenarioConfig, out: Path) -> None:
    from .diagnostics import decay_fit
    series = read_series_csv(cfg["fit.input"])
    col = cfg["fit.column"]
    if col not in series:
        raise ConfigError(f"key 'fit.column': column {col!r} not in "
                          f"{cfg['fit.input']}")
    fit = decay_fit(series["t"], series[col], c=cfg["fit.c"],
                    t_min=cfg["fit.t_min"], t_max=cfg["fit.t_max"])
    _write_jsonl(out / "fit.jsonl", [fit.to_record()])


def _run_crosscheck(cfg: ScenarioConfig, out: Path) -> None:
    from .diagnostics import decay_fit
    from .spectral import qnm_mode
    params, source, run = _evolve_common(cfg, dirichlet=False)
    _write_csv(out / "series.csv", _series_columns(run))
    fit = decay_fit(run.times, run.series["probe_re"],
                    t_min=cfg["crosscheck.fit_t_min"],
                    t_max=cfg["t_end"] - 2.0)
    guess = complex(cfg["qnm.guess_re"], cfg["qnm.guess_im"])
    mode = qnm_mode(params, cfg["qnm.l"], cfg["qnm.m"], guess)
    _write_csv(out / "modes.csv", {
        "m": [mode.m], "l": [mode.l],
        "re_omega": [mode.omega.real], "im_omega": [mode.omega.imag],
        "lam_re": [mode.lam.real], "lam_im": [mode.lam.imag],
        "residual": [mode.residual],
    })
    rel = abs(fit.nu - (-mode.omega.imag)) / abs(mode.omega.imag)
    report = {
        "nu_fit": fit.nu,
        "fit": fit.to_record(),
        "qnm_re": mode.omega.real,
        "qnm_im": mode.omega.imag,
        "minus_im_omega": -mode.omega.imag,
        "rel_difference": rel,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2,
                                                sort_keys=True) + "\n")


def _minkowski_scenario(n: int) -> dict:
    """Standing-wave energy drift and final-field error at resolution n."""
    from .solver import Grid2D, MinkowskiProvider, ModeSolver, WaveState, evolve
    grid = Grid2D.build(0.0, 2.0, n, 16, periodic_r=True)
    solver = ModeSolver(MinkowskiProvider(), grid, 0, cfl=0.2)
    k_wave = 3.0 * math.pi
    u0 = (np.cos(k_wave * grid.r)[:, None]
          * np.ones((1, grid.theta.size))).astype(complex)
    state = WaveState(m=0, u=u0, v=np.zeros_like(u0), t=0.0)
    period = 2.0 * math.pi / k_wave
    run = evolve(solver, 3 * period, initial=state, snapshot_every=10.0,
                 series_every_steps=4)
    u_exact = (np.cos(k_wave * grid.r) * math.cos(k_wave * run.times[-1]))[:, None]
    err = float(np.abs(run.snapshots[-1][0] - u_exact).max())
    drift = abs(run.series["energy_t"][-1] - run.series["energy_t"][0])
    return {"field_error": err, "energy_drift": drift}


def _sds_scenario_factory(cfg: ScenarioConfig):
    from .diagnostics import decay_fit
    from .solver import forward_solve

    def scenario(n: int) -> dict:
        params = cfg.black_hole()
        source = cfg.source_spec()
        run = forward_solve(params, None, source, cfg["t_end"], n_r=n,
                            n_theta=cfg["n_theta"], cfl=cfg["cfl"],
                            time_shift=cfg["time_shift"],
                            ko_eps=cfg["ko_eps"])
        fit = decay_fit(run.times, run.series["l2_core"],
                        t_min=source.t_off + 10.0)
        return {"final_l2": float(run.series["l2"][-1]), "nu_fit": fit.nu}

    return scenario


def _run_convergence(cfg: ScenarioConfig, out: Path) -> None:
    from .diagnostics import convergence_runner
    if cfg["conv.scenario"] == "minkowski":
        scenario = _minkowski_scenario
        expected = {"field_error": cfg["conv.expected_order"]}
    elif cfg["conv.scenario"] == "sds":
        scenario = _sds_scenario_factory(cfg)
        expected = {"final_l2": cfg["conv.expected_order"]}
    else:
        raise ConfigError(
            f"key 'conv.scenario': unknown scenario {cfg['conv.scenario']!r}")
    resolutions = cfg["conv.resolutions"]
    if cfg["workers"] > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            results = list(pool.map(scenario, resolutions))
        cache = dict(zip(resolutions, results))
        report = convergence_runner(lambda n: cache[n], resolutions, expected,
                                    order_tol=cfg["conv.order_tol"])
    else:
        report = convergence_runner(scenario, resolutions, expected,
                                    order_tol=cfg["conv.order_tol"])
    (out / "convergence.json").write_text(
        json.dumps(report.to_record(), indent=2, sort_keys=True) + "\n")
    if not report.passed:
        raise RuntimeError("convergence targets missed: "
                           + "; ".join(report.failures))


_RUNNERS = {
    "horizons": _run_horizons,
    "certify-redshift": _run_certify,
    "evolve": _run_evolve,
    "evolve-dirichlet": _run_evolve_dirichlet,
    "qnm": _run_qnm,
    "gap-scan": _run_gap_scan,
    "decay-fit": _run_decay_fit,
    "crosscheck": _run_crosscheck,
    "convergence": _run_convergence,
}


def run(cfg: ScenarioConfig, out_override: str | None = None) -> int:
    """Execute a validated scenario; returns a process exit status."""
    if cfg.run not in _RUNNERS:
        return _fail("config", f"unknown run type {cfg.run}", 2)
    out = _out_dir(cfg, out_override)
    t0 = time.perf_counter()
    try:
        _RUNNERS[cfg.run](cfg, out)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - single-line machine record
        return _fail(type(exc).__name__, str(exc), 1)
    _write_manifest(out, cfg, time.perf_counter() - t0)
    return 0


def list_scenarios() -> list[str]:
    """Names of the shipped scenario presets."""
    return sorted(PRESETS)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kdslab",
        description="Numerical laboratory for waves on Kerr-de Sitter spacetimes",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        cmd = sub.add_parser(name, help=f"run a {name} scenario")
        group = cmd.add_mutually_exclusive_group(required=True)
        group.add_argument("--config", help="path to a key = value scenario file")
        group.add_argument("--preset", help="name of a shipped preset")
        cmd.add_argument("--out", help="output directory (overrides config)")
    sub.add_parser("list-scenarios", help="list shipped presets")

    args = parser.parse_args(argv)
    if args.command == "list-scenarios":
        for name in list_scenarios():
            cfg = preset_config(name)
            print(f"{name}: run={cfg.run}")
        return 0
    try:
        cfg = load_config(args.config) if args.config \
            else preset_config(args.preset)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    except OSError as exc:
        return _fail("io", str(exc), 2)
    if cfg.run != args.command:
        return _fail(
            "config",
            f"config declares run = {cfg.run} but subcommand is {args.command}",
            2)
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
