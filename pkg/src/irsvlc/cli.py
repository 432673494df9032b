"""Batch front-end: single optimizations, parameter sweeps, and BER runs.

Configs are TOML (JSON accepted) with lengths in meters and angles in
degrees; outputs are RFC-4180 CSV files with 17-significant-digit floats.
Every output row carries the SHA-256 hash of the resolved configuration so
results remain traceable to their inputs.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .association import distance_greedy, random_assignment, save_assignment, to_v
from .baselines import mmse_precoding_baseline, no_irs_design, zf_precoding_baseline
from .channel import assemble_h, build_channels
from .montecarlo import PamConfig, condition_number, simulate_link
from .objective import PowerBudget, SignalStats, mse as design_mse
from .scene import OpticalParams, SceneConfig, build_scene
from .solver import SolverOptions, alternating_optimize, write_summary_json

__all__ = ["ExperimentConfig", "load_config", "run_optimize", "run_sweep", "run_ber", "main"]

SCHEMES = ("proposed", "greedy", "random", "no_irs", "zf", "mmse")
SNR_REFERENCE = 1e-13  # SNR axis definition: snr = SNR_REFERENCE * sigma_x2 / sigma_w2


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description plus its traceability hash."""

    scene: SceneConfig
    stats: SignalStats
    p_total: float
    dc_bias: float
    opts: SolverOptions
    schemes: list
    seed: int
    random_trials: int
    sweep_axis: str | None
    sweep_values: list
    sweep_with_ber: bool
    ber_trials: int
    ber_snr_db: list
    config_hash: str


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def load_config(path) -> ExperimentConfig:
    """Read and validate a TOML or JSON experiment config."""
    with open(path, "rb") as fh:
        if str(path).endswith(".json"):
            raw = json.load(fh)
        else:
            raw = tomllib.load(fh)

    sc = raw["scene"]
    op = sc["optics"]
    optics = OpticalParams(
        pd_area=float(op["pd_area"]),
        lambertian_index=float(op["lambertian_index"]),
        filter_gain=float(op["filter_gain"]),
        refractive_index=float(op["refractive_index"]),
        fov_semi_angle=math.radians(float(op["fov_semi_angle_deg"])),
        irs_reflectivity=float(op["irs_reflectivity"]),
    )
    scene_cfg = SceneConfig(
        room=tuple(float(v) for v in sc["room"]),
        led_grid=tuple(int(v) for v in sc["led_grid"]),
        n_leds=int(sc["n_leds"]),
        pd_center=tuple(float(v) for v in sc["pd_center"]),
        pd_grid=tuple(int(v) for v in sc["pd_grid"]),
        pd_spacing=float(sc["pd_spacing"]),
        n_pds=int(sc["n_pds"]),
        irs_rect=(tuple(float(v) for v in sc["irs_rect"][0]), tuple(float(v) for v in sc["irs_rect"][1])),
        irs_grid=tuple(int(v) for v in sc["irs_grid"]),
        n_irs=int(sc["n_irs"]),
        optics=optics,
    )

    sig = raw.get("signal", {})
    stats = SignalStats(
        sigma_x2=float(sig.get("sigma_x2", 1.0)),
        sigma_w2=float(sig.get("sigma_w2", 1e-14)),
        n_s=int(sig.get("n_streams", 4)),
        m_pam=int(sig.get("pam_order", 4)),
        pam_normalizer=str(sig.get("pam_normalizer", "exact")),
    )

    pw = raw.get("power", {})
    p_total = float(pw.get("total", 160.0))
    dc_bias = float(pw.get("dc_bias", 1.0))

    so = raw.get("solver", {})
    opts = SolverOptions(
        epsilon=float(so.get("epsilon", 1e-6)),
        outer_cap=int(so.get("outer_cap", 500)),
        inner_cap=int(so.get("inner_cap", 5000)),
        polish_rounding=bool(so.get("polish", True)),
    )

    run = raw.get("run", {})
    schemes = list(run.get("schemes", ["proposed", "no_irs"]))
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
    if not schemes:
        raise ValueError("at least one scheme must be requested")

    sweep = raw.get("sweep", {})
    sweep_axis = sweep.get("axis")
    sweep_values = list(sweep.get("values", []))

    ber = raw.get("ber", {})

    resolved = {
        "scene": sc,
        "signal": sig,
        "power": pw,
        "solver": so,
        "run": run,
        "sweep": sweep,
        "ber": ber,
    }
    digest = hashlib.sha256(json.dumps(resolved, sort_keys=True, default=str).encode()).hexdigest()

    return ExperimentConfig(
        scene=scene_cfg,
        stats=stats,
        p_total=p_total,
        dc_bias=dc_bias,
        opts=opts,
        schemes=schemes,
        seed=int(run.get("seed", 0)),
        random_trials=int(run.get("random_trials", 50)),
        sweep_axis=sweep_axis,
        sweep_values=sweep_values,
        sweep_with_ber=bool(sweep.get("with_ber", False)),
        ber_trials=int(ber.get("trials", 100000)),
        ber_snr_db=list(ber.get("snr_db", [])),
        config_hash=digest,
    )


def _noise_for_snr_db(sigma_x2, snr_db):
    return SNR_REFERENCE * sigma_x2 / (10.0 ** (snr_db / 10.0))


def _budget_for(cfg: ExperimentConfig, r0=None):
    r0 = cfg.dc_bias if r0 is None else r0
    return PowerBudget.uniform_bias(cfg.p_total, r0, cfg.scene.n_leds)


def _grid_for_count(n, rect):
    """Divisor pair for n units whose cells are closest to square."""
    (x0, y0, z0), (x1, y1, z1) = rect
    width = max(abs(x1 - x0), abs(y1 - y0))
    height = abs(z1 - z0)
    best = None
    for a in range(1, n + 1):
        if n % a:
            continue
        b = n // a
        cell_ratio = (width / a) / (height / b)
        score = abs(math.log(cell_ratio))
        if best is None or score < best[0]:
            best = (score, (a, b))
    return best[1]


@dataclass
class SchemeResult:
    scheme: str
    mse: float
    converged: bool
    design: object
    assignment: object
    h: np.ndarray
    report: object


def execute_scheme(scheme, scene, chans, stats, budget, opts, seed, random_trials):
    """Run one scheme on a prepared scene/channel pair."""
    if scheme == "proposed":
        rep = alternating_optimize(scene, chans, stats, budget, opts)
        h = assemble_h(chans, to_v(rep.final_assignment))
        return SchemeResult(scheme, rep.binary_mse, rep.converged, rep.final_design, rep.final_assignment, h, rep)
    if scheme == "greedy":
        a = distance_greedy(scene)
        rep = alternating_optimize(scene, chans, stats, budget, opts, assignment0=a, optimize_assignment=False)
        h = assemble_h(chans, to_v(a))
        return SchemeResult(scheme, rep.binary_mse, rep.converged, rep.final_design, a, h, rep)
    if scheme == "random":
        mses = []
        first = None
        ok = True
        for i in range(max(random_trials, 1)):
            a = random_assignment(scene, seed + i)
            rep = alternating_optimize(scene, chans, stats, budget, opts, assignment0=a, optimize_assignment=False)
            mses.append(rep.binary_mse)
            ok = ok and rep.converged
            if first is None:
                first = (rep, a, assemble_h(chans, to_v(a)))
        rep, a, h = first
        return SchemeResult(scheme, float(np.mean(mses)), ok, rep.final_design, a, h, rep)
    if scheme == "no_irs":
        rep = no_irs_design(chans, stats, budget, opts)
        return SchemeResult(scheme, rep.binary_mse, rep.converged, rep.final_design, None, chans.h1.copy(), rep)
    if scheme in ("zf", "mmse"):
        # fixed distance-greedy reflector configuration under a one-shot precoder
        a = distance_greedy(scene)
        h = assemble_h(chans, to_v(a))
        maker = zf_precoding_baseline if scheme == "zf" else mmse_precoding_baseline
        design = maker(h, stats, budget)
        return SchemeResult(scheme, design_mse(h, design, stats), True, design, a, h, None)
    raise ValueError(f"unknown scheme {scheme!r}")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def run_optimize(cfg: ExperimentConfig, out_dir, seed=None, threads=1):
    """One optimization per requested scheme; writes trace, summary, assignments."""
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    scene = build_scene(cfg.scene)
    chans = build_channels(scene)
    budget = _budget_for(cfg)

    results = [
        execute_scheme(s, scene, chans, cfg.stats, budget, cfg.opts, seed, cfg.random_trials)
        for s in cfg.schemes
    ]

    trace_rows = []
    summary_rows = []
    assign_rows = []
    for res in results:
        if res.report is not None:
            for i, m in enumerate(res.report.mse_trace):
                trace_rows.append([res.scheme, i, m, cfg.config_hash])
        else:
            trace_rows.append([res.scheme, 0, res.mse, cfg.config_hash])
        rep = res.report
        summary_rows.append([
            res.scheme,
            res.mse,
            rep.relaxed_mse if rep is not None else res.mse,
            int(res.converged),
            rep.outer_iterations if rep is not None else 0,
            rep.power_residual if rep is not None else 0.0,
            rep.headroom_residual if rep is not None else 0.0,
            condition_number(res.h),
            condition_number(chans.h1),
            seed,
            cfg.config_hash,
        ])
        if res.assignment is not None:
            for n in range(res.assignment.n_units):
                led = int(np.argmax(res.assignment.g[n])) + 1 if res.assignment.g[n].any() else 0
                pd = int(np.argmax(res.assignment.f[n])) + 1 if res.assignment.f[n].any() else 0
                assign_rows.append([res.scheme, n + 1, led, pd, cfg.config_hash])

    _write_csv(os.path.join(out_dir, "trace.csv"), ["scheme", "iteration", "mse", "config_hash"], trace_rows)
    _write_csv(
        os.path.join(out_dir, "summary.csv"),
        [
            "scheme", "mse", "relaxed_mse", "converged", "outer_iterations",
            "power_residual_watt", "headroom_residual_amp", "condition_number",
            "condition_number_direct", "seed", "config_hash",
        ],
        summary_rows,
    )
    _write_csv(
        os.path.join(out_dir, "assignment.csv"),
        ["scheme", "unit", "led", "pd", "config_hash"],
        assign_rows,
    )
    for res in results:
        if res.report is not None:
            write_summary_json(res.report, os.path.join(out_dir, f"report_{res.scheme}.json"))
    return results


def _sweep_point(cfg, axis, value, seed):
    """Scene/stats/budget for one sweep point."""
    scene_cfg = cfg.scene
    stats = cfg.stats
    budget_r0 = cfg.dc_bias
    if axis == "snr":
        stats = replace(stats, sigma_w2=_noise_for_snr_db(stats.sigma_x2, float(value)))
    elif axis == "irs_count":
        n = int(value)
        grid = _grid_for_count(n, scene_cfg.irs_rect) if n > 0 else (0, 0)
        scene_cfg = replace(scene_cfg, n_irs=n, irs_grid=grid)
    elif axis == "dc_bias":
        budget_r0 = float(value)
    elif axis == "position_grid":
        x, y = float(value[0]), float(value[1])
        scene_cfg = replace(scene_cfg, pd_center=(x, y, scene_cfg.pd_center[2]))
    else:
        raise ValueError(f"unknown sweep axis {axis!r}")
    scene = build_scene(scene_cfg)
    chans = build_channels(scene)
    budget = PowerBudget.uniform_bias(cfg.p_total, budget_r0, scene_cfg.n_leds)
    return scene, chans, stats, budget


def run_sweep(cfg: ExperimentConfig, out_dir, seed=None, threads=1):
    """One row per (axis value, scheme) with MSE and channel condition number."""
    if not cfg.sweep_axis:
        raise ValueError("config declares no sweep axis")
    if not cfg.sweep_values:
        raise ValueError("sweep values must be non-empty")
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    axis = cfg.sweep_axis

    def point_task(value):
        scene, chans, stats, budget = _sweep_point(cfg, axis, value, seed)
        out = []
        for scheme in cfg.schemes:
            res = execute_scheme(scheme, scene, chans, stats, budget, cfg.opts, seed, cfg.random_trials)
            row = {
                "value": value,
                "scheme": scheme,
                "mse": res.mse,
                "cond": condition_number(res.h),
                "converged": res.converged,
            }
            if cfg.sweep_with_ber:
                est = simulate_link(res.design, res.h, PamConfig.from_stats(stats), stats, cfg.ber_trials, seed)
                row["ber"] = est.ber
                row["ci95"] = est.ci95_halfwidth
            out.append(row)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            grouped = list(pool.map(point_task, cfg.sweep_values))
    else:
        grouped = [point_task(v) for v in cfg.sweep_values]

    if axis == "position_grid":
        lead_cols = ["x_m", "y_m"]
        lead = lambda r: [r["value"][0], r["value"][1]]
    else:
        unit = {"snr": "snr_db", "irs_count": "irs_units", "dc_bias": "dc_bias_amp"}[axis]
        lead_cols = [unit]
        lead = lambda r: [r["value"]]
    ber_cols = ["ber", "ci95"] if cfg.sweep_with_ber else []
    header = lead_cols + ["scheme", "mse", "condition_number", "converged"] + ber_cols + ["config_hash"]
    rows = []
    for group in grouped:
        for r in group:
            extra = [r["ber"], r["ci95"]] if cfg.sweep_with_ber else []
            rows.append(lead(r) + [r["scheme"], r["mse"], r["cond"], int(r["converged"])] + extra + [cfg.config_hash])

    _write_csv(os.path.join(out_dir, f"sweep_{axis}.csv"), header, rows)
    all_converged = all(r["converged"] for group in grouped for r in group)
    return rows, all_converged


def run_ber(cfg: ExperimentConfig, out_dir, seed=None, threads=1):
    """BER versus SNR for each scheme, with binomial confidence intervals."""
    if cfg.ber_trials < 1:
        raise ValueError("BER runs need at least one trial")
    if not cfg.ber_snr_db:
        raise ValueError("BER runs need a non-empty snr_db list")
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    scene = build_scene(cfg.scene)
    chans = build_channels(scene)
    budget = _budget_for(cfg)

    def point_task(snr_db):
        stats = replace(cfg.stats, sigma_w2=_noise_for_snr_db(cfg.stats.sigma_x2, float(snr_db)))
        pam = PamConfig.from_stats(stats)
        out = []
        for scheme in cfg.schemes:
            res = execute_scheme(scheme, scene, chans, stats, budget, cfg.opts, seed, cfg.random_trials)
            est = simulate_link(res.design, res.h, pam, stats, cfg.ber_trials, seed)
            out.append([snr_db, scheme, est.ber, est.ci95_halfwidth, est.trials, seed, cfg.config_hash,
                        res.converged])
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            grouped = list(pool.map(point_task, cfg.ber_snr_db))
    else:
        grouped = [point_task(v) for v in cfg.ber_snr_db]

    rows = [row[:-1] for group in grouped for row in group]
    all_converged = all(row[-1] for group in grouped for row in group)
    _write_csv(
        os.path.join(out_dir, "ber.csv"),
        ["snr_db", "scheme", "ber", "ci95", "trials", "seed", "config_hash"],
        rows,
    )
    return rows, all_converged


def main(argv=None):
    parser = argparse.ArgumentParser(prog="irsvlc", description="Reflector-aided MIMO VLC experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("optimize", "run each scheme once and write trace/summary/assignment CSVs"),
        ("sweep", "run the configured parameter sweep"),
        ("ber", "run the configured BER-versus-SNR simulation"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="TOML or JSON experiment config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--strict", action="store_true", help="exit nonzero if any scheme fails to converge")
        p.add_argument("--threads", type=int, default=1, help="parallel sweep points / trial partitions")
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    if args.command == "optimize":
        results = run_optimize(cfg, args.out, seed=args.seed, threads=args.threads)
        ok = all(r.converged for r in results)
    elif args.command == "sweep":
        _, ok = run_sweep(cfg, args.out, seed=args.seed, threads=args.threads)
    else:
        _, ok = run_ber(cfg, args.out, seed=args.seed, threads=args.threads)
    if args.strict and not ok:
        print("warning: at least one scheme did not converge", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
