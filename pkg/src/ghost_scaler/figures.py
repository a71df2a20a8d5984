"""
Plot-ready data for the three figures: extinction/flight-time scaling,
phase-space curves and orbit weights.  Each runner writes CSV files plus a
JSON manifest into ``out_dir``; on failure the manifest is still written with
``status = "failed"`` before the exception propagates.
"""
from __future__ import annotations

import secrets
from pathlib import Path

import numpy as np

from . import io
from .config import ensemble_from, model_from, parse_grid
from .hamiltonian import HamiltonianSystem, phase_curves, weight_profile
from .models import critical_params
from .scaling import RegimeError, bend_location, flight_time_sweep
from .ssa import SsaRunConfig, estimate_stochastic_bifurcation, sweep_extinction_times


def resolve_seed(cfg: dict) -> int:
    """The configured seed, or a fresh one (which the caller must record)."""
    if cfg.get("seed") is None:
        cfg["seed"] = secrets.randbits(63)
    return int(cfg["seed"])


def probe_grid_for(cfg: dict, model) -> np.ndarray:
    g = parse_grid(cfg["ssa"]["probe_grid"])
    if g.size:
        return g
    eps_c = critical_params(model).eps_c
    return np.linspace(eps_c - 0.05, eps_c + 0.02, 8)


def _run(name, cfg, out_dir, body):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = resolve_seed(cfg)
    man = io.ExperimentManifest(name, cfg, seed)
    path = out / ("%s_manifest.json" % name)
    try:
        body(man, out, seed)
        man.status = "ok"
    except BaseException as exc:
        man.status = "failed"
        man.error = "%s: %s" % (type(exc).__name__, exc)
        raise
    finally:
        man.write(path)
    return man, path


def _curve_rows(curve):
    return [(f, v, s, n, curve.provenance.value, curve.model)
            for f, v, s, n in zip(curve.phi, curve.value, curve.spread, curve.n)]


def run_figure1(cfg: dict, out_dir, workers=None):
    """SSA extinction-time sweeps (top) and WKB flight-time sweeps (bottom)."""
    grid = parse_grid(cfg["figures"]["fig1_phi_grid"])
    s = cfg["ssa"]

    def body(man, out, seed):
        top, bottom = [], []
        for name in cfg["figures"]["models"]:
            model = model_from(cfg, name)
            run = SsaRunConfig(int(s["omega"]), s["x0_fraction"], float(s["t_max"]), seed, int(s["replicates"]))
            with man.stage("%s_bifurcation" % name):
                bif = estimate_stochastic_bifurcation(model, run.omega, probe_grid_for(cfg, model), run,
                                                      float(s["horizon"]), int(s["refine"]), workers)
            with man.stage("%s_ssa_sweep" % name):
                ssa_curve = sweep_extinction_times(model, run.omega, grid, run, bif, workers)
            with man.stage("%s_flight_sweep" % name):
                fl = flight_time_sweep(model, grid, ensemble_from(cfg), float(cfg["wkb"]["tol"]), workers=workers)
            top += _curve_rows(ssa_curve)
            bottom += _curve_rows(fl)
            info = {"eps_bar_s": bif.eps_bar_s, "eps_bar_s_uncertainty": bif.uncertainty,
                    "ssa_flags": ssa_curve.flags, "flight_flags": fl.flags}
            for key, c in (("ssa", ssa_curve), ("flight", fl)):
                try:
                    info[key + "_phi_bend"] = bend_location(c).phi_bend
                except RegimeError as exc:
                    info[key + "_phi_bend"] = None
                    info[key + "_bend_error"] = str(exc)
            man.results[name] = info
        man.add_output(io.write_csv(out / "fig1_top.csv", io.CURVE_COLUMNS, top))
        man.add_output(io.write_csv(out / "fig1_bottom.csv", io.CURVE_COLUMNS, bottom))

    return _run("fig1", cfg, out_dir, body)


def run_figure2(cfg: dict, out_dir, workers=None):
    """``p_H``, ``p1``, ``p2`` at ``eps_c + offset`` for each configured offset."""
    f = cfg["figures"]
    x = parse_grid(f["fig2_x_grid"])

    def body(man, out, seed):
        for name in f["models"]:
            model = model_from(cfg, name)
            eps_c = critical_params(model).eps_c
            res = []
            for i, off in enumerate(f["fig2_eps_offsets"]):
                pc = phase_curves(model, eps_c + float(off), x)
                path = io.write_csv(out / ("fig2_%s_eps%d.csv" % (name, i)), io.PHASE_COLUMNS,
                                    zip(pc.x, pc.p_H, pc.p1, pc.p2))
                man.add_output(path)
                res.append({"file": path.name, "epsilon": pc.epsilon, "x_min_H": pc.x_min_H,
                            "p_min_H": pc.p_min_H, "x_min_p": pc.x_min_p, "p_min_p": pc.p_min_p,
                            "x_F": pc.x_F, "x_0": pc.x_0})
            man.results[name] = res

    return _run("fig2", cfg, out_dir, body)


def run_figure3(cfg: dict, out_dir, workers=None):
    """Action and weight against the initial momentum, one file per ``phi``."""
    f = cfg["figures"]
    p0 = parse_grid(f["fig3_p0_grid"])
    omega = float(f["fig3_omega"])
    tol = float(cfg["wkb"]["tol"])
    x0_factor = float(cfg["ensemble"]["x0_factor"])

    def body(man, out, seed):
        for name in f["models"]:
            model = model_from(cfg, name)
            crit = critical_params(model)
            sys = HamiltonianSystem(model)
            res = []
            for i, phi in enumerate(f["fig3_phis"]):
                prof = weight_profile(sys, crit.eps_c + float(phi), omega, p0, x0_factor * crit.x_c, tol=tol)
                path = io.write_csv(out / ("fig3_%s_phi%d.csv" % (name, i)), io.WEIGHT_COLUMNS,
                                    [(w.p0, w.action, w.log_weight, w.weight) for w in prof])
                man.add_output(path)
                res.append({"file": path.name, "phi": float(phi),
                            "exit_reasons": sorted({w.exit_reason.value for w in prof})})
            man.results[name] = res

    return _run("fig3", cfg, out_dir, body)
