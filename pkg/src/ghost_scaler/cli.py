"""
Command-line entry point: ``ghost-scaler <group> <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.  The
worker count comes from ``--threads``, else ``GHOST_SCALER_THREADS``, else
the number of CPUs.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, io
from .config import ConfigError, ensemble_from, load, model_from, parse_grid
from .figures import probe_grid_for, resolve_seed, run_figure1, run_figure2, run_figure3
from .hamiltonian import (HamiltonianSystem, NoTransit, StopSpec, default_window, integrate_orbit,
                          phase_curves, weight_profile)
from .models import DomainError, NoSaddleNodeError, critical_params
from .parallel import resolve_workers
from .scaling import (OverlapError, PoleError, RegimeError, WindowError, InitialConditionEnsemble,
                      appendix_roots, bend_location, collapse_fit, fit_loglog_slope, flight_time_sweep)
from .ssa import (BracketError, PopulationExplosion, SsaRunConfig, estimate_stochastic_bifurcation,
                  mean_extinction_time, sweep_extinction_times)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (PopulationExplosion, BracketError, NoTransit, RegimeError, WindowError, OverlapError,
                  PoleError, DomainError, NoSaddleNodeError, FloatingPointError, ArithmeticError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, "%s: error: %s\n" % (self.prog, message))


def _common(p, model=True):
    p.add_argument("--config", help="TOML or JSON run configuration")
    p.add_argument("--seed", type=int, help="reproducibility seed (recorded in the manifest)")
    p.add_argument("--threads", type=int, help="worker threads")
    if model:
        p.add_argument("--model", help="hill or autocatalytic")
        p.add_argument("--k", type=float)
        p.add_argument("--A", type=float)
        p.add_argument("--C", type=float)
        p.add_argument("--epsilon", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ghost-scaler", description=__doc__.strip().splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    groups = ap.add_subparsers(dest="group", required=True, parser_class=_Parser)

    g = groups.add_parser("models", help="bundled models and their critical parameters")
    sub = g.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sub.add_parser("list")
    p = sub.add_parser("show")
    _common(p)

    g = groups.add_parser("ssa", help="Gillespie simulations")
    sub = g.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sub.add_parser("sweep", help="mean extinction time over phi_s")
    _common(p)
    p.add_argument("--omega", type=int)
    p.add_argument("--phi-grid")
    p.add_argument("--replicates", type=int)
    p.add_argument("--t-max", type=float)
    p.add_argument("--horizon", type=float, help="extinction horizon defining eps_bar_s")
    p.add_argument("--probe-grid", help="epsilon probes for eps_bar_s")
    p.add_argument("--eps-bar", type=float, help="use this eps_bar_s instead of estimating it")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--out", required=True)
    p = sub.add_parser("bifurcation", help="estimate eps_bar_s")
    _common(p)
    p.add_argument("--omega", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--probe-grid")
    p.add_argument("--refine", type=int)
    p.add_argument("--out")
    p = sub.add_parser("mean", help="extinction-time statistics at one epsilon")
    _common(p)
    p.add_argument("--omega", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--t-max", type=float)
    p.add_argument("--x0-fraction", type=float)
    p.add_argument("--out")

    g = groups.add_parser("wkb", help="Hamiltonian orbits, phase curves and weights")
    sub = g.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sub.add_parser("orbit")
    _common(p)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--x0", type=float)
    p.add_argument("--p0", type=float, default=0.0)
    p.add_argument("--tol", type=float)
    p.add_argument("--x-exit", type=float)
    p.add_argument("--t-cap", type=float, default=1e9)
    p.add_argument("--out", required=True)
    p = sub.add_parser("curves")
    _common(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--x-grid", default="0.005:3:600")
    p.add_argument("--out", required=True)
    p = sub.add_parser("weights")
    _common(p)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--omega", type=float, default=1000.0)
    p.add_argument("--p0-grid", default="-0.08:0.08:81")
    p.add_argument("--x0", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", required=True)

    g = groups.add_parser("scaling", help="flight-time sweeps and fits")
    sub = g.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sub.add_parser("flight")
    _common(p)
    p.add_argument("--phi-grid", required=True)
    p.add_argument("--ensemble", default="default",
                   help="'default' (negative-p grid), 'zero', or a comma list of p0 values")
    p.add_argument("--tol", type=float)
    p.add_argument("--out", required=True)
    p = sub.add_parser("fit")
    _common(p, model=False)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--window")
    p.add_argument("--curve-model", help="model to select from a multi-model CSV")
    p.add_argument("--out")
    p = sub.add_parser("bend")
    _common(p, model=False)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--curve-model")
    p.add_argument("--out")
    p = sub.add_parser("collapse")
    _common(p, model=False)
    p.add_argument("--in", dest="inp", nargs="+", required=True)
    p.add_argument("--omegas", type=float, nargs="+",
                   help="system size of each input (default: read from its manifest)")
    p.add_argument("--a-range", default="-1:1")
    p.add_argument("--b-range", default="-1:1")
    p.add_argument("--out")
    p = sub.add_parser("roots")
    p.add_argument("--phi", type=float, required=True)

    g = groups.add_parser("figures", help="plot-ready data for the three figures")
    g.add_argument("which", choices=["fig1", "fig2", "fig3", "all"])
    _common(g, model=False)
    g.add_argument("--out-dir", required=True)
    g.add_argument("--paper-scale", action="store_true")
    return ap


# ---------------------------------------------------------------------------

def _config(args, paper_scale=False) -> dict:
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        over["threads"] = args.threads
    m = {}
    for key in ("model", "k", "A", "C", "epsilon"):
        v = getattr(args, key, None)
        if v is not None:
            m["name" if key == "model" else key] = v
    if m:
        over["model"] = m
    s = {}
    for attr, key in (("omega", "omega"), ("replicates", "replicates"), ("t_max", "t_max"),
                      ("horizon", "horizon"), ("probe_grid", "probe_grid"), ("refine", "refine"),
                      ("phi_grid", "phi_grid"), ("x0_fraction", "x0_fraction")):
        v = getattr(args, attr, None)
        if v is not None and args.group == "ssa":
            s[key] = v
    if s:
        over["ssa"] = s
    if getattr(args, "tol", None) is not None:
        over["wkb"] = {"tol": args.tol}
    return load(getattr(args, "config", None), over, paper_scale)


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=io._jsonable)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    print(text)


def _range(text):
    a, b = text.split(":")
    return float(a), float(b)


def _workers(cfg):
    return resolve_workers(cfg.get("threads"))


def _manifest(command, cfg, seed=None):
    return io.ExperimentManifest(command, cfg, seed)


def cmd_models(args):
    if args.cmd == "list":
        for name in ("hill", "autocatalytic"):
            print(name)
        return
    cfg = _config(args)
    model = model_from(cfg)
    crit = critical_params(model)
    _emit({"model": model.name, "params": model.params, "steps": model.steps.tolist(),
           "reactions": [r.label for r in model.reactions], "critical": asdict(crit)})


def cmd_ssa(args):
    cfg = _config(args, getattr(args, "paper_scale", False))
    seed = resolve_seed(cfg)
    s = cfg["ssa"]
    model = model_from(cfg)
    run = SsaRunConfig(int(s["omega"]), s["x0_fraction"], float(s["t_max"]), seed, int(s["replicates"]))
    workers = _workers(cfg)
    if args.cmd == "mean":
        man = _manifest("ssa mean", cfg, seed)
        with man.stage("mean"):
            st = mean_extinction_time(model, run, workers)
        res = {"epsilon": model.epsilon, "omega": run.omega, "mean": st.mean, "sem": st.sem,
               "n": st.n, "n_censored": st.n_censored, "degenerate": st.degenerate, "unusable": st.unusable}
        man.results = res
        man.status = "ok"
        if args.out:
            man.write(io.manifest_path_for(args.out))
        _emit(res, args.out)
        return
    if args.cmd == "bifurcation":
        man = _manifest("ssa bifurcation", cfg, seed)
        with man.stage("bifurcation"):
            bif = estimate_stochastic_bifurcation(model, run.omega, probe_grid_for(cfg, model), run,
                                                  float(s["horizon"]), int(s["refine"]), workers)
        res = {"eps_bar_s": bif.eps_bar_s, "uncertainty": bif.uncertainty, "horizon": bif.horizon,
               "omega": bif.omega, "probe_eps": bif.probe_eps, "extinct_fraction": bif.extinct_fraction,
               "smoothed_fraction": bif.smoothed_fraction}
        man.results = res
        man.status = "ok"
        if args.out:
            man.write(io.manifest_path_for(args.out))
        _emit(res, args.out)
        return
    # sweep
    grid = parse_grid(s["phi_grid"])
    man = _manifest("ssa sweep", cfg, seed)
    try:
        if args.eps_bar is not None:
            eps_bar = float(args.eps_bar)
        else:
            with man.stage("bifurcation"):
                bif = estimate_stochastic_bifurcation(model, run.omega, probe_grid_for(cfg, model), run,
                                                      float(s["horizon"]), int(s["refine"]), workers)
            eps_bar = bif.eps_bar_s
            man.results["eps_bar_s_uncertainty"] = bif.uncertainty
        man.results["eps_bar_s"] = eps_bar
        with man.stage("sweep"):
            curve = sweep_extinction_times(model, run.omega, grid, run, eps_bar, workers)
        man.results["flags"] = curve.flags
        man.add_output(io.write_ssa_curve(args.out, curve))
        man.status = "ok"
    except BaseException as exc:
        man.status = "failed"
        man.error = "%s: %s" % (type(exc).__name__, exc)
        raise
    finally:
        man.write(io.manifest_path_for(args.out))


def cmd_wkb(args):
    cfg = _config(args)
    model = model_from(cfg)
    crit = critical_params(model)
    tol = float(cfg["wkb"]["tol"])
    man = _manifest("wkb " + args.cmd, cfg)
    if args.cmd == "orbit":
        sys_ = HamiltonianSystem(model.with_epsilon(crit.eps_c + args.phi))
        x0 = args.x0 if args.x0 is not None else 1.5 * crit.x_c
        x_exit = args.x_exit if args.x_exit is not None else 0.05 * crit.x_c
        x_max, p_max = default_window(x0, args.p0)
        rec = integrate_orbit(sys_, x0, args.p0, StopSpec(x_exit, x_max, p_max, args.t_cap), tol)
        path = io.write_csv(args.out, io.ORBIT_COLUMNS, zip(rec.t, rec.x, rec.p, rec.S))
        man.results = {"exit_reason": rec.exit_reason.value, "flight_time": rec.flight_time,
                       "action": rec.action, "energy_drift": rec.energy_drift, "n_steps": rec.n_steps}
    elif args.cmd == "curves":
        pc = phase_curves(model, args.eps, parse_grid(args.x_grid))
        path = io.write_csv(args.out, io.PHASE_COLUMNS, zip(pc.x, pc.p_H, pc.p1, pc.p2))
        man.results = {"x_min_H": pc.x_min_H, "p_min_H": pc.p_min_H, "x_min_p": pc.x_min_p,
                       "p_min_p": pc.p_min_p, "x_F": pc.x_F, "x_0": pc.x_0}
    else:
        x0 = args.x0 if args.x0 is not None else 1.5 * crit.x_c
        prof = weight_profile(HamiltonianSystem(model), crit.eps_c + args.phi, args.omega,
                              parse_grid(args.p0_grid), x0, tol=tol)
        path = io.write_csv(args.out, io.WEIGHT_COLUMNS, [(w.p0, w.action, w.log_weight, w.weight) for w in prof])
        man.results = {"exit_reasons": [w.exit_reason.value for w in prof]}
    man.add_output(path)
    man.status = "ok"
    man.write(io.manifest_path_for(args.out))
    print(json.dumps(man.results, default=io._jsonable))


def _ensemble_arg(cfg, text):
    if text == "default":
        return ensemble_from(cfg)
    base = ensemble_from(cfg)
    if text == "zero":
        vals = (0.0,)
    else:
        try:
            vals = tuple(float(v) for v in text.split(","))
        except ValueError as exc:
            raise ConfigError("bad --ensemble %r" % text) from exc
    return InitialConditionEnsemble(vals, base.n, base.x0_factor, base.p_span_max, base.weight_threshold,
                                    base.omega_ref, base.x_exit_factor)


def _omega_from_manifest(path):
    mp = io.manifest_path_for(path)
    try:
        data = json.loads(mp.read_text(encoding="utf-8"))
        return float(data["config"]["ssa"]["omega"])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError("no --omegas given and no usable manifest next to %s" % path) from exc


def cmd_scaling(args):
    if args.cmd == "roots":
        r = appendix_roots(args.phi)
        _emit({"phi": r.phi, "p_minus": r.p_minus, "p_plus": r.p_plus, "c1": r.c1,
               "y_plus": [r.y_plus.real, r.y_plus.imag], "y_minus": [r.y_minus.real, r.y_minus.imag],
               "leading_transit": r.leading_transit()})
        return
    if args.cmd == "flight":
        cfg = _config(args)
        model = model_from(cfg)
        ens = _ensemble_arg(cfg, args.ensemble)
        grid = parse_grid(args.phi_grid)
        if grid.size == 0 or np.any(grid <= 0):
            raise ConfigError("--phi-grid must be non-empty with phi > 0")
        man = _manifest("scaling flight", cfg)
        man.config["ensemble_used"] = ens.describe()
        with man.stage("flight"):
            curve = flight_time_sweep(model, grid, ens, float(cfg["wkb"]["tol"]), workers=_workers(cfg))
        man.add_output(io.write_curve(args.out, curve))
        man.results = {"flags": curve.flags}
        man.status = "ok"
        man.write(io.manifest_path_for(args.out))
        return
    if args.cmd in ("fit", "bend"):
        curve = io.read_curve(args.inp, model=args.curve_model)
        if args.cmd == "fit":
            window = _range(args.window) if args.window else None
            f = fit_loglog_slope(curve, window)
            _emit(asdict(f), args.out)
        else:
            b = bend_location(curve)
            _emit({"phi_bend": b.phi_bend, "plateau_level": b.plateau_level, "plateau_slope": b.plateau_slope,
                   "decay_fit": asdict(b.decay_fit)}, args.out)
        return
    # collapse
    if args.omegas is not None and len(args.omegas) != len(args.inp):
        raise ConfigError("--omegas needs one value per input")
    omegas = args.omegas or [_omega_from_manifest(p) for p in args.inp]
    curves = [io.read_curve(p, omega=w) for p, w in zip(args.inp, omegas)]
    fit = collapse_fit(curves, _range(args.a_range), _range(args.b_range))
    _emit(asdict(fit), args.out)


def cmd_figures(args):
    cfg = _config(args, args.paper_scale)
    workers = _workers(cfg)
    runners = {"fig1": run_figure1, "fig2": run_figure2, "fig3": run_figure3}
    which = list(runners) if args.which == "all" else [args.which]
    for name in which:
        man, path = runners[name](cfg, args.out_dir, workers)
        print("%s: %s (%d files)" % (name, path, len(man.outputs)))


# options whose values may start with a minus sign
_VALUE_OPTS = {"--p0-grid", "--phi-grid", "--probe-grid", "--x-grid", "--window", "--a-range", "--b-range",
               "--p0", "--phi", "--eps", "--epsilon", "--ensemble"}


def _attach_values(argv):
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_OPTS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append("%s=%s" % (tok, argv[i + 1]))
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_attach_values(list(sys.argv[1:] if argv is None else argv)))
    handlers = {"models": cmd_models, "ssa": cmd_ssa, "wkb": cmd_wkb, "scaling": cmd_scaling,
                "figures": cmd_figures}
    try:
        handlers[args.group](args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print("numerical failure: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print("invalid input: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
