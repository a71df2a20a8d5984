"""
Run configuration: a TOML (or JSON) file merged over built-in defaults.

Schema (every key optional)::

    seed = 12345
    threads = 4

    [model]
    name = "hill"          # or "autocatalytic"
    k = 1.0
    A = 1.0                # hill only
    C = 1.0                # autocatalytic only
    epsilon = 0.5

    [ssa]
    omega = 500
    replicates = 100
    t_max = 1e6            # censoring horizon of the sweeps
    horizon = 1e3          # extinction horizon defining the stochastic bifurcation
    x0_fraction = 0.75     # omit for 1.5 * x_c
    phi_grid = "1e-5:1e-1:12log"
    probe_grid = ""        # empty: eps_c - 0.05 .. eps_c + 0.02, 8 points
    refine = 8

    [wkb]
    tol = 1e-12

    [ensemble]
    p0 = []                # explicit momenta; empty: default negative grid
    n = 100
    x0_factor = 1.5
    p_span_max = 0.1
    weight_threshold = 1e-2
    omega_ref = 1000.0

    [figures]
    models = ["hill", "autocatalytic"]
    fig1_phi_grid = "1e-5:1e-1:12log"
    fig2_eps_offsets = [1.127e-5, 1e-2, 0.114]
    fig2_x_grid = "0.005:3:600"
    fig3_phis = [1.127e-5, 0.0011, 1e-2, 0.114]
    fig3_omega = 1000.0
    fig3_p0_grid = "-0.08:0.08:81"

Grids are written ``start:stop:N`` (linear), ``start:stop:Nlog`` (log
spaced) or as explicit lists.
"""
from __future__ import annotations

import copy
import json
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "seed": None,
    "threads": None,
    "model": {"name": "hill", "k": 1.0, "A": 1.0, "C": 1.0, "epsilon": None},
    "ssa": {
        "omega": 500,
        "replicates": 100,
        "t_max": 1e6,
        "horizon": 1e3,
        "x0_fraction": None,
        "phi_grid": "1e-5:1e-1:12log",
        "probe_grid": "",
        "refine": 8,
    },
    "wkb": {"tol": 1e-12},
    "ensemble": {
        "p0": [],
        "n": 100,
        "x0_factor": 1.5,
        "p_span_max": 0.1,
        "weight_threshold": 1e-2,
        "omega_ref": 1000.0,
    },
    "figures": {
        "models": ["hill", "autocatalytic"],
        "fig1_phi_grid": "1e-5:1e-1:12log",
        "fig2_eps_offsets": [1.127e-5, 1e-2, 0.114],
        "fig2_x_grid": "0.005:3:600",
        "fig3_phis": [1.127e-5, 0.0011, 1e-2, 0.114],
        "fig3_omega": 1000.0,
        "fig3_p0_grid": "-0.08:0.08:81",
    },
}

PAPER_SCALE = {"ssa": {"omega": 1000, "replicates": 1000}}


def parse_grid(spec) -> np.ndarray:
    """``"a:b:N"``, ``"a:b:Nlog"``, ``"a,b,c"`` or a list of numbers."""
    if isinstance(spec, (list, tuple, np.ndarray)):
        return np.asarray(spec, dtype=float)
    text = str(spec).strip()
    if not text:
        return np.zeros(0)
    try:
        if ":" in text:
            a, b, n = text.split(":")
            log = n.lower().endswith("log")
            n = int(n[:-3] if log else n)
            a, b = float(a), float(b)
            if n < 1:
                raise ConfigError("grid %r has no points" % text)
            if log:
                if a <= 0 or b <= 0:
                    raise ConfigError("log grid %r needs positive end points" % text)
                return np.geomspace(a, b, n)
            return np.linspace(a, b, n)
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("cannot parse grid %r" % text) from exc


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load(path=None, overrides: dict = None, paper_scale: bool = False) -> dict:
    """Defaults, then the file at ``path``, then ``overrides``; validated."""
    cfg = copy.deepcopy(DEFAULTS)
    if paper_scale:
        cfg = _merge(cfg, PAPER_SCALE)
    if path is not None:
        p = Path(path)
        try:
            raw = p.read_bytes()
        except OSError as exc:
            raise ConfigError("cannot read config %s: %s" % (p, exc)) from exc
        try:
            data = json.loads(raw) if p.suffix.lower() == ".json" else tomllib.loads(raw.decode("utf-8"))
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError("cannot parse config %s: %s" % (p, exc)) from exc
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError("unknown config sections: %s" % sorted(unknown))
        cfg = _merge(cfg, data)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate(cfg)
    return cfg


def _positive(name, v):
    try:
        ok = float(v) > 0
    except (TypeError, ValueError):
        ok = False
    if not ok:
        raise ConfigError("%s must be > 0, got %r" % (name, v))


def validate(cfg: dict) -> None:
    m = cfg["model"]
    if str(m["name"]).lower() not in ("hill", "autocatalytic"):
        raise ConfigError("model.name must be 'hill' or 'autocatalytic', got %r" % m["name"])
    for key in ("k", "A", "C"):
        _positive("model." + key, m[key])
    if m.get("epsilon") is not None:
        _positive("model.epsilon", m["epsilon"])
    s = cfg["ssa"]
    _positive("ssa.omega", s["omega"])
    _positive("ssa.t_max", s["t_max"])
    _positive("ssa.horizon", s["horizon"])
    if int(s["replicates"]) < 1:
        raise ConfigError("ssa.replicates must be >= 1")
    if s.get("x0_fraction") is not None:
        _positive("ssa.x0_fraction", s["x0_fraction"])
    for key, grid in (("ssa.phi_grid", s["phi_grid"]), ("figures.fig1_phi_grid", cfg["figures"]["fig1_phi_grid"])):
        g = parse_grid(grid)
        if g.size == 0:
            raise ConfigError("%s is empty" % key)
        if np.any(g <= 0):
            raise ConfigError("%s must hold phi > 0 only" % key)
    tol = float(cfg["wkb"]["tol"])
    if not 1e-15 <= tol <= 1e-8:
        raise ConfigError("wkb.tol must lie in [1e-15, 1e-8]")
    f = cfg["figures"]
    phis = np.asarray(f["fig3_phis"], dtype=float)
    if phis.size == 0 or np.any(phis <= 0):
        raise ConfigError("figures.fig3_phis must be a non-empty list of phi > 0")
    _positive("figures.fig3_omega", f["fig3_omega"])
    if parse_grid(f["fig3_p0_grid"]).size == 0:
        raise ConfigError("figures.fig3_p0_grid is empty")
    if parse_grid(f["fig2_x_grid"]).size == 0 or np.any(parse_grid(f["fig2_x_grid"]) <= 0):
        raise ConfigError("figures.fig2_x_grid must be non-empty and positive")
    if len(f["fig2_eps_offsets"]) == 0:
        raise ConfigError("figures.fig2_eps_offsets is empty")
    for name in f["models"]:
        if str(name).lower() not in ("hill", "autocatalytic"):
            raise ConfigError("unknown model %r in figures.models" % name)
    e = cfg["ensemble"]
    _positive("ensemble.omega_ref", e["omega_ref"])
    _positive("ensemble.weight_threshold", e["weight_threshold"])
    if int(e["n"]) < 1:
        raise ConfigError("ensemble.n must be >= 1")
    if cfg.get("threads") is not None and int(cfg["threads"]) < 1:
        raise ConfigError("threads must be >= 1")


def model_from(cfg: dict, name: str = None):
    """Bundled model named in the config (or ``name``), with its parameters."""
    from .models import autocatalytic, critical_params, hill

    m = cfg["model"]
    key = str(name or m["name"]).lower()
    if key == "hill":
        model = hill(k=m["k"], A=m["A"])
    else:
        model = autocatalytic(k=m["k"], C=m["C"])
    eps = m.get("epsilon")
    if eps is None or name is not None:
        eps = critical_params(model).eps_c
    return model.with_epsilon(float(eps))


def ensemble_from(cfg: dict):
    from .scaling import InitialConditionEnsemble

    e = cfg["ensemble"]
    p0 = tuple(float(v) for v in e["p0"]) or None
    return InitialConditionEnsemble(p0=p0, n=int(e["n"]), x0_factor=float(e["x0_factor"]),
                                    p_span_max=float(e["p_span_max"]),
                                    weight_threshold=float(e["weight_threshold"]),
                                    omega_ref=float(e["omega_ref"]))
