"""CSV tables and JSON run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .curves import Provenance, ScalingCurve

CURVE_COLUMNS = ["phi", "value", "spread", "n", "provenance", "model"]
SSA_COLUMNS = ["phi_s", "mean_TE", "sem", "n", "n_censored"]
ORBIT_COLUMNS = ["t", "x", "p", "S"]
PHASE_COLUMNS = ["x", "p_H", "p1", "p2"]
WEIGHT_COLUMNS = ["p0", "action", "log_weight", "weight"]


def fmt(v) -> str:
    """Locale-free number formatting; scientific notation below 1e-3."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v != 0 and abs(v) < 1e-3:
            return "%.12e" % v
        return "%.12g" % v
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("%s is empty" % path)
    return rows[0], rows[1:]


def _num(s):
    return math.nan if s == "" else float(s)


def write_curve(path, curve: ScalingCurve) -> Path:
    rows = [(f, v, s, n, curve.provenance.value, curve.model)
            for f, v, s, n in zip(curve.phi, curve.value, curve.spread, curve.n)]
    return write_csv(path, CURVE_COLUMNS, rows)


def write_ssa_curve(path, curve: ScalingCurve) -> Path:
    cens = [s.n_censored for s in curve.stats] if curve.stats is not None else [0] * len(curve)
    rows = [(f, v, s, n, c) for f, v, s, n, c in zip(curve.phi, curve.value, curve.spread, curve.n, cens)]
    return write_csv(path, SSA_COLUMNS, rows)


def read_curve(path, omega=None, model=None) -> ScalingCurve:
    """Load a curve written by :func:`write_curve` or :func:`write_ssa_curve`.

    A figure CSV holding several models needs ``model`` to pick one.
    """
    header, rows = read_csv(path)
    if header == SSA_COLUMNS:
        phi = [_num(r[0]) for r in rows]
        val = [_num(r[1]) for r in rows]
        spr = [_num(r[2]) for r in rows]
        n = [int(float(r[3])) for r in rows]
        return ScalingCurve(phi, val, spr, n, Provenance.SSA, omega=omega)
    if header == CURVE_COLUMNS:
        if model is not None:
            rows = [r for r in rows if r[5] == model]
        models = {r[5] for r in rows}
        if len(models) > 1:
            raise ValueError("%s holds several models %s; choose one" % (path, sorted(models)))
        prov = Provenance(rows[0][4]) if rows else Provenance.SSA
        return ScalingCurve([_num(r[0]) for r in rows], [_num(r[1]) for r in rows],
                            [_num(r[2]) for r in rows], [int(float(r[3])) for r in rows],
                            prov, omega=omega, model=next(iter(models), ""))
    raise ValueError("unrecognised curve header %s in %s" % (header, path))


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class ExperimentManifest:
    """What was run, with which settings, and what it produced."""

    command: str
    config: dict
    seed: object = None
    version: str = __version__
    status: str = "running"
    error: str = ""
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    platform: str = field(default_factory=platform.platform)
    started: float = field(default_factory=time.time)
    wall_clock: float = 0.0

    def stage(self, name):
        return _Stage(self, name)

    def add_output(self, path) -> None:
        p = Path(path)
        self.outputs[p.name] = {"path": str(p), "sha256": sha256(p), "bytes": p.stat().st_size}

    def write(self, path) -> Path:
        self.wall_clock = time.time() - self.started
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable) + "\n",
                        encoding="utf-8")
        return path


class _Stage:
    def __init__(self, manifest, name):
        self.m = manifest
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.m.timings[self.name] = time.perf_counter() - self.t0
        return False


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    return str(o)


def manifest_path_for(out_path) -> Path:
    p = Path(out_path)
    return p.with_name(p.name + ".manifest.json")
