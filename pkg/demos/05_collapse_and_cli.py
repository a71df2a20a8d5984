"""
Finite-size collapse and the command line
=========================================

Builds SSA curves for a few small system sizes, searches for the exponents
(a, b) that collapse Omega^b <T_E> against Omega^a phi, and then drives the
same machinery through the ``ghost-scaler`` command line, writing CSVs and
manifests into a temporary directory.
"""
import json
import tempfile
from pathlib import Path

import numpy as np

from ghost_scaler import io, models
from ghost_scaler.cli import main
from ghost_scaler.scaling import collapse_fit
from ghost_scaler.ssa import SsaRunConfig, estimate_stochastic_bifurcation, sweep_extinction_times

grid = np.geomspace(1e-4, 1e-1, 8)
curves = []
for omega in (100, 200, 400):
    cfg = SsaRunConfig(omega, n_replicates=60, seed=7)
    bif = estimate_stochastic_bifurcation(models.hill(), omega, np.linspace(0.40, 0.52, 7), cfg, horizon=1e3)
    c = sweep_extinction_times(models.hill(), omega, grid, cfg, bif)
    print("Omega=%4d  eps_bar_s=%.4f  <T_E>: %s" % (omega, bif.eps_bar_s, np.round(c.value, 1)))
    curves.append(c)

fit = collapse_fit(curves, grid=11)
print("collapse: a=%.3f b=%.3f  objective %.3e (unscaled %.3e) on %d overlapping points"
      % (fit.a, fit.b, fit.objective, fit.objective_at_origin, fit.n_overlap))

# The same steps from the command line.  Every output gets a sidecar manifest
# with the resolved configuration, the seed and a SHA-256 of the file.
with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    main(["models", "show", "--model", "autocatalytic"])
    main(["scaling", "flight", "--model", "hill", "--phi-grid", "1e-5:1e-1:25log", "--out", str(out / "flight.csv")])
    main(["scaling", "bend", "--in", str(out / "flight.csv")])
    main(["wkb", "weights", "--phi", "1.127e-5", "--p0-grid", "-0.02:0.02:5", "--out", str(out / "w.csv")])
    print(open(out / "w.csv").read())
    man = json.loads(io.manifest_path_for(out / "flight.csv").read_text())
    print("manifest keys:", sorted(man), "\noutputs:", man["outputs"])
    main(["figures", "fig2", "--out-dir", str(out / "figs"), "--seed", "1"])
    print(sorted(p.name for p in (out / "figs").iterdir()))
