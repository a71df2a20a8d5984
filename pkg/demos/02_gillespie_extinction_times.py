"""
Exact simulation and extinction times
=====================================

Runs the Gillespie direct method, checks it against two exact results and
locates the stochastic bifurcation of a small Hill system.
"""
import numpy as np

from ghost_scaler import models
from ghost_scaler.ssa import (SsaRunConfig, estimate_stochastic_bifurcation, exact_mean_extinction_time,
                              exponential_law_bifurcation, mean_extinction_time, sweep_extinction_times)

# Pure death from 50 individuals at unit rate takes H_50 on average.
death = models.hill(epsilon=1.0).with_births_zeroed()
s = mean_extinction_time(death, SsaRunConfig(50, x0_count=50, n_replicates=5000, seed=1))
h50 = sum(1 / k for k in range(1, 51))
print("pure death: mean %.4f +/- %.4f   H_50 = %.4f" % (s.mean, s.sem, h50))

# For the full Hill chain the mean first-passage time is a backward recursion.
hill = models.hill(epsilon=0.55)
s = mean_extinction_time(hill, SsaRunConfig(50, n_replicates=2000, seed=2))
print("hill Omega=50: SSA %.3f +/- %.3f   exact %.3f" % (s.mean, s.sem, exact_mean_extinction_time(hill, 50, 75)))

# The stochastic bifurcation is where half the replicates die out within
# the horizon.  Finite systems reach it before eps_c = 0.5.
omega = 200
cfg = SsaRunConfig(omega, n_replicates=100, seed=3)
bif = estimate_stochastic_bifurcation(models.hill(), omega, np.linspace(0.42, 0.52, 8), cfg, horizon=1e3, refine=4)
print("eps_bar_s(Omega=%d) = %.4f +/- %.4f   (exponential-law oracle %.4f)"
      % (omega, bif.eps_bar_s, bif.uncertainty,
         exponential_law_bifurcation(models.hill(), omega, int(1.5 * omega), 1e3)))
for e, f, g in zip(bif.probe_eps, bif.extinct_fraction, bif.smoothed_fraction):
    print("   eps=%.4f  extinct %.2f  smoothed %.2f" % (e, f, g))

# Mean extinction time against the distance from that point.
curve = sweep_extinction_times(models.hill(), omega, np.geomspace(1e-4, 1e-1, 7), cfg, bif)
for phi, v, e, flag in zip(curve.phi, curve.value, curve.spread, curve.flags):
    print("   phi_s=%.1e  <T_E>=%8.2f +/- %6.2f %s" % (phi, v, e, flag))
