"""
Models, rates and the saddle-node
=================================

Both bundled models are one-species birth-death processes.  This script
prints their reactions, checks that the extensive propensities scale with the
system size, and shows where the deterministic fixed points collide.
"""
import numpy as np

from ghost_scaler import models
from ghost_scaler.models import critical_params, extensive_propensities, intensive_rates, mean_field_rhs

# Each model is a list of reactions with a step of +1 or -1.
for m in (models.hill(), models.autocatalytic()):
    c = critical_params(m)
    print("%-13s reactions %s  steps %s" % (m.name, [r.label for r in m.reactions], m.steps.tolist()))
    print("              eps_c=%.6g  x_c=%.6g  eps_end=%.6g" % (c.eps_c, c.x_c, c.eps_end))

# Extensive propensities W_i(X) approach Omega * w_i(X / Omega) as Omega grows.
hill = models.hill(epsilon=0.3)
for omega in (1e2, 1e3, 1e4):
    X = int(0.5 * omega)
    W = [w for w, _ in extensive_propensities(hill, X, omega)]
    w = [w for w, _ in intensive_rates(hill, X / omega)]
    print("Omega=%-7g  W/Omega=%s  w=%s" % (omega, np.round(np.array(W) / omega, 6), np.round(w, 6)))

# Below eps_c the mean-field velocity has two positive roots; at eps_c they
# merge at x_c; above it only the origin is left and x decays through a
# bottleneck (the "ghost").
x = np.linspace(0.05, 2.0, 400)
for eps in (0.45, 0.5, 0.55):
    f = np.array([mean_field_rhs(models.hill(epsilon=eps), xi) for xi in x])
    roots = x[1:][np.sign(f[1:]) != np.sign(f[:-1])]
    print("hill eps=%.2f  sign changes of dx/dt near x=%s  slowest |dx/dt|=%.2e"
          % (eps, np.round(roots, 3), np.abs(f).min()))

# A model with other parameters can be mapped back to the scaled form.
scaled, L, T = models.normalized(models.hill(k=2.0, A=3.0, epsilon=0.4))
print("normalized hill(k=2, A=3): params %s, length scale %g, time scale %g" % (scaled.params, L, T))
