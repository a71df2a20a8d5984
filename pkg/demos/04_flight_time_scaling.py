"""
Flight-time scaling laws
========================

Sweeps the distance phi from the saddle-node and fits log-log slopes: -1/2 for
the deterministic orbit, a plateau for the significant negative-momentum
ensemble, and the same shape for both models once normalized.
"""
import numpy as np

from ghost_scaler import models
from ghost_scaler.scaling import (InitialConditionEnsemble, appendix_roots, bend_location, fit_loglog_slope,
                                  flight_time_sweep, transit_time_quadrature)

phi = np.geomspace(1e-5, 1e-1, 25)

zero = InitialConditionEnsemble.singleton(0.0)
ens = InitialConditionEnsemble()
print("ensemble:", ens.describe())

curves = {}
for name in ("hill", "autocatalytic"):
    m = models.from_name(name)
    det = flight_time_sweep(m, phi, zero)
    neg = flight_time_sweep(m, phi, ens)
    curves[name] = neg
    print("%s: p0=0 slope on [1e-5, 1e-3] %.4f;  p0<0 slope on [1e-5, 1e-4] %.4f"
          % (name, fit_loglog_slope(det, (1e-5, 1e-3)).slope, fit_loglog_slope(neg, (1e-5, 1e-4)).slope))
    # the autocatalytic bistable range ends at phi = 1/12, leaving a short decay window
    try:
        b = bend_location(neg)
        print("   plateau %.2f, bend at phi=%.2e, decay slope %.3f" % (b.plateau_level, b.phi_bend, b.decay_fit.slope))
    except ValueError as exc:
        print("   no bend:", exc)

h, a = curves["hill"], curves["autocatalytic"]
ratio = h.normalized(h.value[0]).value / a.normalized(a.value[0]).value
print("normalized hill/autocatalytic ratio:", np.round(ratio, 3))

# The local normal form near the bottleneck: roots of 2p^2 + p - phi.
for f in (1e-2, 1e-4, 1e-6):
    r = appendix_roots(f)
    q = transit_time_quadrature(models.autocatalytic(), f, 0.0, 0.1)
    print("phi=%.0e  p+=%.6e  p-=%.6f  2 pi/Im(y+)=%9.2f  window quadrature=%9.2f"
          % (f, r.p_plus, r.p_minus, r.leading_transit(), q))
