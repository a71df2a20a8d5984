"""
WKB orbits, phase curves and path weights
=========================================

The large-system limit of the master equation gives a Hamiltonian in the
density x and a conjugate momentum p.  p=0 is the mean-field dynamics;
p != 0 describes fluctuation-driven paths, weighted by exp(-Omega S).
"""
import numpy as np

from ghost_scaler import models
from ghost_scaler.hamiltonian import (BottleneckTransit, HamiltonianSystem, StopSpec, flight_time,
                                      integrate_orbit, phase_curves, weight_profile)

hill = models.hill()
sys = HamiltonianSystem(hill)

# Zero-energy branches and the minima that open and close the "tunnel".
x = np.linspace(0.01, 3.0, 600)
for off in (1.127e-5, 1e-2, 0.114):
    pc = phase_curves(hill, 0.5 + off, x)
    print("eps_c+%-9g min p_H=%.3e at x=%.3f   min p2=%+.4f   p2 zeros %s, %s"
          % (off, pc.p_min_H, pc.x_min_H, pc.p_min_p, pc.x_F, pc.x_0))

# One orbit with a small negative momentum; energy is conserved to ~1e-10.
rec = integrate_orbit(sys.with_epsilon(0.5 + 1e-3), 1.5, -0.01, StopSpec(x_exit=0.05), tol=1e-12)
print("orbit: %s after t=%.3f, action %.3e, |dH| %.1e, %d steps"
      % (rec.exit_reason.value, rec.flight_time, rec.action, rec.energy_drift, rec.n_steps))

# The bottleneck transit grows like phi^(-1/2) for p0=0 and saturates for p0<0.
for phi in (1e-2, 1e-4, 1e-6):
    t0 = flight_time(sys, phi, 1.5, 0.0, BottleneckTransit(0.1))
    tn = flight_time(sys, phi, 1.5, -0.05, BottleneckTransit(0.1))
    print("phi=%.0e  transit p0=0: %9.2f (2 pi/sqrt(phi)=%9.2f)   p0=-0.05: %.3f"
          % (phi, t0, 2 * np.pi / np.sqrt(phi), tn))

# Near the bifurcation every p0>0 orbit is exponentially suppressed while
# small negative momenta stay likely; far from it both signs are comparable.
grid = np.array([-0.05, -0.01, -0.001, 0.0, 0.001, 0.01, 0.05])
for phi in (1.127e-5, 0.114):
    prof = weight_profile(sys, 0.5 + phi, 1e3, grid)
    cells = ["%+.3f:%s" % (w.p0, "%.2e" % w.weight if w.weight is not None else "<1e-300") for w in prof]
    print("phi=%-9g " % phi + "  ".join(cells))
