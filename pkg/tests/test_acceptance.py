"""Acceptance gate: one PASS/FAIL line per criterion, summarised at the end of the run."""
import functools
import math

import numpy as np
import pytest
from scipy import stats

from ghost_scaler import models
from ghost_scaler.curves import Provenance, ScalingCurve
from ghost_scaler.hamiltonian import FullDecay, HamiltonianSystem, StopSpec, flight_time, integrate_orbit, \
    weight_profile
from ghost_scaler.models import critical_params
from ghost_scaler.scaling import (InitialConditionEnsemble, appendix_roots, bend_location, collapse_fit,
                                  fit_loglog_slope, flight_time_sweep, transit_time_quadrature)
from ghost_scaler.ssa import SsaRunConfig, estimate_stochastic_bifurcation, mean_extinction_time, \
    sweep_extinction_times

MODELS = ("hill", "autocatalytic")
SSA_GRID = np.geomspace(1e-5, 1e-1, 12)
SEED = 1
HORIZON = 1e3


@functools.lru_cache(maxsize=None)
def ssa_curve(omega, replicates):
    """Hill extinction-time sweep over ``SSA_GRID`` measured from its own stochastic bifurcation."""
    m = models.hill()
    cfg = SsaRunConfig(omega, t_max=1e6, seed=SEED, n_replicates=replicates)
    probes = np.linspace(0.45, 0.52, 8)
    bif = estimate_stochastic_bifurcation(m, omega, probes, cfg, horizon=HORIZON, refine=8)
    return bif, sweep_extinction_times(m, omega, SSA_GRID, cfg, bif)


@functools.lru_cache(maxsize=None)
def negative_flight_curve(name, lo, hi, n):
    return flight_time_sweep(models.from_name(name), np.geomspace(lo, hi, n), InitialConditionEnsemble())


def test_c01_deterministic_exponent(report):
    phi = np.geomspace(1e-5, 1e-3, 15)
    ens = InitialConditionEnsemble(p0=(0.0, 0.01))
    slopes, used = {}, {}
    for name in MODELS:
        c = flight_time_sweep(models.from_name(name), phi, ens)
        slopes[name] = fit_loglog_slope(c).slope
        used[name] = int(c.n.min()), int(c.n.max())
    ok = all(abs(s + 0.5) <= 0.05 for s in slopes.values())
    report(1, "deterministic exponent -0.50 +/- 0.05", ok,
           "slopes %s; orbits kept per phi (min, max) %s" % (
               {k: round(v, 4) for k, v in slopes.items()}, used))
    assert ok


def test_c02_negative_momentum_plateau(report):
    slopes = {name: fit_loglog_slope(negative_flight_curve(name, 1e-5, 1e-4, 6)).slope for name in MODELS}
    ok = all(abs(s) <= 0.1 for s in slopes.values())
    report(2, "plateau |slope| <= 0.1 for p0 < 0", ok, "slopes %s" % {k: round(v, 4) for k, v in slopes.items()})
    assert ok


def test_c03_pure_death_oracle(report):
    m = models.hill(epsilon=1.0).with_births_zeroed()
    s = mean_extinction_time(m, SsaRunConfig(50, x0_count=50, n_replicates=10_000, seed=SEED))
    h50 = sum(1.0 / k for k in range(1, 51))
    ok = abs(s.mean - h50) <= 3 * s.sem
    report(3, "pure death mean within 3 SEM of H_50", ok,
           "mean %.4f, H_50 %.4f, SEM %.4f, |z| %.2f" % (s.mean, h50, s.sem, abs(s.mean - h50) / s.sem))
    assert ok


def test_c04_energy_conservation(report):
    rng = np.random.default_rng(SEED)
    drift, p_dev = 0.0, 0.0
    for name in MODELS:
        m = models.from_name(name)
        c = critical_params(m)
        sys = HamiltonianSystem(m.with_epsilon(c.eps_c + 1e-3))
        for x0, p0 in zip(rng.uniform(0.1, 2.0, 100) * c.x_c, rng.uniform(-0.3, 0.3, 100)):
            rec = integrate_orbit(sys, x0, p0, StopSpec(0.02 * c.x_c, 20 * c.x_c, 5.0, 1e5), 1e-12, record=False)
            drift = max(drift, rec.energy_drift)
        for x0 in np.linspace(0.2, 2.0, 10) * c.x_c:
            rec = integrate_orbit(sys, x0, 0.0, StopSpec(0.05 * c.x_c, t_cap=1e4), 1e-12)
            p_dev = max(p_dev, float(np.max(np.abs(rec.p))))
    ok = drift <= 1e-8 and p_dev <= 1e-10
    report(4, "energy drift <= 1e-8, p0=0 keeps |p| <= 1e-10", ok, "max drift %.2e, max |p| %.2e" % (drift, p_dev))
    assert ok


def test_c05_quadrature_equivalence(report):
    worst = 0.0
    for name in MODELS:
        m = models.from_name(name)
        c = critical_params(m)
        sys = HamiltonianSystem(m)
        for phi in (1e-2, 1e-4, 1e-6):
            t_ode = flight_time(sys, phi, 1.5 * c.x_c, 0.0, FullDecay(0.05 * c.x_c))
            t_q = transit_time_quadrature(m, phi, 0.0, x_range=(1.5 * c.x_c, 0.05 * c.x_c))
            worst = max(worst, abs(t_ode - t_q) / t_q)
    ok = worst <= 1e-6
    report(5, "p=0 flight time vs quadrature, rel err <= 1e-6", ok, "worst relative error %.2e" % worst)
    assert ok


def test_c06_root_expansion(report):
    phis = np.geomspace(1e-9, 1e-3, 20)
    expansion, newton = 0.0, 0.0
    for phi in phis:
        r = appendix_roots(phi)
        expansion = max(expansion, abs(r.p_plus - phi) / (10 * phi * phi))
        p = phi
        for _ in range(50):
            step = (2 * p * p + p - phi) / (4 * p + 1)
            p -= step
            if abs(step) <= 1e-18:
                break
        newton = max(newton, abs(p - r.p_plus) / p)
    ok = expansion <= 1.0 and newton <= 1e-12
    report(6, "|p+ - phi| <= 10 phi^2 and closed form = Newton", ok,
           "max |p+ - phi|/(10 phi^2) %.3f, max rel diff to Newton %.1e" % (expansion, newton))
    assert ok


def test_c07_weight_dichotomy(report):
    sys = HamiltonianSystem(models.hill())
    side = np.geomspace(1e-5, 0.05, 30)
    grid = np.concatenate([-side[::-1], side])
    near = weight_profile(sys, 0.5 + 1.127e-5, 1e3, grid)
    pos_max = max(w.log_weight for w in near if w.p0 > 0)
    neg_best = max((w.weight or 0.0) for w in near if w.p0 < 0)
    far = weight_profile(sys, 0.5 + 0.114, 1e3, np.linspace(-0.05, 0.05, 101))
    fp = max(w.log_weight for w in far if w.p0 > 0)
    fn = max(w.log_weight for w in far if w.p0 < 0)
    ok = pos_max < math.log(1e-3) and neg_best > 0.5 and abs(fp - fn) < math.log(10)
    report(7, "weight dichotomy near/far from the bifurcation", ok,
           "phi=1.127e-5: max log10 weight p0>0 %.1f, max weight p0<0 %.3f; phi=0.114: max ratio %.2f" % (
               pos_max / math.log(10), neg_best, math.exp(abs(fp - fn))))
    assert ok


@pytest.mark.slow
def test_c08_bend_location(report):
    bif, curve = ssa_curve(1000, 200)
    b = bend_location(curve)
    ok = 2e-4 <= b.phi_bend <= 1e-3
    report(8, "SSA bend (Hill, Omega=1000, 200 replicates) in [2e-4, 1e-3]", ok,
           "phi_bend %.3e, eps_bar_s %.5f +/- %.1e, plateau %.1f, decay slope %.3f, flags %s" % (
               b.phi_bend, bif.eps_bar_s, bif.uncertainty, b.plateau_level, b.decay_fit.slope,
               [f for f in curve.flags if f] or "none"))
    assert ok


@pytest.mark.slow
def test_c09_shape_agreement(report):
    _, ssa = ssa_curve(1000, 200)
    shared = ssa.window(1e-5, 1e-2).usable()
    flight = flight_time_sweep(models.hill(), shared.phi, InitialConditionEnsemble())
    rho = stats.spearmanr(shared.value, flight.value).statistic
    phi = np.geomspace(1e-5, 1e-3, 9)
    h, a = negative_flight_curve("hill", 1e-5, 1e-3, 9), negative_flight_curve("autocatalytic", 1e-5, 1e-3, 9)
    hn, an = h.normalized(h.value[0]), a.normalized(a.value[0])
    dev = float(np.max(np.abs(hn.value / an.value - 1)))
    ok = rho >= 0.9 and dev <= 0.2
    report(9, "Spearman(SSA, flight) >= 0.9 and normalized models within 20%", ok,
           "Spearman %.3f over %d points; max normalized deviation %.3f over %d points" % (
               rho, len(shared), dev, phi.size))
    assert ok


def synthetic(a, b):
    phi = np.geomspace(1e-6, 1e-1, 30)
    out = []
    for w in (250.0, 500.0, 1000.0):
        val = w ** -b / np.sqrt(1e-4 + w ** a * phi)
        out.append(ScalingCurve(phi, val, np.zeros_like(phi), np.ones(phi.size, int), Provenance.QUADRATURE,
                                omega=w))
    return out


@pytest.mark.slow
def test_c10_collapse(report):
    curves = [ssa_curve(w, 100)[1] for w in (250, 500, 1000)]
    fit = collapse_fit(curves)
    syn = collapse_fit(synthetic(0.6, 0.3))
    ok_ssa = fit.objective < fit.objective_at_origin
    ok_syn = abs(syn.a - 0.6) <= 0.05 and abs(syn.b - 0.3) <= 0.05
    bends = {}
    for w, c in zip((250, 500, 1000), curves):
        try:
            bends[w] = "%.2e" % bend_location(c).phi_bend
        except ValueError as exc:
            bends[w] = "none (%s)" % exc
    report(10, "collapse beats (0,0) on SSA; synthetic (0.6, 0.3) recovered", ok_ssa and ok_syn,
           "SSA a=%.3f b=%.3f objective %.3e vs origin %.3e; synthetic a=%.4f b=%.4f; bends %s" % (
               fit.a, fit.b, fit.objective, fit.objective_at_origin, syn.a, syn.b, bends))
    assert ok_ssa and ok_syn
