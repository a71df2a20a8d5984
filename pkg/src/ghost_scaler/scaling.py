"""
Scaling laws near the saddle-node.

Flight-time sweeps over the bifurcation distance ``phi``, log-log slope fits,
the closed-form roots of the bottleneck normal form together with a
quadrature oracle for frozen-momentum transit times, detection of the bend
between the plateau and the power-law decay, and finite-size data collapse
``T ~ Omega^-b G(Omega^a phi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, interpolate, optimize, stats

from .curves import Provenance, ScalingCurve
from .hamiltonian import HamiltonianSystem, StopSpec, _minima, default_window, integrate_orbit, path_weight
from .models import DomainError, ModelSpec, _birth_death_split, critical_params
from .parallel import parallel_map


class WindowError(ValueError):
    """Too few points inside a fit window."""


class RegimeError(ValueError):
    """The curve does not show the plateau/decay structure asked for."""


class PoleError(ValueError):
    """The reciprocal velocity has a pole on the integration segment."""


class OverlapError(ValueError):
    """Rescaled curves do not overlap."""


# ---------------------------------------------------------------------------
# Flight-time sweeps

@dataclass(frozen=True)
class InitialConditionEnsemble:
    """Initial conditions for a flight-time average.

    Orbits start at ``x0 = x0_factor * x_c``.  With ``p0=None`` the momenta
    are ``n`` uniform points in ``[-p_span, 0)``, where
    ``p_span = min(p_span_max, |p_min,p(eps)|)``; otherwise the explicit
    ``p0`` values are used.  Only orbits that reach ``x_exit_factor * x_c``
    with weight ``exp(-omega_ref S) >= weight_threshold`` are averaged.
    """

    p0: Optional[tuple] = None
    n: int = 100
    x0_factor: float = 1.5
    p_span_max: float = 0.1
    weight_threshold: float = 1e-2
    omega_ref: float = 1000.0
    x_exit_factor: float = 0.05

    @classmethod
    def singleton(cls, p0: float = 0.0, **kw) -> "InitialConditionEnsemble":
        return cls(p0=(float(p0),), **kw)

    def momenta(self, model: ModelSpec) -> np.ndarray:
        if self.p0 is not None:
            return np.asarray(self.p0, dtype=float)
        x_c = critical_params(model).x_c
        p_min_p = _minima(model, np.geomspace(1e-3 * x_c, 10 * x_c, 8))[3]
        span = min(self.p_span_max, abs(p_min_p))
        return np.linspace(-span, 0.0, self.n, endpoint=False)

    def describe(self) -> str:
        if self.p0 is not None:
            mom = "p0 in {%s}" % ", ".join("%g" % v for v in self.p0)
        else:
            mom = "%d uniform p0 in [-min(%g, |p_min,p|), 0)" % (self.n, self.p_span_max)
        return "x0=%g*x_c; %s; keep weight>=%g at Omega=%g; exit x<=%g*x_c" % (
            self.x0_factor, mom, self.weight_threshold, self.omega_ref, self.x_exit_factor)


def _sweep_point(model, phi, ens, tol, t_cap):
    crit = critical_params(model)
    m = model.with_epsilon(crit.eps_c + phi)
    sys = HamiltonianSystem(m)
    x0 = ens.x0_factor * crit.x_c
    x_exit = ens.x_exit_factor * crit.x_c
    times = []
    for p0 in ens.momenta(m):
        x_max, p_max = default_window(x0, p0)
        rec = integrate_orbit(sys, x0, float(p0), StopSpec(x_exit, x_max, p_max, t_cap), tol, record=False)
        if not rec.reached_exit:
            continue
        w = path_weight(rec.action, ens.omega_ref)
        if w.log_weight >= math.log(ens.weight_threshold):
            times.append(rec.flight_time)
    return np.asarray(times)


def flight_time_sweep(model: ModelSpec, phi_grid: Sequence[float], ensemble: InitialConditionEnsemble = None,
                      tol: float = 1e-12, t_cap: float = 1e9, workers=None) -> ScalingCurve:
    """Mean flight time (to the exit threshold) of the significant orbits at each ``phi``.

    ``spread`` is the ensemble standard deviation.  A ``phi`` where every
    orbit is filtered out is kept with value ``nan`` and the flag ``empty``.
    """
    ens = ensemble or InitialConditionEnsemble()
    phi = np.asarray(phi_grid, dtype=float)
    if np.any(phi <= 0):
        raise ValueError("phi values must be > 0")
    results = parallel_map(lambda f: _sweep_point(model, f, ens, tol, t_cap), phi, workers)
    value, spread, n, flags = [], [], [], []
    for t in results:
        if t.size == 0:
            value.append(math.nan)
            spread.append(math.nan)
            flags.append("empty")
        else:
            value.append(float(np.mean(t)))
            spread.append(float(np.std(t)))
            flags.append("")
        n.append(t.size)
    return ScalingCurve(phi, value, spread, n, Provenance.HAMILTONIAN, ens.describe(),
                        None, model.name, flags)


# ---------------------------------------------------------------------------
# Slopes

@dataclass
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    window: tuple
    r_squared: float
    n_points: int

    def predict(self, phi):
        return np.exp(self.intercept) * np.asarray(phi, dtype=float) ** self.slope


def fit_loglog_slope(curve: ScalingCurve, window=None) -> SlopeFit:
    """Least-squares line through ``(log phi, log value)`` inside ``window``."""
    c = curve.usable()
    if window is not None:
        c = c.window(*window)
    if len(c) < 4:
        raise WindowError("need at least 4 points in the fit window, got %d" % len(c))
    res = stats.linregress(np.log(c.phi), np.log(c.value))
    lo, hi = (float(c.phi[0]), float(c.phi[-1])) if window is None else (float(window[0]), float(window[1]))
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr), (lo, hi),
                    float(res.rvalue ** 2), len(c))


# ---------------------------------------------------------------------------
# Normal-form roots and the quadrature oracle

@dataclass(frozen=True)
class AppendixRoots:
    """Roots of ``2p^2 + p - phi`` and the complex poles of the bottleneck.

    ``y_plus, y_minus = p +/- i sqrt(2 (p - p_minus)(p_plus - p))`` are given
    at ``p = 0``, as is ``c1 = sqrt(p - p_minus)``; use :meth:`poles` for
    other frozen momenta.
    """

    phi: float
    p_minus: float
    p_plus: float
    c1: float
    y_plus: complex
    y_minus: complex

    def poles(self, p: float = 0.0):
        im = math.sqrt(2.0 * (p - self.p_minus) * (self.p_plus - p))
        return complex(p, im), complex(p, -im)

    def leading_transit(self, p: float = 0.0) -> float:
        """``2 pi / Im(y_plus)``, the bottleneck time of the quadratic normal form."""
        if not self.p_minus < p < self.p_plus:
            raise DomainError("frozen momentum must lie strictly between the roots")
        return 2.0 * math.pi / self.poles(p)[0].imag


def appendix_roots(phi: float) -> AppendixRoots:
    if not 0 < phi <= 1.0 / 12:
        raise DomainError("phi must lie in (0, 1/12], got %r" % (phi,))
    s = math.sqrt(1.0 + 8.0 * phi)
    p_minus = (-1.0 - s) / 4.0
    # cancellation-free form of (-1 + s)/4
    p_plus = 2.0 * phi / (1.0 + s)
    c1 = math.sqrt(-p_minus)
    im = math.sqrt(2.0 * (-p_minus) * p_plus)
    return AppendixRoots(float(phi), p_minus, p_plus, c1, complex(0.0, im), complex(0.0, -im))


def _frozen_velocity(model: ModelSpec, p: float):
    ep, em = math.exp(p), math.exp(-p)

    def f(x):
        B, D = _birth_death_split(model, np.array([x]))
        return float(ep * B[0] - em * D[0])

    return f


def transit_time_quadrature(model: ModelSpec, phi: float, p_fixed: float = 0.0, delta: float = 0.1,
                            x_range=None) -> float:
    """Time to move from ``x_c + delta`` down to ``x_c - delta`` at frozen ``p``.

    Computes ``int dx / |f(x, p)|`` with ``f = sum_i r_i exp(r_i p) w_i(x)``.
    ``x_range=(x_start, x_end)`` replaces the window.  Raises
    :class:`PoleError` if ``f`` does not stay negative on the segment.
    """
    crit = critical_params(model)
    m = model.with_epsilon(crit.eps_c + phi)
    if x_range is None:
        x_start, x_end = crit.x_c + delta, crit.x_c - delta
    else:
        x_start, x_end = x_range
    lo, hi = sorted((float(x_end), float(x_start)))
    if lo <= 0 and x_range is not None:
        raise DomainError("segment must stay at x > 0")
    f = _frozen_velocity(m, p_fixed)
    g = lambda x: -f(x)
    # locate the slowest point; a non-positive minimum is a pole
    xs = np.linspace(lo, hi, 2001)
    gs = np.array([g(x) for x in xs])
    i = int(np.argmin(gs))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    res = optimize.minimize_scalar(g, bounds=(a, b), method="bounded", options={"xatol": 1e-14})
    x_slow = float(res.x) if res.fun < gs[i] else float(xs[i])
    if min(res.fun, gs[i]) <= 0:
        raise PoleError("velocity vanishes or changes sign near x=%g (phi=%g, p=%g)" % (x_slow, phi, p_fixed))
    pts = [x_slow] if lo < x_slow < hi else None
    val, _ = integrate.quad(lambda x: 1.0 / g(x), lo, hi, points=pts, epsabs=0.0, epsrel=1e-12, limit=1000)
    return float(val)


# ---------------------------------------------------------------------------
# Bend between plateau and decay

@dataclass
class BendLocation:
    phi_bend: float
    plateau_level: float
    plateau_slope: float
    decay_fit: SlopeFit


def bend_location(curve: ScalingCurve, n_plateau: int = 5, plateau_tol: float = 0.1) -> BendLocation:
    """Where the plateau level meets the power-law fit of the decay.

    The plateau level is the median of the ``n_plateau`` smallest-phi values
    (their log-log slope must stay below ``plateau_tol``); the decay window
    holds every point at or below half that level.
    """
    c = curve.usable()
    if len(c) < n_plateau + 4:
        raise RegimeError("curve too short to hold a plateau and a decay window")
    head = ScalingCurve(c.phi[:n_plateau], c.value[:n_plateau], c.spread[:n_plateau], c.n[:n_plateau],
                        c.provenance)
    level = float(np.exp(np.median(np.log(head.value))))
    slope = stats.linregress(np.log(head.phi), np.log(head.value)).slope
    if abs(slope) >= plateau_tol:
        raise RegimeError("no plateau: slope %.3g over the smallest-phi points" % slope)
    tail = c.value <= 0.5 * level
    tail[:n_plateau] = False
    if tail.sum() < 4:
        raise RegimeError("no decay window: %d points below half the plateau" % tail.sum())
    idx = np.flatnonzero(tail)
    fit = fit_loglog_slope(c._take(tail), (float(c.phi[idx[0]]), float(c.phi[idx[-1]])))
    if fit.slope >= 0:
        raise RegimeError("decay window is not decaying (slope %.3g)" % fit.slope)
    phi_bend = math.exp((math.log(level) - fit.intercept) / fit.slope)
    return BendLocation(phi_bend, level, float(slope), fit)


# ---------------------------------------------------------------------------
# Data collapse

@dataclass
class CollapseFit:
    a: float
    b: float
    objective: float
    objective_at_origin: float
    curves_used: list
    n_overlap: int


def _master(X, Y):
    """Monotone non-increasing interpolant through pooled points."""
    order = np.argsort(X, kind="stable")
    X, Y = X[order], Y[order]
    Yi = optimize.isotonic_regression(Y, increasing=False).x
    ux, inv = np.unique(X, return_inverse=True)
    uy = np.bincount(inv, weights=Yi) / np.bincount(inv)
    if ux.size == 1:
        return ux, lambda x: np.full_like(x, uy[0])
    return ux, interpolate.PchipInterpolator(ux, uy, extrapolate=False)


def _collapse_objective(data, a, b):
    """Mean squared log distance of each curve to the master of the others."""
    total = 0.0
    count = 0
    for i, (lw, lphi, lval) in enumerate(data):
        others = [d for j, d in enumerate(data) if j != i]
        X = np.concatenate([a * o[0] + o[1] for o in others])
        Y = np.concatenate([b * o[0] + o[2] for o in others])
        ux, G = _master(X, Y)
        x = a * lw + lphi
        y = b * lw + lval
        inside = (x >= ux[0]) & (x <= ux[-1])
        if not inside.any():
            continue
        r = y[inside] - G(x[inside])
        total += float(np.sum(r * r))
        count += int(inside.sum())
    return (total / count if count else math.inf), count


def collapse_fit(curves: Sequence[ScalingCurve], a_range=(-1.0, 1.0), b_range=(-1.0, 1.0),
                 grid: int = 21, min_overlap: int = 4) -> CollapseFit:
    """Exponents ``(a, b)`` that best collapse ``Omega^b T`` against ``Omega^a phi``.

    Grid search over the box followed by Nelder-Mead refinement.  Each curve
    is compared, in log space, with a monotone spline through all the other
    curves, on the part of its range that they cover.
    """
    used = [c.usable() for c in curves]
    omegas = [c.omega for c in used]
    if len(used) < 2:
        raise ValueError("need at least two curves")
    if any(w is None or not w > 0 for w in omegas) or len(set(omegas)) != len(omegas):
        raise ValueError("curves need distinct positive omega tags")
    data = [(math.log(c.omega), np.log(c.phi), np.log(c.value)) for c in used]

    def obj(v):
        val, cnt = _collapse_objective(data, v[0], v[1])
        return val if cnt >= min_overlap else math.inf

    best = (math.inf, 0.0, 0.0)
    for a in np.linspace(*a_range, grid):
        for b in np.linspace(*b_range, grid):
            v = obj((a, b))
            if v < best[0]:
                best = (v, a, b)
    if not math.isfinite(best[0]):
        raise OverlapError("rescaled curves never overlap inside the search box")

    def boxed(v):
        if not (a_range[0] <= v[0] <= a_range[1] and b_range[0] <= v[1] <= b_range[1]):
            return math.inf
        return obj(v)

    step = [(a_range[1] - a_range[0]) / (grid - 1), (b_range[1] - b_range[0]) / (grid - 1)]
    x0 = np.array(best[1:])
    simplex = np.array([x0, x0 + [step[0], 0.0], x0 + [0.0, step[1]]])
    res = optimize.minimize(boxed, x0, method="Nelder-Mead",
                            options={"initial_simplex": simplex, "xatol": 1e-6, "fatol": 1e-12, "maxiter": 2000})
    if res.fun < best[0]:
        best = (float(res.fun), float(res.x[0]), float(res.x[1]))
    origin, _ = _collapse_objective(data, 0.0, 0.0)
    _, cnt = _collapse_objective(data, best[1], best[2])
    return CollapseFit(best[1], best[2], best[0], origin, omegas, cnt)
