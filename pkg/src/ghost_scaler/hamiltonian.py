"""
Semiclassical (WKB) picture of a birth-death model.

For reactions with steps ``r_i`` and intensive rates ``w_i(x)`` the
Hamiltonian is ``H(x, p) = sum_i (exp(r_i p) - 1) w_i(x)``.  Orbits of

    dx/dt = dH/dp = sum_i r_i exp(r_i p) w_i(x)
    dp/dt = -dH/dx = -sum_i (exp(r_i p) - 1) w_i'(x)

are integrated together with the action ``dS/dt = p dx/dt - H`` by the
Fehlberg 7(8) pair in :mod:`ghost_scaler.rkf78`.  The line ``p = 0`` is
invariant and carries the mean-field dynamics; an orbit's statistical weight
at system size ``Omega`` is ``exp(-Omega S)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import optimize

from . import rkf78
from .models import ModelSpec, _birth_death_split, _central_diff, critical_params


class ExitReason(enum.Enum):
    REACHED_EXIT_THRESHOLD = "ReachedExitThreshold"
    LEFT_WINDOW = "LeftWindow"
    TIME_CAP = "TimeCap"
    STEP_FAILURE = "StepFailure"


_EXIT_FROM_CODE = {
    rkf78.REACHED_EXIT: ExitReason.REACHED_EXIT_THRESHOLD,
    rkf78.LEFT_WINDOW: ExitReason.LEFT_WINDOW,
    rkf78.TIME_CAP: ExitReason.TIME_CAP,
    rkf78.STEP_FAILURE: ExitReason.STEP_FAILURE,
}


def _python_rhs(model: ModelSpec):
    """Interpreted ``rhs(z, par, out)`` for models without a compiled kernel."""
    reactions = model.reactions

    def deriv(r, x, par):
        if r.intensive_derivative is not None:
            return r.intensive_derivative(x, par)
        # one-sided near the boundary so the rate is never asked for x < 0
        h = 1e-4 * max(1.0, abs(x))
        if x < 2 * h:
            f = lambda s: r.intensive_rate(s, par)
            return (-3 * f(x) + 4 * f(x + h) - f(x + 2 * h)) / (2 * h)
        return _central_diff(lambda s: r.intensive_rate(s, par), x, h)

    def rhs(z, par, out):
        x, p = float(z[0]), float(z[1])
        xd = 0.0
        pd = 0.0
        H = 0.0
        xs = max(x, 0.0)
        for r in reactions:
            w = r.intensive_rate(xs, par)
            g = math.expm1(r.step * p)
            H += g * w
            xd += r.step * math.exp(r.step * p) * w
            pd -= g * deriv(r, xs, par)
        out[0] = xd
        out[1] = pd
        out[2] = p * xd - H
        out[3] = H

    return rhs


@dataclass(frozen=True)
class HamiltonianSystem:
    """The WKB Hamiltonian of ``model`` and its vector field.

    Immutable; safe to share between threads.
    """

    model: ModelSpec
    rhs: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.rhs is None:
            fn = self.model.jit_hamiltonian_rhs or _python_rhs(self.model)
            object.__setattr__(self, "rhs", fn)

    @classmethod
    def for_model(cls, model: ModelSpec) -> "HamiltonianSystem":
        return cls(model)

    def with_epsilon(self, eps: float) -> "HamiltonianSystem":
        # rhs of a bundled model reads epsilon from the parameter array
        m = self.model.with_epsilon(eps)
        if self.model.jit_hamiltonian_rhs is None:
            return HamiltonianSystem(m)
        return HamiltonianSystem(m, self.rhs)

    def _eval(self, x, p):
        out = np.empty(4)
        self.rhs(np.array([x, p, 0.0]), self.model.par, out)
        return out

    def H(self, x: float, p: float) -> float:
        return float(self._eval(x, p)[3])

    def dx_dt(self, x: float, p: float) -> float:
        return float(self._eval(x, p)[0])

    def dp_dt(self, x: float, p: float) -> float:
        return float(self._eval(x, p)[1])

    @property
    def integrator(self):
        return rkf78.integrator_for(self.rhs)


def hamiltonian_value(sys: HamiltonianSystem, x: float, p: float) -> float:
    """``H(x, p)``; vanishes on ``x = 0``, ``p = 0`` and ``p = p_H(x)``."""
    return sys.H(x, p)


# ---------------------------------------------------------------------------
# Phase-space curves

@dataclass
class PhaseCurves:
    """Zero-energy and nullcline curves on an x-grid.

    ``p_H`` is the non-trivial ``H = 0`` branch ``log(D/B)``, ``p1 = p_H/2``
    the non-trivial x-nullcline and ``p2 = log(D'/B')`` the non-trivial
    p-nullcline, with ``B``/``D`` the summed birth/death densities.
    ``x_F <= x_0`` are the zeros of ``p2`` (``None`` when absent).
    """

    model: str
    epsilon: float
    x: np.ndarray
    p_H: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    x_min_H: float
    p_min_H: float
    x_min_p: float
    p_min_p: float
    x_F: Optional[float] = None
    x_0: Optional[float] = None

    @property
    def has_intersections(self) -> bool:
        return self.x_F is not None


def _p_curves(model: ModelSpec, x):
    B, D = _birth_death_split(model, x)
    dB, dD = _birth_death_split(model, x, derivative=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        pH = np.log(D / B)
        p2 = np.log(dD / dB)
    return pH, p2


def _minima(model: ModelSpec, x_grid):
    par = model.params
    eps = model.epsilon
    if model.name == "hill":
        k, A = par["k"], par["A"]
        return A, math.log(2 * eps * A / k), A / math.sqrt(3), math.log(8 * math.sqrt(3) * eps * A / (9 * k))
    if model.name == "autocatalytic":
        k, C = par["k"], par["C"]
        xh = math.sqrt(eps * C / k)
        xp = math.sqrt(eps * C / (3 * k))
        return xh, math.log(2 * math.sqrt(eps / (k * C))), xp, 0.5 * math.log(3 * eps / (k * C))
    lo, hi = float(np.min(x_grid)), float(np.max(x_grid))
    out = []
    for j in (0, 1):
        f = lambda s: float(_p_curves(model, np.array([s]))[j][0])
        xs = np.geomspace(lo, hi, 400)
        vals = np.array([f(s) for s in xs])
        i = int(np.nanargmin(vals))
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        res = optimize.minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        out += [float(res.x), float(res.fun)]
    return tuple(out)


def phase_curves(model: ModelSpec, eps: float, x_grid) -> PhaseCurves:
    """Sample ``p_H``, ``p1``, ``p2`` and locate their minima and the zeros of ``p2``."""
    x = np.asarray(x_grid, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x_grid must be strictly positive")
    if not eps > 0:
        raise ValueError("epsilon must be > 0")
    m = model.with_epsilon(eps)
    pH, p2 = _p_curves(m, x)
    xh, ph, xp, pp = _minima(m, x)
    xF = x0 = None
    if pp < 0:
        g = lambda s: float(_p_curves(m, np.array([s]))[1][0])
        lo = xp
        while g(lo) < 0:
            lo *= 0.5
        hi = xp
        while g(hi) < 0:
            hi *= 2.0
        xF = optimize.brentq(g, lo, xp, xtol=1e-14) if lo < xp else xp
        x0 = optimize.brentq(g, xp, hi, xtol=1e-14) if hi > xp else xp
    elif pp == 0:
        xF = x0 = xp
    return PhaseCurves(m.name, float(eps), x, pH, pH / 2, p2, xh, ph, xp, pp, xF, x0)


# ---------------------------------------------------------------------------
# Orbits

@dataclass(frozen=True)
class StopSpec:
    """Termination rules for one orbit.

    ``x_exit``: stop once ``x <= x_exit`` (the extinction-like target).
    ``x_max`` and ``p_max`` bound the window in ``x`` and ``|p|``; leaving it
    ends the orbit.  ``markers`` are x-levels whose first downward crossing
    times are recorded without stopping.
    """

    x_exit: Optional[float] = None
    x_max: float = math.inf
    p_max: float = math.inf
    t_cap: float = 1e9
    markers: tuple = ()


@dataclass
class TrajectoryRecord:
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    S: np.ndarray
    exit_reason: ExitReason
    flight_time: float
    energy_drift: float
    n_steps: int = 0
    marker_times: tuple = ()

    @property
    def samples(self) -> np.ndarray:
        """``(n, 4)`` array of ``(t, x, p, S)`` rows."""
        return np.column_stack([self.t, self.x, self.p, self.S])

    @property
    def action(self) -> float:
        return float(self.S[-1])

    @property
    def reached_exit(self) -> bool:
        return self.exit_reason is ExitReason.REACHED_EXIT_THRESHOLD


def integrate_orbit(sys: HamiltonianSystem, x0: float, p0: float, stop: StopSpec = None,
                    tol: float = 1e-12, record: bool = True, reverse: bool = False,
                    h0: float = 1e-6, max_steps: int = 10_000_000) -> TrajectoryRecord:
    """Integrate ``(x, p, S)`` from ``(x0, p0, 0)`` until a stop rule fires.

    With ``record=False`` only the end points are kept.  ``reverse=True``
    integrates backwards in time (used for reversibility checks).
    """
    if not 1e-15 <= tol <= 1e-8:
        raise ValueError("tol must lie in [1e-15, 1e-8], got %r" % (tol,))
    if not x0 > 0:
        raise ValueError("x0 must be > 0, got %r" % (x0,))
    stop = stop or StopSpec()
    if not stop.t_cap > 0:
        raise ValueError("t_cap must be > 0")
    x_exit = -math.inf if stop.x_exit is None else float(stop.x_exit)
    markers = np.asarray(stop.markers, dtype=float).reshape(-1)
    ts, xs, ps, ss, code, t, mt, drift, n = sys.integrator(
        np.array([x0, p0, 0.0]), sys.model.par, float(stop.t_cap), float(tol), x_exit,
        float(stop.x_max), float(stop.p_max), markers, float(h0), int(max_steps),
        bool(reverse), bool(record))
    return TrajectoryRecord(ts, xs, ps, ss, _EXIT_FROM_CODE[int(code)], float(t), float(drift),
                            int(n), tuple(float(v) for v in mt))


@dataclass(frozen=True)
class BottleneckTransit:
    """Time between the crossings of ``x_c + delta`` and ``x_c - delta``."""

    delta: float = 0.1


@dataclass(frozen=True)
class FullDecay:
    """Time until ``x <= x_exit`` (``None`` means ``0.05 x_c``)."""

    x_exit: Optional[float] = None


class NoTransit(RuntimeError):
    """The orbit did not complete the requested passage; ``record`` holds it."""

    def __init__(self, message, record):
        super().__init__(message)
        self.record = record


def default_window(x0: float, p0: float):
    """Generous ``(x_max, p_max)`` for orbits started at ``(x0, p0)``."""
    return 10.0 * max(x0, 1.0), max(5.0, 10.0 * abs(p0))


def flight_time(sys: HamiltonianSystem, phi: float, x0: float, p0: float,
                mode: Union[BottleneckTransit, FullDecay] = None, tol: float = 1e-12,
                t_cap: float = 1e9, return_record: bool = False):
    """Flight time of the orbit from ``(x0, p0)`` at ``epsilon = eps_c + phi``.

    Raises :class:`NoTransit` when the orbit ends (window, time cap, step
    failure) before completing the passage.
    """
    mode = mode or FullDecay()
    crit = critical_params(sys.model)
    s = sys.with_epsilon(crit.eps_c + phi)
    x_max, p_max = default_window(x0, p0)
    if isinstance(mode, BottleneckTransit):
        if not mode.delta > 0:
            raise ValueError("delta must be > 0")
        hi, lo = crit.x_c + mode.delta, crit.x_c - mode.delta
        stop = StopSpec(lo, x_max, p_max, t_cap, (hi,))
    elif isinstance(mode, FullDecay):
        x_exit = 0.05 * crit.x_c if mode.x_exit is None else mode.x_exit
        if not 0 < x_exit < x0:
            raise ValueError("need 0 < x_exit < x0")
        stop = StopSpec(x_exit, x_max, p_max, t_cap)
    else:
        raise TypeError("mode must be BottleneckTransit or FullDecay")
    rec = integrate_orbit(s, x0, p0, stop, tol, record=return_record)
    if not rec.reached_exit:
        raise NoTransit("orbit from (%g, %g) ended with %s at t=%g"
                        % (x0, p0, rec.exit_reason.value, rec.flight_time), rec)
    if isinstance(mode, BottleneckTransit):
        t_in = rec.marker_times[0] if x0 > hi else 0.0
        value = rec.flight_time - t_in
    else:
        value = rec.flight_time
    return (value, rec) if return_record else value


# ---------------------------------------------------------------------------
# Weights

@dataclass(frozen=True)
class PathWeight:
    log_weight: float
    weight: Optional[float]


_WEIGHT_FLOOR_LOG = math.log(1e-300)


def path_weight(S: float, omega: float) -> PathWeight:
    """``exp(-omega S)`` computed in log space.

    ``weight`` is ``None`` when it would fall below 1e-300; ``log_weight``
    is always set.
    """
    if not omega > 0:
        raise ValueError("omega must be > 0")
    lw = -omega * S
    if lw == 0:
        return PathWeight(0.0, 1.0)
    return PathWeight(lw, math.exp(lw) if lw >= _WEIGHT_FLOOR_LOG else None)


@dataclass
class PathWeightSample:
    p0: float
    action: float
    log_weight: float
    weight: Optional[float]
    omega: float
    exit_reason: ExitReason = ExitReason.REACHED_EXIT_THRESHOLD
    flight_time: float = math.nan


def weight_profile(sys: HamiltonianSystem, eps: float, omega: float, p0_grid: Sequence[float],
                   x0: float = None, x_exit: float = None, tol: float = 1e-12,
                   t_cap: float = 1e9) -> list:
    """Action and weight of orbits launched from ``x0`` with each ``p0``.

    The action is taken where the orbit terminates; an orbit that leaves the
    window or fails keeps its sample with the corresponding exit reason.
    """
    crit = critical_params(sys.model)
    x0 = 1.5 * crit.x_c if x0 is None else x0
    x_exit = 0.05 * crit.x_c if x_exit is None else x_exit
    s = sys.with_epsilon(eps)
    out = []
    for p0 in p0_grid:
        p0 = float(p0)
        x_max, p_max = default_window(x0, p0)
        try:
            rec = integrate_orbit(s, x0, p0, StopSpec(x_exit, x_max, p_max, t_cap), tol, record=False)
        except (ValueError, ArithmeticError):
            out.append(PathWeightSample(p0, math.nan, math.nan, None, omega, ExitReason.STEP_FAILURE))
            continue
        S = rec.action
        w = path_weight(S, omega)
        out.append(PathWeightSample(p0, S, w.log_weight, w.weight, omega, rec.exit_reason, rec.flight_time))
    return out
