"""
Exact stochastic simulation (Gillespie direct method) and extinction-time statistics.

Every replicate draws from its own PCG64 stream derived from
``SeedSequence(seed, spawn_key=(replicate_index,))``, so results do not depend
on how replicates are spread over worker threads.  Because the key does not
involve the parameters, replicate ``i`` uses the same stream at every
``epsilon`` of a sweep (common random numbers).

Bundled models run in a compiled, GIL-free kernel; custom models fall back
to the same algorithm on the interpreter.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numba
import numpy as np
from scipy import optimize

from .curves import Provenance, ScalingCurve
from .models import ModelSpec, critical_params
from .parallel import parallel_map

EXTINCT, CENSORED, EXPLODED = 0, 1, 2


class PopulationExplosion(RuntimeError):
    """The count exceeded the hard cap; usually a sign of bad parameters."""


class BracketError(ValueError):
    """The probe grid does not bracket the 50% extinction crossing."""


@dataclass(frozen=True)
class SsaRunConfig:
    """Settings shared by all replicates of one ensemble.

    ``x0_fraction=None`` starts at ``1.5 x_c`` of the model; ``x0_count``
    overrides both and fixes ``X(0)`` directly.  Counts are rounded half to
    even.  ``x_max_factor * omega`` is the explosion cap.
    """

    omega: int
    x0_fraction: Optional[float] = None
    t_max: float = 1e6
    seed: int = 0
    n_replicates: int = 100
    x0_count: Optional[int] = None
    x_max_factor: float = 10.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if self.x0_fraction is not None and not self.x0_fraction > 0:
            raise ValueError("x0_fraction must be > 0")
        if self.x0_count is not None and self.x0_count < 0:
            raise ValueError("x0_count must be >= 0")
        if not self.t_max > 0:
            raise ValueError("t_max must be > 0")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")

    def initial_count(self, model: ModelSpec) -> int:
        if self.x0_count is not None:
            if self.x0_count > self.x_max():
                raise ValueError("X(0)=%d lies above the explosion cap %d" % (self.x0_count, self.x_max()))
            return int(self.x0_count)
        frac = self.x0_fraction
        if frac is None:
            frac = 1.5 * critical_params(model).x_c
        X0 = int(round(frac * self.omega))
        if X0 > self.x_max():
            raise ValueError("X(0)=%d lies above the explosion cap %d" % (X0, self.x_max()))
        return X0

    def x_max(self) -> int:
        return int(math.ceil(self.x_max_factor * self.omega))


def replicate_rng(seed: int, replicate_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replicate_index,))))


@numba.njit(nogil=True, cache=True)
def _direct_method(props, steps, X0, omega, par, t_max, x_max, rng):
    n = steps.shape[0]
    a = np.empty(n)
    X = X0
    t = 0.0
    while X > 0:
        props(X, omega, par, a)
        a0 = 0.0
        for i in range(n):
            a0 += a[i]
        if a0 <= 0.0:
            # stuck in a non-zero absorbing state
            return t_max, CENSORED
        t += rng.standard_exponential() / a0
        if t >= t_max:
            return t_max, CENSORED
        r = rng.random() * a0
        j = 0
        c = a[0]
        while c < r and j < n - 1:
            j += 1
            c += a[j]
        X += steps[j]
        if X > x_max:
            return t, EXPLODED
    return t, EXTINCT


def _direct_method_py(model, X0, omega, par, t_max, x_max, rng):
    steps = [r.step for r in model.reactions]
    rates = [r.extensive_rate for r in model.reactions]
    n = len(steps)
    X = X0
    t = 0.0
    while X > 0:
        a = [f(X, omega, par) for f in rates]
        a0 = sum(a)
        if a0 <= 0.0:
            return t_max, CENSORED
        t += rng.standard_exponential() / a0
        if t >= t_max:
            return t_max, CENSORED
        r = rng.random() * a0
        j = 0
        c = a[0]
        while c < r and j < n - 1:
            j += 1
            c += a[j]
        X += steps[j]
        if X > x_max:
            return t, EXPLODED
    return t, EXTINCT


def _run_one(model, cfg, X0, replicate_index):
    if X0 == 0:
        return 0.0, EXTINCT
    rng = replicate_rng(cfg.seed, replicate_index)
    par = model.par
    if model.jit_propensities is not None:
        t, status = _direct_method(model.jit_propensities, model.steps, X0, float(cfg.omega), par,
                                   float(cfg.t_max), cfg.x_max(), rng)
    else:
        t, status = _direct_method_py(model, X0, float(cfg.omega), par, float(cfg.t_max), cfg.x_max(), rng)
    return float(t), int(status)


def simulate_to_extinction(model: ModelSpec, cfg: SsaRunConfig, replicate_index: int = 0):
    """One realisation: ``(extinction_time, censored)``.

    Raises :class:`PopulationExplosion` when the count passes the cap.
    """
    t, status = _run_one(model, cfg, cfg.initial_count(model), replicate_index)
    if status == EXPLODED:
        raise PopulationExplosion("count exceeded %d at t=%g (replicate %d)" % (cfg.x_max(), t, replicate_index))
    return t, status == CENSORED


# ---------------------------------------------------------------------------

@dataclass
class ExtinctionStats:
    """Extinction-time samples and their summary.

    ``mean`` and ``sem`` use the uncensored samples only.  ``degenerate`` marks
    an ensemble with a single uncensored sample (``sem`` is then 0);
    ``unusable`` marks one where every sample was censored.
    """

    times: np.ndarray
    censored: np.ndarray
    mean: float
    sem: float
    std: float
    n_censored: int
    degenerate: bool = False
    unusable: bool = False

    @property
    def n(self) -> int:
        return int(self.times.size)

    @property
    def n_uncensored(self) -> int:
        return self.n - self.n_censored

    @property
    def censored_fraction(self) -> float:
        return self.n_censored / self.n if self.n else 0.0

    @property
    def samples(self) -> list:
        return list(zip(self.times.tolist(), self.censored.tolist()))

    @classmethod
    def from_samples(cls, times, censored) -> "ExtinctionStats":
        times = np.asarray(times, dtype=float)
        censored = np.asarray(censored, dtype=bool)
        # Welford, one pass over the uncensored samples
        k = 0
        mean = 0.0
        m2 = 0.0
        for t in times[~censored]:
            k += 1
            d = t - mean
            mean += d / k
            m2 += d * (t - mean)
        n_cens = int(censored.sum())
        if k == 0:
            return cls(times, censored, math.nan, math.nan, math.nan, n_cens, False, True)
        if k == 1:
            return cls(times, censored, mean, 0.0, 0.0, n_cens, True, False)
        std = math.sqrt(m2 / (k - 1))
        return cls(times, censored, mean, std / math.sqrt(k), std, n_cens)


def _ensemble(model, cfg, workers=None):
    X0 = cfg.initial_count(model)
    out = parallel_map(lambda i: _run_one(model, cfg, X0, i), range(cfg.n_replicates), workers)
    times = np.array([o[0] for o in out])
    status = np.array([o[1] for o in out])
    if np.any(status == EXPLODED):
        i = int(np.flatnonzero(status == EXPLODED)[0])
        raise PopulationExplosion("count exceeded %d in replicate %d" % (cfg.x_max(), i))
    return times, status == CENSORED


def mean_extinction_time(model: ModelSpec, cfg: SsaRunConfig, workers=None) -> ExtinctionStats:
    """Run ``cfg.n_replicates`` independent realisations and summarise them."""
    times, cens = _ensemble(model, cfg, workers)
    stats = ExtinctionStats.from_samples(times, cens)
    if stats.degenerate:
        warnings.warn("a single uncensored sample: sem reported as 0", RuntimeWarning, stacklevel=2)
    return stats


# ---------------------------------------------------------------------------
# Stochastic bifurcation

@dataclass
class StochasticBifurcation:
    """Where extinction within ``horizon`` becomes the typical outcome.

    ``probe_eps``/``extinct_fraction`` are the raw probe results and
    ``smoothed_fraction`` their non-decreasing (isotonic) fit.
    """

    eps_bar_s: float
    uncertainty: float
    probe_eps: np.ndarray
    extinct_fraction: np.ndarray
    smoothed_fraction: np.ndarray
    horizon: float
    omega: float
    n_replicates: int

    def phi_s(self, eps):
        return np.asarray(eps, dtype=float) - self.eps_bar_s

    def eps(self, phi_s):
        return self.eps_bar_s + np.asarray(phi_s, dtype=float)


def _extinct_fraction(model, cfg, eps_values, workers):
    fr = []
    for e in eps_values:
        _, cens = _ensemble(model.with_epsilon(float(e)), cfg, workers)
        fr.append(1.0 - cens.mean())
    return np.array(fr)


def _crossing(eps, smooth):
    above = np.flatnonzero(smooth >= 0.5)
    if above.size == 0 or smooth[0] >= 0.5:
        raise BracketError("extinct fraction does not cross 1/2 inside the probe grid "
                           "(range %.3g..%.3g)" % (smooth[0], smooth[-1]))
    j = int(above[0])
    e0, e1 = eps[j - 1], eps[j]
    f0, f1 = smooth[j - 1], smooth[j]
    e = e1 if f1 == f0 else e0 + (0.5 - f0) * (e1 - e0) / (f1 - f0)
    return float(e), j


def estimate_stochastic_bifurcation(model: ModelSpec, omega: int, probe_grid: Sequence[float],
                                    cfg: SsaRunConfig = None, horizon: float = 1e5, refine: int = 0,
                                    workers=None) -> StochasticBifurcation:
    """The ``epsilon`` at which half of the replicates go extinct before ``horizon``.

    The extinct fraction is measured on ``probe_grid``, made non-decreasing
    by isotonic regression, and its 1/2 crossing located by linear
    interpolation between the bracketing probes.  With ``refine > 0`` that
    bracket is probed again on ``refine`` interior points before the final
    fit.  The uncertainty is half the spacing of the final bracket.
    """
    eps = np.unique(np.asarray(probe_grid, dtype=float))
    if eps.size < 2:
        raise BracketError("probe grid needs at least two distinct points")
    base = cfg or SsaRunConfig(omega)
    run = replace(base, omega=omega, t_max=float(horizon))
    frac = _extinct_fraction(model, run, eps, workers)
    smooth = optimize.isotonic_regression(frac).x
    e, j = _crossing(eps, smooth)
    if refine > 0:
        extra = np.linspace(eps[j - 1], eps[j], refine + 2)[1:-1]
        fr2 = _extinct_fraction(model, run, extra, workers)
        eps = np.concatenate([eps, extra])
        frac = np.concatenate([frac, fr2])
        order = np.argsort(eps)
        eps, frac = eps[order], frac[order]
        smooth = optimize.isotonic_regression(frac).x
        e, j = _crossing(eps, smooth)
    return StochasticBifurcation(e, 0.5 * float(eps[j] - eps[j - 1]), eps, frac, smooth,
                                 float(horizon), float(omega), run.n_replicates)


# ---------------------------------------------------------------------------
# Sweeps

def sweep_extinction_times(model: ModelSpec, omega: int, phi_grid: Sequence[float], cfg: SsaRunConfig,
                           bifurcation: Union[StochasticBifurcation, float], workers=None,
                           max_censored_fraction: float = 0.1) -> ScalingCurve:
    """Mean extinction time at ``epsilon = eps_bar_s + phi`` for each ``phi``.

    ``spread`` is the SEM and ``n`` the number of uncensored samples.  Points
    with more than ``max_censored_fraction`` censoring are flagged.
    """
    eps_bar = bifurcation.eps_bar_s if isinstance(bifurcation, StochasticBifurcation) else float(bifurcation)
    phi = np.asarray(phi_grid, dtype=float)
    ens = "SSA x0=%s, %d replicates, t_max=%g, seed=%d" % (
        "1.5*x_c" if cfg.x0_fraction is None else "%g" % cfg.x0_fraction, cfg.n_replicates, cfg.t_max, cfg.seed)
    if phi.size == 0:
        return ScalingCurve.empty(Provenance.SSA, ensemble=ens, omega=float(omega), model=model.name)
    if np.any(phi <= 0):
        raise ValueError("phi values must be > 0")
    run = replace(cfg, omega=omega)
    value, spread, n, flags, stats = [], [], [], [], []
    for f in phi:
        s = ExtinctionStats.from_samples(*_ensemble(model.with_epsilon(eps_bar + f), run, workers))
        stats.append(s)
        value.append(s.mean)
        spread.append(s.sem)
        n.append(s.n_uncensored)
        if s.unusable:
            flags.append("all censored")
        elif s.censored_fraction > max_censored_fraction:
            flags.append("censored %.0f%%" % (100 * s.censored_fraction))
        else:
            flags.append("")
    return ScalingCurve(phi, value, spread, n, Provenance.SSA, ens, float(omega), model.name, flags, stats)


# ---------------------------------------------------------------------------
# Exact oracle

def _chain_rates(model, omega, n_max):
    lam = np.zeros(n_max + 1)
    mu = np.zeros(n_max + 1)
    par = model.par
    for r in model.reactions:
        vals = np.array([r.extensive_rate(X, float(omega), par) for X in range(n_max + 1)])
        if r.step > 0:
            lam += vals
        else:
            mu += vals
    lam[-1] = 0.0
    return lam, mu


def exact_mean_extinction_time(model: ModelSpec, omega: float, X0: int, n_max: int = None) -> float:
    """Mean first-passage time to 0 of the birth-death chain, reflected at ``n_max``.

    Uses ``tau_k = (1 + lambda_k tau_{k+1}) / mu_k`` for the mean time to step
    from ``k`` down to ``k - 1``; the result is ``sum_{k <= X0} tau_k``.
    """
    n_max = int(n_max or max(10 * omega, 2 * X0 + 10))
    lam, mu = _chain_rates(model, omega, n_max)
    tau = 0.0
    total = 0.0
    with np.errstate(over="ignore"):
        for k in range(n_max, 0, -1):
            tau = (1.0 + lam[k] * tau) / mu[k]
            if k <= X0:
                total += tau
    return float(total)


def exponential_law_bifurcation(model: ModelSpec, omega: float, X0: int, horizon: float,
                                bracket=None) -> float:
    """``epsilon`` with ``P(T_E <= horizon) = 1/2`` if ``T_E`` were exponential.

    Solves ``mean T_E(eps) = horizon / ln 2`` with the exact chain mean; a
    cheap, independent cross-check of :func:`estimate_stochastic_bifurcation`.
    """
    eps_c = critical_params(model).eps_c
    lo, hi = bracket or (0.5 * eps_c, 1.5 * eps_c)
    target = math.log(horizon / math.log(2.0))
    g = lambda e: math.log(exact_mean_extinction_time(model.with_epsilon(e), omega, X0)) - target
    return float(optimize.brentq(g, lo, hi, xtol=1e-10))
