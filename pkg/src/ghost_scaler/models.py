"""
Birth-death models with a saddle-node bifurcation.

Two bundled one-species models are provided,

* the autocatalytic replicator, ``dx/dt = k x^2 (1 - x/C) - eps x``, and
* the Hill model with linear decay, ``dx/dt = k x^2/(A^2 + x^2) - eps x``,

each written as a list of reactions with a +1 or -1 step.  Every reaction
carries both its extensive propensity ``W(X)`` (used by the stochastic
simulator) and its intensive rate density ``w(x)`` with ``W(X) = Omega w(X/Omega)
+ O(1)`` (used by the mean-field and WKB pictures).

Custom models are built with :func:`custom` from plain callables.  Rate
callables always receive the parameter values as a float array ordered like
``ModelSpec.param_names``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numba
import numpy as np
from scipy import optimize


class DomainError(ValueError):
    """A rate was requested outside the state space (negative density or count)."""


class NoSaddleNodeError(RuntimeError):
    """Root finding did not locate a saddle-node in the search window."""


@dataclass(frozen=True)
class ReactionSpec:
    """One reaction channel.

    ``extensive_rate(X, omega, par)`` is the propensity per unit time at count
    ``X``; ``intensive_rate(x, par)`` the rate density at ``x = X/omega``.
    ``intensive_derivative`` (d w / d x) is optional; when it is missing the
    Hamiltonian falls back to finite differences.
    """

    label: str
    step: int
    extensive_rate: Callable
    intensive_rate: Callable
    intensive_derivative: Optional[Callable] = None

    def __post_init__(self):
        if self.step not in (1, -1):
            raise ValueError("only steps of +1 or -1 are supported, got %r" % (self.step,))


@dataclass(frozen=True)
class CriticalParams:
    eps_c: float
    x_c: float
    eps_end: float


@dataclass(frozen=True)
class ModelSpec:
    name: str
    reactions: tuple
    param_names: tuple
    param_values: tuple
    # Compiled kernels for the bundled models; None for custom ones.
    jit_propensities: Optional[Callable] = field(default=None, compare=False, repr=False)
    jit_hamiltonian_rhs: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(self.param_names) != len(self.param_values):
            raise ValueError("param_names and param_values differ in length")
        for n, v in zip(self.param_names, self.param_values):
            if not (math.isfinite(v) and v > 0):
                raise ValueError("parameter %s must be finite and > 0, got %r" % (n, v))
        if "epsilon" not in self.param_names:
            raise ValueError("a model needs an 'epsilon' (decay / bifurcation) parameter")

    @property
    def params(self) -> dict:
        return dict(zip(self.param_names, self.param_values))

    @property
    def par(self) -> np.ndarray:
        a = np.array(self.param_values, dtype=np.float64)
        a.flags.writeable = False
        return a

    @property
    def epsilon(self) -> float:
        return self.params["epsilon"]

    @property
    def steps(self) -> np.ndarray:
        return np.array([r.step for r in self.reactions], dtype=np.int64)

    def with_params(self, **values) -> "ModelSpec":
        unknown = set(values) - set(self.param_names)
        if unknown:
            raise KeyError("unknown parameters: %s" % sorted(unknown))
        new = tuple(float(values.get(n, v)) for n, v in zip(self.param_names, self.param_values))
        return replace(self, param_values=new)

    def with_epsilon(self, eps: float) -> "ModelSpec":
        return self.with_params(epsilon=eps)

    def with_births_zeroed(self) -> "ModelSpec":
        """Same model with every +1 reaction removed (a pure death chain for Hill)."""
        kept = tuple(r for r in self.reactions if r.step == -1)
        return ModelSpec("custom", kept, self.param_names, self.param_values)


# ---------------------------------------------------------------------------
# Bundled rate laws.  Parameter layout: hill -> (k, A, epsilon),
# autocatalytic -> (k, C, epsilon).

@numba.njit(cache=True)
def _hill_birth_W(X, omega, par):
    k, A = par[0], par[1]
    xf = float(X)
    return omega * k * xf * xf / (omega * omega * A * A + xf * xf)


@numba.njit(cache=True)
def _hill_birth_w(x, par):
    k, A = par[0], par[1]
    return k * x * x / (A * A + x * x)


@numba.njit(cache=True)
def _hill_birth_dw(x, par):
    k, A = par[0], par[1]
    d = A * A + x * x
    return 2.0 * k * A * A * x / (d * d)


@numba.njit(cache=True)
def _linear_death_W(X, omega, par):
    return par[2] * float(X)


@numba.njit(cache=True)
def _linear_death_w(x, par):
    return par[2] * x


@numba.njit(cache=True)
def _linear_death_dw(x, par):
    return par[2]


@numba.njit(cache=True)
def _auto_birth_W(X, omega, par):
    xf = float(X)
    return par[0] * xf * (xf - 1.0) / omega


@numba.njit(cache=True)
def _auto_birth_w(x, par):
    return par[0] * x * x


@numba.njit(cache=True)
def _auto_birth_dw(x, par):
    return 2.0 * par[0] * x


@numba.njit(cache=True)
def _auto_comp_W(X, omega, par):
    xf = float(X)
    return par[0] / (par[1] * omega * omega) * xf * (xf - 1.0) * (xf - 2.0)


@numba.njit(cache=True)
def _auto_comp_w(x, par):
    return par[0] / par[1] * x * x * x


@numba.njit(cache=True)
def _auto_comp_dw(x, par):
    return 3.0 * par[0] / par[1] * x * x


@numba.njit(cache=True, nogil=True)
def _hill_props(X, omega, par, out):
    out[0] = _hill_birth_W(X, omega, par)
    out[1] = _linear_death_W(X, omega, par)


@numba.njit(cache=True, nogil=True)
def _auto_props(X, omega, par, out):
    out[0] = _auto_birth_W(X, omega, par)
    out[1] = _auto_comp_W(X, omega, par)
    out[2] = _linear_death_W(X, omega, par)


@numba.njit(cache=True, nogil=True)
def _hill_rhs(z, par, out):
    # out = (dx/dt, dp/dt, dS/dt, H)
    x, p = z[0], z[1]
    w1 = _hill_birth_w(x, par)
    d1 = _hill_birth_dw(x, par)
    w2 = par[2] * x
    d2 = par[2]
    ep = math.exp(p)
    em = math.exp(-p)
    gp = math.expm1(p)
    gm = math.expm1(-p)
    H = gp * w1 + gm * w2
    xd = ep * w1 - em * w2
    out[0] = xd
    out[1] = -(gp * d1 + gm * d2)
    out[2] = p * xd - H
    out[3] = H


@numba.njit(cache=True, nogil=True)
def _auto_rhs(z, par, out):
    x, p = z[0], z[1]
    w1 = _auto_birth_w(x, par)
    d1 = _auto_birth_dw(x, par)
    w2 = _auto_comp_w(x, par) + par[2] * x
    d2 = _auto_comp_dw(x, par) + par[2]
    ep = math.exp(p)
    em = math.exp(-p)
    gp = math.expm1(p)
    gm = math.expm1(-p)
    H = gp * w1 + gm * w2
    xd = ep * w1 - em * w2
    out[0] = xd
    out[1] = -(gp * d1 + gm * d2)
    out[2] = p * xd - H
    out[3] = H


def hill(k: float = 1.0, A: float = 1.0, epsilon: float = 0.5) -> ModelSpec:
    """Hill birth with saturation plus linear death.

    With the defaults ``k = A = 1`` the model is already in the normalised
    variables (x in units of A, time in units of A/k); use :func:`normalized`
    to map other parameter values onto that form.
    """
    reactions = (
        ReactionSpec("birth", +1, _hill_birth_W, _hill_birth_w, _hill_birth_dw),
        ReactionSpec("death", -1, _linear_death_W, _linear_death_w, _linear_death_dw),
    )
    return ModelSpec("hill", reactions, ("k", "A", "epsilon"),
                     (float(k), float(A), float(epsilon)), _hill_props, _hill_rhs)


def autocatalytic(k: float = 1.0, C: float = 1.0, epsilon: float = 0.25) -> ModelSpec:
    """Autocatalytic replicator: 2X -> 3X, 3X -> 2X (competition), X -> 0.

    Propensities use the exact factorial mass-action forms
    ``k X(X-1)/Omega`` and ``k X(X-1)(X-2)/(C Omega^2)``; the intensive
    rates keep only the leading order, ``k x^2`` and ``(k/C) x^3``.
    """
    reactions = (
        ReactionSpec("birth", +1, _auto_birth_W, _auto_birth_w, _auto_birth_dw),
        ReactionSpec("competition", -1, _auto_comp_W, _auto_comp_w, _auto_comp_dw),
        ReactionSpec("death", -1, _linear_death_W, _linear_death_w, _linear_death_dw),
    )
    return ModelSpec("autocatalytic", reactions, ("k", "C", "epsilon"),
                     (float(k), float(C), float(epsilon)), _auto_props, _auto_rhs)


def custom(reactions: Sequence[ReactionSpec], params: dict, name: str = "custom") -> ModelSpec:
    """Wrap user reactions.  ``params`` must contain ``epsilon``."""
    names = tuple(params)
    return ModelSpec(name, tuple(reactions), names, tuple(float(params[n]) for n in names))


def from_name(name: str, **params) -> ModelSpec:
    key = name.strip().lower()
    if key in ("hill",):
        return hill(**params)
    if key in ("autocatalytic", "autocat", "auto"):
        return autocatalytic(**params)
    raise KeyError("unknown model %r (expected 'hill' or 'autocatalytic')" % name)


def normalized(model: ModelSpec):
    """Rescale a bundled model to ``k = 1`` and ``A = 1`` (or ``C = 1``).

    Returns ``(scaled_model, length_scale, time_scale)`` such that
    ``x = length_scale * y`` and ``t = time_scale * sigma``.
    """
    k = model.params["k"]
    eps = model.epsilon
    if model.name == "hill":
        A = model.params["A"]
        return hill(1.0, 1.0, eps * A / k), A, A / k
    if model.name == "autocatalytic":
        C = model.params["C"]
        return autocatalytic(1.0, 1.0, eps / (k * C)), C, 1.0 / (k * C)
    raise ValueError("only bundled models can be normalised")


# ---------------------------------------------------------------------------

def intensive_rates(model: ModelSpec, x: float) -> list:
    """``[(w_i(x), r_i), ...]`` in reaction order."""
    if not x >= 0:
        raise DomainError("density must be >= 0, got %r" % (x,))
    par = model.par
    return [(float(r.intensive_rate(float(x), par)), r.step) for r in model.reactions]


def extensive_propensities(model: ModelSpec, X: int, omega: float) -> list:
    """``[(W_i(X), r_i), ...]`` in reaction order."""
    if X < 0:
        raise DomainError("count must be >= 0, got %r" % (X,))
    if not omega > 0:
        raise DomainError("system size must be > 0, got %r" % (omega,))
    par = model.par
    return [(float(r.extensive_rate(int(X), float(omega), par)), r.step) for r in model.reactions]


def mean_field_rhs(model: ModelSpec, x: float) -> float:
    """Deterministic velocity ``sum_i r_i w_i(x)``."""
    return sum(r * w for w, r in intensive_rates(model, x))


def _birth_death_split(model: ModelSpec, x, derivative=False):
    """Summed birth and death densities (or their x-derivatives) on an array."""
    par = model.par
    x = np.asarray(x, dtype=float)
    births = np.zeros_like(x)
    deaths = np.zeros_like(x)
    for r in model.reactions:
        if derivative:
            f = r.intensive_derivative
            if f is None:
                vals = np.array([_central_diff(lambda s: r.intensive_rate(s, par), xi) for xi in x.ravel()])
            else:
                vals = np.array([f(float(xi), par) for xi in x.ravel()])
        else:
            vals = np.array([r.intensive_rate(float(xi), par) for xi in x.ravel()])
        vals = vals.reshape(x.shape)
        if r.step > 0:
            births = births + vals
        else:
            deaths = deaths + vals
    return births, deaths


def _central_diff(f, x, h=None):
    """Richardson-extrapolated central difference, O(h^4)."""
    if h is None:
        h = 1e-3 * max(1.0, abs(x))
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


# ---------------------------------------------------------------------------

def critical_params(model: ModelSpec, x_window=(1e-3, 10.0), eps_window=(1e-3, 10.0)) -> CriticalParams:
    """Saddle-node location and the upper end of the slowing-down interval.

    Closed forms are used for the bundled models; custom models go through
    :func:`locate_saddle_node`.
    """
    p = model.params
    if model.name == "hill":
        k, A = p["k"], p["A"]
        return CriticalParams(k / (2 * A), A, 3 * math.sqrt(3) / 8 * k / A)
    if model.name == "autocatalytic":
        k, C = p["k"], p["C"]
        return CriticalParams(k * C / 4, C / 2, k * C / 3)
    eps_c, x_c = locate_saddle_node(model, x_window, eps_window)
    return CriticalParams(eps_c, x_c, _eps_end_numeric(model, x_window))


def locate_saddle_node(model: ModelSpec, x_window=(1e-3, 10.0), eps_window=(1e-3, 10.0)):
    """Solve ``F(x, eps) = dF/dx(x, eps) = 0`` by two-dimensional Newton.

    ``F`` is the mean-field velocity.  Derivatives are Richardson central
    differences, so only the rate callables are needed.  Several starting
    points on a coarse grid are tried; the first solution inside both
    windows wins.
    """
    def F(x, eps):
        return mean_field_rhs(model.with_epsilon(eps), x)

    def Fx(x, eps):
        return _central_diff(lambda s: F(s, eps), x)

    def G(v):
        return np.array([F(v[0], v[1]), Fx(v[0], v[1])])

    def newton(v):
        for _ in range(60):
            g = G(v)
            hx = 1e-6 * max(1.0, abs(v[0]))
            he = 1e-6 * max(1.0, abs(v[1]))
            J = np.column_stack([(G(v + [hx, 0]) - G(v - [hx, 0])) / (2 * hx),
                                 (G(v + [0, he]) - G(v - [0, he])) / (2 * he)])
            try:
                dv = np.linalg.solve(J, -g)
            except np.linalg.LinAlgError:
                return None
            v = v + dv
            if not (x_window[0] <= v[0] <= x_window[1] and eps_window[0] <= v[1] <= eps_window[1]):
                return None
            if np.max(np.abs(dv)) < 1e-14 * max(1.0, np.max(np.abs(v))):
                break
        if np.max(np.abs(G(v))) > 1e-9:
            return None
        return v

    xs = np.geomspace(max(x_window[0], 1e-2), x_window[1], 9)
    es = np.geomspace(max(eps_window[0], 1e-2), eps_window[1], 9)
    for x0 in xs:
        for e0 in es:
            v = newton(np.array([x0, e0], dtype=float))
            if v is not None and v[0] > 0:
                return float(v[1]), float(v[0])
    raise NoSaddleNodeError("no saddle-node found in x %s, eps %s" % (x_window, eps_window))


def _eps_end_numeric(model: ModelSpec, x_window):
    """Largest eps for which dp/dt = 0 still reaches p = 0.

    For models whose only eps dependence is a linear death term this is the
    maximum over x of the birth-minus-other-death slope; we locate it by
    bounded maximisation of ``eps`` solving ``B'(x) = D'(x)``.
    """
    def excess(x, eps):
        b, d = _birth_death_split(model.with_epsilon(eps), np.array([x]), derivative=True)
        return float(b[0] - d[0])

    # p2 touches p = 0 where max_x (B' - D') = 0; bisect on eps.
    xs = np.geomspace(x_window[0], x_window[1], 200)

    def best(eps):
        vals = [excess(x, eps) for x in xs]
        i = int(np.argmax(vals))
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        res = optimize.minimize_scalar(lambda s: -excess(s, eps), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12})
        return max(-res.fun, vals[i])

    lo, hi = 1e-6, 1.0
    while best(hi) > 0 and hi < 1e6:
        hi *= 2
    if best(lo) <= 0:
        raise NoSaddleNodeError("dp/dt nullcline never reaches p = 0")
    return optimize.brentq(best, lo, hi, xtol=1e-12)
