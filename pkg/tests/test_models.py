import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ghost_scaler import models
from ghost_scaler.models import (DomainError, NoSaddleNodeError, ReactionSpec, critical_params,
                                 extensive_propensities, intensive_rates, mean_field_rhs)


def _hill_copy(eps=0.5):
    """Hill model rebuilt from plain Python callables (no compiled kernels)."""
    reactions = [
        ReactionSpec("birth", +1, lambda X, om, p: om * p[0] * X * X / (om * om * p[1] ** 2 + X * X),
                     lambda x, p: p[0] * x * x / (p[1] ** 2 + x * x)),
        ReactionSpec("death", -1, lambda X, om, p: p[2] * X, lambda x, p: p[2] * x),
    ]
    return models.custom(reactions, {"k": 1.0, "A": 1.0, "epsilon": eps})


class TestRates:
    def test_hill_absorbing_state(self, hill):
        assert intensive_rates(hill, 0.0) == [(0.0, 1), (0.0, -1)]

    def test_autocatalytic_rates_at_half(self, auto):
        (w1, r1), (w2, r2), (w3, r3) = intensive_rates(auto, 0.5)
        # birth is k x^2: the mean-field balance at x = 1/2, eps = 1/4 needs 0.25 here
        assert (w1, w2, w3) == pytest.approx((0.25, 0.125, 0.125), abs=1e-15)
        assert (r1, r2, r3) == (1, -1, -1)

    def test_hill_balance_at_critical_point(self):
        (w1, _), (w2, _) = intensive_rates(models.hill(epsilon=0.5), 1.0)
        assert w1 == pytest.approx(0.5) and w2 == pytest.approx(0.5)

    def test_negative_density_rejected(self, hill):
        with pytest.raises(DomainError):
            intensive_rates(hill, -1e-9)

    def test_factorial_competition_vanishes_at_two(self, auto):
        for om in (1.0, 37.0, 1e4):
            assert extensive_propensities(auto, 2, om)[1][0] == 0.0

    def test_factorial_competition_value(self, auto):
        W2 = extensive_propensities(auto, 1000, 1000)[1][0]
        assert W2 == pytest.approx(1e-6 * 1000 * 999 * 998, rel=1e-14)

    def test_hill_birth_propensity(self, hill):
        assert extensive_propensities(hill, 1000, 1000)[0][0] == pytest.approx(500.0, rel=1e-14)

    def test_negative_count_rejected(self, hill):
        with pytest.raises(DomainError):
            extensive_propensities(hill, -1, 100)

    @pytest.mark.parametrize("name", ["hill", "autocatalytic"])
    def test_death_channels_vanish_at_zero(self, name):
        m = models.from_name(name)
        for W, r in extensive_propensities(m, 0, 100.0):
            if r == -1:
                assert W == 0.0

    @pytest.mark.parametrize("name", ["hill", "autocatalytic"])
    def test_system_size_scaling(self, name):
        m = models.from_name(name, epsilon=0.3)
        worst = []
        for om in (1e2, 1e3, 1e4):
            for x in (0.25, 0.5, 1.0):
                X = round(x * om)
                W = extensive_propensities(m, X, om)
                w = intensive_rates(m, X / om)
                worst.append(om * max(abs(Wi / om - wi) for (Wi, _), (wi, _) in zip(W, w)))
        # |W/omega - w| <= c / omega with one constant per model
        assert max(worst) < 5.0

    def test_reaction_steps(self, hill, auto):
        assert auto.steps.tolist() == [1, -1, -1]
        assert hill.steps.tolist() == [1, -1]

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            ReactionSpec("x", 2, None, None)

    def test_bad_parameters_rejected(self):
        with pytest.raises(ValueError):
            models.hill(k=-1.0)
        with pytest.raises(ValueError):
            models.custom([], {"k": 1.0})


class TestMeanField:
    @pytest.mark.parametrize("name", ["hill", "autocatalytic"])
    def test_origin_is_fixed(self, name):
        assert mean_field_rhs(models.from_name(name), 0.0) == 0.0

    def test_hill_critical_equilibrium(self):
        assert mean_field_rhs(models.hill(epsilon=0.5), 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_autocatalytic_critical_equilibrium(self):
        assert mean_field_rhs(models.autocatalytic(epsilon=0.25), 0.5) == pytest.approx(0.0, abs=1e-15)

    @given(st.floats(0.0, 2.0), st.sampled_from(["hill", "autocatalytic"]), st.floats(0.05, 1.0))
    def test_rhs_is_signed_rate_sum(self, x, name, eps):
        m = models.from_name(name, epsilon=eps)
        c = critical_params(m)
        x = x * c.x_c
        assert mean_field_rhs(m, x) == sum(r * w for w, r in intensive_rates(m, x))

    @given(st.floats(0.0, 50.0), st.sampled_from(["hill", "autocatalytic"]))
    def test_rates_nonnegative(self, x, name):
        for w, _ in intensive_rates(models.from_name(name), x):
            assert w >= 0 and math.isfinite(w)


class TestCritical:
    def test_hill_closed_form(self, hill):
        c = critical_params(hill)
        assert (c.eps_c, c.x_c) == (0.5, 1.0)
        assert c.eps_end == pytest.approx(3 * math.sqrt(3) / 8, rel=1e-15)

    def test_autocatalytic_closed_form(self, auto):
        c = critical_params(auto)
        assert (c.eps_c, c.x_c) == (0.25, 0.5)
        assert c.eps_end == pytest.approx(1 / 3, rel=1e-15)

    @pytest.mark.parametrize("name", ["hill", "autocatalytic"])
    def test_saddle_node_conditions(self, name):
        m = models.from_name(name)
        c = critical_params(m)
        mc = m.with_epsilon(c.eps_c)
        h = 1e-5
        d = (mean_field_rhs(mc, c.x_c + h) - mean_field_rhs(mc, c.x_c - h)) / (2 * h)
        assert abs(mean_field_rhs(mc, c.x_c)) <= 1e-12
        assert abs(d) <= 1e-8
        assert c.eps_c < c.eps_end

    def test_custom_copy_matches_closed_form(self):
        c = critical_params(_hill_copy())
        assert c.eps_c == pytest.approx(0.5, abs=1e-10)
        assert c.x_c == pytest.approx(1.0, abs=1e-10)
        assert c.eps_end == pytest.approx(3 * math.sqrt(3) / 8, abs=1e-10)

    def test_general_parameters(self):
        c = critical_params(models.hill(k=2.0, A=3.0))
        m = models.hill(k=2.0, A=3.0, epsilon=c.eps_c)
        assert abs(mean_field_rhs(m, c.x_c)) < 1e-14
        c = critical_params(models.autocatalytic(k=2.0, C=3.0))
        m = models.autocatalytic(k=2.0, C=3.0, epsilon=c.eps_c)
        assert abs(mean_field_rhs(m, c.x_c)) < 1e-14

    def test_no_saddle_node(self):
        # pure linear death has no positive equilibrium at all
        m = models.custom([ReactionSpec("d", -1, lambda X, o, p: p[0] * X, lambda x, p: p[0] * x)],
                          {"epsilon": 1.0})
        with pytest.raises(NoSaddleNodeError):
            critical_params(m)


class TestConstruction:
    def test_normalized_hill(self):
        m, L, T = models.normalized(models.hill(k=2.0, A=3.0, epsilon=0.4))
        assert m.params == {"k": 1.0, "A": 1.0, "epsilon": pytest.approx(0.6)}
        assert (L, T) == (3.0, 1.5)
        # velocities map as dx/dt = (L/T) dy/dsigma
        orig = models.hill(k=2.0, A=3.0, epsilon=0.4)
        for y in (0.3, 1.0, 2.2):
            assert mean_field_rhs(orig, L * y) == pytest.approx(L / T * mean_field_rhs(m, y), rel=1e-12)

    def test_normalized_autocatalytic(self):
        orig = models.autocatalytic(k=2.0, C=4.0, epsilon=0.7)
        m, L, T = models.normalized(orig)
        for y in (0.1, 0.5, 0.9):
            assert mean_field_rhs(orig, L * y) == pytest.approx(L / T * mean_field_rhs(m, y), rel=1e-12)

    def test_immutability(self, hill):
        with pytest.raises(Exception):
            hill.name = "x"
        with pytest.raises(ValueError):
            hill.par[0] = 3.0

    def test_with_epsilon_keeps_kernels(self, hill):
        m = hill.with_epsilon(0.6)
        assert m.epsilon == 0.6 and m.jit_propensities is hill.jit_propensities

    def test_births_zeroed(self, hill):
        m = hill.with_births_zeroed()
        assert m.steps.tolist() == [-1] and m.jit_propensities is None

    def test_unknown_model(self):
        with pytest.raises(KeyError):
            models.from_name("hypercycle")

    def test_unknown_parameter(self, hill):
        with pytest.raises(KeyError):
            hill.with_params(C=2.0)

    def test_shared_across_threads(self, hill):
        from concurrent.futures import ThreadPoolExecutor

        xs = np.linspace(0, 2, 64)
        with ThreadPoolExecutor(4) as pool:
            got = list(pool.map(lambda x: mean_field_rhs(hill, x), xs))
        assert got == [mean_field_rhs(hill, x) for x in xs]
