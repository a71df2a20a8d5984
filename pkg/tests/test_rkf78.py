import math

import numpy as np
import pytest

from ghost_scaler import rkf78


def oscillator(z, par, out):
    # H = (x^2 + p^2)/2 with the same (x, p, S) layout as the WKB kernels
    x, p = z[0], z[1]
    H = 0.5 * (x * x + p * p)
    out[0] = p
    out[1] = -x
    out[2] = p * p - H
    out[3] = H


def exact(t, x0=1.0, p0=0.0):
    x = x0 * math.cos(t) + p0 * math.sin(t)
    p = -x0 * math.sin(t) + p0 * math.cos(t)
    return x, p


def run(h, tol=1e3, t_cap=None, record=False, **kw):
    integ = rkf78.integrator_for(oscillator)
    args = dict(x_exit=-math.inf, x_hi=math.inf, p_abs_max=math.inf, markers=np.zeros(0), max_steps=10**6,
                reverse=False)
    args.update(kw)
    return integ(np.array([1.0, 0.0, 0.0]), np.zeros(1), t_cap or h, tol, args["x_exit"], args["x_hi"],
                 args["p_abs_max"], args["markers"], h, args["max_steps"], args["reverse"], record)


class TestTableau:
    def test_row_sums_equal_nodes(self):
        assert np.allclose(rkf78.A.sum(axis=1), rkf78.C, atol=1e-15)

    @pytest.mark.parametrize("weights, order", [(rkf78.B7, 7), (rkf78.B8, 8)])
    def test_quadrature_conditions(self, weights, order):
        for k in range(order):
            assert np.dot(weights, rkf78.C ** k) == pytest.approx(1.0 / (k + 1), abs=1e-14)

    def test_both_weights_consistent(self):
        assert rkf78.B7.sum() == pytest.approx(1.0) and rkf78.B8.sum() == pytest.approx(1.0)
        assert rkf78.ERR.sum() == pytest.approx(0.0, abs=1e-15)

    def test_coupled_order_conditions(self):
        # two of the order-3 and order-4 rooted-tree conditions
        assert rkf78.B8 @ (rkf78.C * (rkf78.A @ rkf78.C)) == pytest.approx(1 / 8, abs=1e-14)
        assert rkf78.B8 @ (rkf78.A @ (rkf78.A @ rkf78.C)) == pytest.approx(1 / 24, abs=1e-14)


class TestIntegrator:
    def test_local_error_order(self):
        hs = np.array([0.4, 0.2, 0.1])
        errs = []
        for h in hs:
            ts, xs, ps, ss, code, t, *_ = run(h)
            assert code == rkf78.TIME_CAP and t == pytest.approx(h)
            ex, ep = exact(h)
            errs.append(math.hypot(xs[-1] - ex, ps[-1] - ep))
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        # an 8th-order method has local error O(h^9)
        assert slope > 8.5

    def test_adaptive_accuracy(self):
        ts, xs, ps, ss, code, t, _, drift, n = run(1e-6, tol=1e-12, t_cap=20.0, record=True)
        ex, ep = exact(20.0)
        assert code == rkf78.TIME_CAP
        assert abs(xs[-1] - ex) < 1e-10 and abs(ps[-1] - ep) < 1e-10
        assert drift < 1e-11
        assert np.all(np.diff(ts) > 0)

    def test_action_integral(self):
        # S = int (p^2 - H) dt = int (p^2 - x^2)/2 dt = -sin(2t)/4 for x0=1, p0=0
        ts, xs, ps, ss, *_ = run(1e-6, tol=1e-12, t_cap=3.0)
        assert ss[-1] == pytest.approx(-math.sin(6.0) / 4, abs=1e-11)

    def test_exit_event_localised(self):
        # x = cos t reaches 0.5 at t = pi/3
        ts, xs, ps, ss, code, t, *_ = run(1e-6, tol=1e-12, t_cap=10.0, x_exit=0.5)
        assert code == rkf78.REACHED_EXIT
        assert t == pytest.approx(math.pi / 3, abs=1e-11)

    def test_window_events(self):
        *_, code, t, _, _, _ = run(1e-6, tol=1e-12, t_cap=10.0, p_abs_max=0.5)
        assert code == rkf78.LEFT_WINDOW and t == pytest.approx(math.asin(0.5), abs=1e-11)

    def test_markers(self):
        out = run(1e-6, tol=1e-12, t_cap=2.0, markers=np.array([0.9, 0.0, 2.0]))
        mt = out[6]
        assert mt[0] == pytest.approx(math.acos(0.9), abs=1e-11)
        assert mt[1] == pytest.approx(math.pi / 2, abs=1e-11)
        assert np.isnan(mt[2])

    def test_reverse_time(self):
        ts, xs, ps, *_ = run(1e-6, tol=1e-12, t_cap=1.0, reverse=True)
        ex, ep = exact(-1.0)
        assert xs[-1] == pytest.approx(ex, abs=1e-11) and ps[-1] == pytest.approx(ep, abs=1e-11)

    def test_step_budget(self):
        *_, code, t, _, _, n = run(1e-6, tol=1e-12, t_cap=100.0, max_steps=5)
        assert code == rkf78.STEP_FAILURE and n == 5

    def test_interpreted_and_compiled_agree(self):
        import numba

        jitted = numba.njit(oscillator)
        a = rkf78.integrator_for(jitted)(np.array([1.0, 0.0, 0.0]), np.zeros(1), 5.0, 1e-12, -1.0, 9.0, 9.0,
                                         np.zeros(0), 1e-6, 10**6, False, True)
        b = run(1e-6, tol=1e-12, t_cap=5.0, record=True, x_exit=-1.0, x_hi=9.0, p_abs_max=9.0)
        assert np.allclose(a[1], b[1], rtol=0, atol=1e-14)
