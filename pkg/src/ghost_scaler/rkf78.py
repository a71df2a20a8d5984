"""
Fehlberg 7(8) embedded Runge-Kutta integrator for the (x, p, S) system.

The right-hand side has the signature ``rhs(z, par, out)`` and writes
``(dx/dt, dp/dt, dS/dt, H)`` into ``out``, where ``z = (x, p, S)``.  The
Hamiltonian value is carried along so energy drift can be monitored without
a second callback.

The 8th-order solution is propagated; the difference to the 7th-order one,
``41/840 h (k1 + k11 - k12 - k13)``, is the local error estimate.  Events
are located by bisection on the step length of a single step taken from the
last accepted point, so no dense output is needed.
"""
import numba
import numpy as np

# Fehlberg (1968), NASA TR R-287, Table X.
C = np.array([0.0, 2.0 / 27, 1.0 / 9, 1.0 / 6, 5.0 / 12, 0.5, 5.0 / 6, 1.0 / 6,
              2.0 / 3, 1.0 / 3, 1.0, 0.0, 1.0])

A = np.zeros((13, 13))
A[1, 0] = 2.0 / 27
A[2, :2] = [1.0 / 36, 1.0 / 12]
A[3, :3] = [1.0 / 24, 0.0, 1.0 / 8]
A[4, :4] = [5.0 / 12, 0.0, -25.0 / 16, 25.0 / 16]
A[5, :5] = [1.0 / 20, 0.0, 0.0, 1.0 / 4, 1.0 / 5]
A[6, :6] = [-25.0 / 108, 0.0, 0.0, 125.0 / 108, -65.0 / 27, 125.0 / 54]
A[7, :7] = [31.0 / 300, 0.0, 0.0, 0.0, 61.0 / 225, -2.0 / 9, 13.0 / 900]
A[8, :8] = [2.0, 0.0, 0.0, -53.0 / 6, 704.0 / 45, -107.0 / 9, 67.0 / 90, 3.0]
A[9, :9] = [-91.0 / 108, 0.0, 0.0, 23.0 / 108, -976.0 / 135, 311.0 / 54, -19.0 / 60,
            17.0 / 6, -1.0 / 12]
A[10, :10] = [2383.0 / 4100, 0.0, 0.0, -341.0 / 164, 4496.0 / 1025, -301.0 / 82,
              2133.0 / 4100, 45.0 / 82, 45.0 / 164, 18.0 / 41]
A[11, :11] = [3.0 / 205, 0.0, 0.0, 0.0, 0.0, -6.0 / 41, -3.0 / 205, -3.0 / 41,
              3.0 / 41, 6.0 / 41, 0.0]
A[12, :12] = [-1777.0 / 4100, 0.0, 0.0, -341.0 / 164, 4496.0 / 1025, -289.0 / 82,
              2193.0 / 4100, 51.0 / 82, 33.0 / 164, 12.0 / 41, 0.0, 1.0]

B7 = np.array([41.0 / 840, 0.0, 0.0, 0.0, 0.0, 34.0 / 105, 9.0 / 35, 9.0 / 35,
               9.0 / 280, 9.0 / 280, 41.0 / 840, 0.0, 0.0])
B8 = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 34.0 / 105, 9.0 / 35, 9.0 / 35,
               9.0 / 280, 9.0 / 280, 0.0, 41.0 / 840, 41.0 / 840])
ERR = B7 - B8

ORDER = 7

# exit codes
REACHED_EXIT = 0
LEFT_WINDOW = 1
TIME_CAP = 2
STEP_FAILURE = 3


def _build(rhs, jit=True):
    """Return ``integrate`` specialised to ``rhs`` (compiled when ``jit``)."""

    def step(z, h, par, sign, K, buf, znew, err):
        for s in range(13):
            for i in range(3):
                acc = z[i]
                for j in range(s):
                    acc += h * A[s, j] * K[j, i]
                buf[i] = acc
            rhs(buf, par, K[s])
            for i in range(3):
                K[s, i] = sign * K[s, i]
        for i in range(3):
            acc8 = 0.0
            acce = 0.0
            for s in range(13):
                acc8 += B8[s] * K[s, i]
                acce += ERR[s] * K[s, i]
            znew[i] = z[i] + h * acc8
            err[i] = h * acce

    if jit:
        step = numba.njit(nogil=True)(step)

    def bisect(z, h, par, sign, K, buf, ztry, etry, kind, level):
        # Shortest step length at which the event has fired.
        # kind 0: x <= level, kind 1: x >= level, kind 2: |p| >= level.
        lo = 0.0
        hi = h
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            step(z, mid, par, sign, K, buf, ztry, etry)
            if kind == 0:
                fired = ztry[0] <= level
            elif kind == 1:
                fired = ztry[0] >= level
            else:
                fired = abs(ztry[1]) >= level
            if fired:
                hi = mid
            else:
                lo = mid
        return hi

    if jit:
        bisect = numba.njit(nogil=True)(bisect)

    def integrate(z0, par, t_cap, tol, x_exit, x_hi, p_abs_max, markers, h0,
                  max_steps, reverse, record):
        sign = -1.0 if reverse else 1.0
        K = np.zeros((13, 4))
        buf = np.zeros(3)
        znew = np.zeros(3)
        err = np.zeros(3)
        ztry = np.zeros(3)
        etry = np.zeros(3)
        out = np.zeros(4)
        z = z0.copy()
        rhs(z, par, out)
        H0 = out[3]
        drift = 0.0
        nm = markers.shape[0]
        marker_t = np.full(nm, np.nan)

        ts = [0.0]
        xs = [z[0]]
        ps = [z[1]]
        ss = [z[2]]

        t = 0.0
        h = h0
        code = STEP_FAILURE
        nsteps = 0
        while True:
            if nsteps >= max_steps:
                code = STEP_FAILURE
                break
            capped = False
            if t + h >= t_cap:
                h = t_cap - t
                capped = True
            step(z, h, par, sign, K, buf, znew, err)
            en = 0.0
            finite = True
            for i in range(3):
                if not np.isfinite(znew[i]):
                    finite = False
                sc = tol + tol * max(abs(z[i]), abs(znew[i]))
                if sc < 1e-300:
                    sc = 1e-300
                r = abs(err[i]) / sc
                if r > en:
                    en = r
            if not finite:
                en = 1e10
            if en > 1.0:
                fac = 0.9 * en ** (-1.0 / 8.0)
                if fac < 0.2:
                    fac = 0.2
                h = h * fac
                if h < 1e-14 * max(1.0, abs(t)):
                    code = STEP_FAILURE
                    break
                continue
            nsteps += 1

            # terminal events: earliest crossing inside this step wins
            best_h = np.inf
            best_code = -1
            if znew[0] <= x_exit and z[0] > x_exit:
                hh = bisect(z, h, par, sign, K, buf, ztry, etry, 0, x_exit)
                if hh < best_h:
                    best_h = hh
                    best_code = REACHED_EXIT
            if znew[0] >= x_hi and z[0] < x_hi:
                hh = bisect(z, h, par, sign, K, buf, ztry, etry, 1, x_hi)
                if hh < best_h:
                    best_h = hh
                    best_code = LEFT_WINDOW
            if abs(znew[1]) >= p_abs_max and abs(z[1]) < p_abs_max:
                hh = bisect(z, h, par, sign, K, buf, ztry, etry, 2, p_abs_max)
                if hh < best_h:
                    best_h = hh
                    best_code = LEFT_WINDOW

            for m in range(nm):
                if np.isnan(marker_t[m]) and znew[0] <= markers[m] and z[0] > markers[m]:
                    hh = bisect(z, h, par, sign, K, buf, ztry, etry, 0, markers[m])
                    if hh <= best_h:
                        marker_t[m] = t + hh

            if best_code >= 0:
                step(z, best_h, par, sign, K, buf, znew, err)
                t = t + best_h
                for i in range(3):
                    z[i] = znew[i]
                rhs(z, par, out)
                d = abs(out[3] - H0)
                if d > drift:
                    drift = d
                ts.append(t)
                xs.append(z[0])
                ps.append(z[1])
                ss.append(z[2])
                code = best_code
                break

            t = t + h
            for i in range(3):
                z[i] = znew[i]
            rhs(z, par, out)
            d = abs(out[3] - H0)
            if d > drift:
                drift = d
            if record or capped:
                ts.append(t)
                xs.append(z[0])
                ps.append(z[1])
                ss.append(z[2])
            if capped:
                code = TIME_CAP
                break
            fac = 0.9 * en ** (-1.0 / 8.0) if en > 0 else 5.0
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
            h = h * fac

        if ts[-1] != t:
            ts.append(t)
            xs.append(z[0])
            ps.append(z[1])
            ss.append(z[2])
        return (np.array(ts), np.array(xs), np.array(ps), np.array(ss), code, t,
                marker_t, drift, nsteps)

    if jit:
        integrate = numba.njit(nogil=True)(integrate)
    return integrate


_cache = {}


def integrator_for(rhs):
    """Integrator for ``rhs``; built once per callable.

    Numba-compiled right-hand sides get a compiled integrator, anything else
    runs the same code on the interpreter.
    """
    hit = _cache.get(id(rhs))
    if hit is not None and hit[0] is rhs:
        return hit[1]
    fn = _build(rhs, jit=isinstance(rhs, numba.core.registry.CPUDispatcher))
    _cache[id(rhs)] = (rhs, fn)
    return fn
