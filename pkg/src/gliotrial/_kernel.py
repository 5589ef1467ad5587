"""Compiled integration kernel: Dormand-Prince 5(4) with impulses.

Works in capacity-scaled variables (cell compartments divided by K) so the
error control sees O(1) numbers.  One kernel call runs a whole patient:
it integrates segment by segment between dose times, applies the impulses,
watches for the fatal-burden crossing (located on the dense output by
bisection) and for eradication, and optionally records every accepted step
together with its quartic interpolation coefficients.

Falls back to pure Python when numba is unavailable; everything still
runs, just slowly.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


# Parameter vector layout (values already capacity-scaled where noted).
P_R1 = 0
P_R2 = 1
P_ALPHA1 = 2
P_ALPHA2K = 3   # alpha2 * K
P_ALPHA3 = 4
P_EPS1 = 5
P_RHO1 = 6
P_RHO2 = 7
P_RHO3 = 8
P_RHO4 = 9
P_G1K = 10      # g1 / K
P_G2K = 11
P_G3K = 12
P_MU = 13
P_VK = 14       # constant CAR-T infusion, cells/day / K
P_E0C = 15      # constant chemo source
NPARAMS = 16

# Dose event component codes (index into the state vector).
COMP_CART = 3
COMP_CHEMO = 4

# Stop statuses.
STOP_HORIZON = 0
STOP_FATAL = 1
STOP_ERADICATED = 2
STOP_UNDERFLOW = 3

# Quartic dense-output coefficients for the Dormand-Prince pair: the
# interpolant is y(t0 + u*h) = y0 + h * (K^T @ _DENSE) @ [u, u^2, u^3, u^4].
_DENSE = np.array([
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
     -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
     69997945.0 / 29380423.0],
])


@njit(cache=True, nogil=True)
def _deriv(y, p, out):
    x = y[0]
    rc = y[1]
    re = y[2]
    w = y[3]
    e = y[4]
    tot = x + rc + re
    crowd = 1.0 - tot
    chemo = (p[P_ALPHA1] + p[P_EPS1]) * e
    out[0] = p[P_R1] * x * crowd - chemo * x - p[P_ALPHA2K] * w * x
    out[1] = p[P_R1] * rc * crowd - chemo * rc
    out[2] = (p[P_R2] * re * crowd - p[P_ALPHA2K] * w * re
              + p[P_EPS1] * e * (x + rc))
    out[3] = (-p[P_RHO1] * w
              + p[P_RHO2] * x * w / (p[P_G1K] + x)
              + p[P_RHO3] * re * w / (p[P_G2K] + re)
              - p[P_RHO4] * tot * w / (p[P_G3K] + w)
              - p[P_ALPHA3] * e * w
              + p[P_VK])
    out[4] = p[P_E0C] - p[P_MU] * e


@njit(cache=True, nogil=True)
def _dense_coeffs(k1, k3, k4, k5, k6, k7, q):
    for i in range(5):
        for j in range(4):
            q[i, j] = (k1[i] * _DENSE[0, j] + k3[i] * _DENSE[2, j]
                       + k4[i] * _DENSE[3, j] + k5[i] * _DENSE[4, j]
                       + k6[i] * _DENSE[5, j] + k7[i] * _DENSE[6, j])


@njit(cache=True, nogil=True)
def _dense_eval(y0, q, h, u, i):
    return y0[i] + h * u * (q[i, 0] + u * (q[i, 1] + u * (q[i, 2] + u * q[i, 3])))


@njit(cache=True, nogil=True)
def simulate(y0, t0, ev_t, ev_comp, ev_amt, p,
             rtol, atol, max_step, horizon, fatal, erad, event_tol, record):
    """Integrate one patient from t0 to the horizon or a stop event.

    ev_t must be sorted ascending with ev_t >= t0; ev_comp selects the
    state component each impulse adds to and ev_amt is the (scaled) jump.
    fatal and erad are capacity-scaled tumor thresholds.  Returns
    (status, t_stop, y_stop, rec_t, rec_h, rec_y, rec_q, n_rec); the
    recording arrays are empty unless record is True.
    """
    y = y0.copy()
    ynew = np.empty(5)
    ytmp = np.empty(5)
    k1 = np.empty(5)
    k2 = np.empty(5)
    k3 = np.empty(5)
    k4 = np.empty(5)
    k5 = np.empty(5)
    k6 = np.empty(5)
    k7 = np.empty(5)
    qtmp = np.empty((5, 4))

    cap = 512 if record else 0
    rec_t = np.empty(cap)
    rec_h = np.empty(cap)
    rec_y = np.empty((cap, 5))
    rec_q = np.empty((cap, 5, 4))
    nrec = 0

    safe = 0.9
    beta = 0.04
    expo1 = 0.2 - 0.75 * beta
    facold = 1e-4

    t = t0
    h = min(max_step, 1e-3)
    fsal = False
    status = -1
    t_stop = horizon
    y_stop = y.copy()

    i_ev = 0
    n_ev = ev_t.shape[0]

    while status == -1:
        if i_ev < n_ev and ev_t[i_ev] < horizon:
            t_end = ev_t[i_ev]
            final_segment = False
        else:
            t_end = horizon
            final_segment = True

        while t_end - t > 1e-12 * max(1.0, abs(t_end)):
            if h > max_step:
                h = max_step
            hit_end = t + 1.05 * h >= t_end
            if hit_end:
                h = t_end - t
            if h < 1e-11 * max(1.0, abs(t)):
                status = STOP_UNDERFLOW
                t_stop = t
                y_stop = y.copy()
                break

            if not fsal:
                _deriv(y, p, k1)
                fsal = True

            for i in range(5):
                ytmp[i] = y[i] + h * (0.2 * k1[i])
            _deriv(ytmp, p, k2)
            for i in range(5):
                ytmp[i] = y[i] + h * (3.0 / 40.0 * k1[i] + 9.0 / 40.0 * k2[i])
            _deriv(ytmp, p, k3)
            for i in range(5):
                ytmp[i] = y[i] + h * (44.0 / 45.0 * k1[i] - 56.0 / 15.0 * k2[i]
                                      + 32.0 / 9.0 * k3[i])
            _deriv(ytmp, p, k4)
            for i in range(5):
                ytmp[i] = y[i] + h * (19372.0 / 6561.0 * k1[i]
                                      - 25360.0 / 2187.0 * k2[i]
                                      + 64448.0 / 6561.0 * k3[i]
                                      - 212.0 / 729.0 * k4[i])
            _deriv(ytmp, p, k5)
            for i in range(5):
                ytmp[i] = y[i] + h * (9017.0 / 3168.0 * k1[i]
                                      - 355.0 / 33.0 * k2[i]
                                      + 46732.0 / 5247.0 * k3[i]
                                      + 49.0 / 176.0 * k4[i]
                                      - 5103.0 / 18656.0 * k5[i])
            _deriv(ytmp, p, k6)
            for i in range(5):
                ynew[i] = y[i] + h * (35.0 / 384.0 * k1[i]
                                      + 500.0 / 1113.0 * k3[i]
                                      + 125.0 / 192.0 * k4[i]
                                      - 2187.0 / 6784.0 * k5[i]
                                      + 11.0 / 84.0 * k6[i])
            _deriv(ynew, p, k7)

            err = 0.0
            for i in range(5):
                ei = h * (71.0 / 57600.0 * k1[i]
                          - 71.0 / 16695.0 * k3[i]
                          + 71.0 / 1920.0 * k4[i]
                          - 17253.0 / 339200.0 * k5[i]
                          + 22.0 / 525.0 * k6[i]
                          - 1.0 / 40.0 * k7[i])
                sk = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                r = ei / sk
                err += r * r
            err = np.sqrt(err / 5.0)

            if not np.isfinite(err):
                h *= 0.2
                continue

            if err > 1.0:
                fac11 = err ** expo1
                h = h / min(5.0, fac11 / safe)
                continue

            # accepted
            need_dense = record
            tot_old = y[0] + y[1] + y[2]
            tot_new = ynew[0] + ynew[1] + ynew[2]
            crossed = tot_old < fatal and tot_new >= fatal
            if crossed:
                need_dense = True
            if need_dense:
                _dense_coeffs(k1, k3, k4, k5, k6, k7, qtmp)
            if record:
                if nrec == cap:
                    cap2 = cap * 2
                    nt = np.empty(cap2)
                    nh = np.empty(cap2)
                    ny = np.empty((cap2, 5))
                    nq = np.empty((cap2, 5, 4))
                    nt[:cap] = rec_t
                    nh[:cap] = rec_h
                    ny[:cap] = rec_y
                    nq[:cap] = rec_q
                    rec_t, rec_h, rec_y, rec_q = nt, nh, ny, nq
                    cap = cap2
                rec_t[nrec] = t
                rec_h[nrec] = h
                for i in range(5):
                    rec_y[nrec, i] = y[i]
                    for j in range(4):
                        rec_q[nrec, i, j] = qtmp[i, j]
                nrec += 1

            if crossed:
                lo = 0.0
                hi = 1.0
                while h * (hi - lo) > event_tol:
                    mid = 0.5 * (lo + hi)
                    tot_mid = (_dense_eval(y, qtmp, h, mid, 0)
                               + _dense_eval(y, qtmp, h, mid, 1)
                               + _dense_eval(y, qtmp, h, mid, 2))
                    if tot_mid >= fatal:
                        hi = mid
                    else:
                        lo = mid
                u = hi
                status = STOP_FATAL
                t_stop = t + h * u
                for i in range(5):
                    y_stop[i] = _dense_eval(y, qtmp, h, u, i)
                break

            t = t_end if hit_end else t + h
            for i in range(5):
                y[i] = ynew[i]
                k1[i] = k7[i]
            fsal = True

            if tot_new < erad:
                status = STOP_ERADICATED
                t_stop = t
                y_stop = y.copy()
                break

            fac11 = err ** expo1
            fac = fac11 / facold ** beta
            fac = max(0.1, min(5.0, fac / safe))
            facold = max(err, 1e-4)
            h = h / fac

        if status != -1:
            break
        t = t_end
        if final_segment:
            status = STOP_HORIZON
            t_stop = horizon
            y_stop = y.copy()
            break
        while i_ev < n_ev and ev_t[i_ev] == t_end:
            y[int(ev_comp[i_ev])] += ev_amt[i_ev]
            i_ev += 1
        fsal = False

    return status, t_stop, y_stop, rec_t, rec_h, rec_y, rec_q, nrec
