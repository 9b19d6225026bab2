"""JIT-compiled adaptive Runge-Kutta core for the network dynamics.

One embedded Dormand-Prince 5(4) pair drives every integration in the
package. A step is accepted when the RMS norm of the embedded error
estimate satisfies ``RMS(err) < atol + rtol * RMS(x)`` with x the state
at the start of the step; step sizes follow a standard PI controller.

The right-hand side is hard-coded to ``sign * (-D x + W f(x)) + c`` with
``c`` a constant forcing vector (the product of the input matrix with the
active input value), which is the only vector field the package ever
integrates. Keeping the whole loop inside one njit function is what makes
the experiment sweeps affordable.
"""

import numpy as np
from numba import njit

# Status codes returned by the core loop.
STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_DIVERGED = 2
STATUS_UNDERFLOW = 3

# Any state component beyond this magnitude counts as divergence
# (backward flows of contracting systems blow up exponentially).
DIVERGENCE_LIMIT = 1.0e12

# Activation codes (mirrors model.Activation kinds).
KIND_LINEAR = 0
KIND_TANH = 1
KIND_MINDY = 2

# Dormand-Prince 5(4) tableau. Row i of _A holds a_{i,j}; the 7th stage
# row equals the 5th-order weights (FSAL).
_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ]
)

# Difference between the 5th- and 4th-order weights (error estimator).
_E = np.array(
    [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
# PI controller exponents for a 4th-order error estimator.
_EXPO_ERR = 0.17
_EXPO_OLD = 0.04


@njit(cache=True, nogil=True)
def _rhs(ddiag, w, kind, alpha, slope, sign, c, x, out):
    d = x.shape[0]
    if kind == KIND_LINEAR:
        f = x
    elif kind == KIND_TANH:
        f = np.tanh(x)
    else:
        f = np.empty(d)
        for i in range(d):
            up = slope * x[i] + 0.5
            um = slope * x[i] - 0.5
            a2 = alpha[i] * alpha[i]
            f[i] = np.sqrt(a2 + up * up) - np.sqrt(a2 + um * um)
    wf = np.dot(w, f)
    for i in range(d):
        out[i] = sign * (-ddiag[i] * x[i] + wf[i]) + c[i]


@njit(cache=True, nogil=True)
def _rms(v):
    s = 0.0
    n = v.shape[0]
    for i in range(n):
        s += v[i] * v[i]
    return np.sqrt(s / n)


@njit(cache=True, nogil=True)
def integrate_segment(ddiag, w, kind, alpha, slope, sign, c, y0, t0, t1,
                      rtol, atol, max_steps):
    """Integrate the network ODE from t0 to t1 (t1 >= t0).

    Returns (terminal state, accepted steps, rejected steps, rhs
    evaluations, status code).
    """
    d = y0.shape[0]
    y = y0.copy()
    nfev = 0
    nacc = 0
    nrej = 0
    if t1 <= t0:
        return y, nacc, nrej, nfev, STATUS_OK

    k_stages = np.empty((7, d))
    ystage = np.empty(d)

    _rhs(ddiag, w, kind, alpha, slope, sign, c, y, k_stages[0])
    nfev += 1

    # Initial step size: one explicit Euler probe against the RMS scale.
    scale = atol + rtol * _rms(y)
    d0 = _rms(y) / scale
    d1 = _rms(k_stages[0]) / scale
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > t1 - t0:
        h0 = t1 - t0
    for i in range(d):
        ystage[i] = y[i] + h0 * k_stages[0, i]
    _rhs(ddiag, w, kind, alpha, slope, sign, c, ystage, k_stages[1])
    nfev += 1
    diff = 0.0
    for i in range(d):
        dd = k_stages[1, i] - k_stages[0, i]
        diff += dd * dd
    d2 = np.sqrt(diff / d) / scale / h0
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.2
    h = min(100.0 * h0, h1)
    if h > t1 - t0:
        h = t1 - t0

    t = t0
    err_old = 1e-4
    while t < t1:
        if nacc + nrej >= max_steps:
            return y, nacc, nrej, nfev, STATUS_BUDGET
        if h < 1e-14 * max(1.0, abs(t)):
            return y, nacc, nrej, nfev, STATUS_UNDERFLOW
        if t + h > t1:
            h = t1 - t

        for i in range(1, 7):
            for m in range(d):
                acc = 0.0
                for j in range(i):
                    aij = _A[i, j]
                    if aij != 0.0:
                        acc += aij * k_stages[j, m]
                ystage[m] = y[m] + h * acc
            _rhs(ddiag, w, kind, alpha, slope, sign, c, ystage, k_stages[i])
            nfev += 1
        # ystage now holds the 5th-order solution (last tableau row equals
        # the 5th-order weights), k_stages[6] its derivative.

        err_sq = 0.0
        for m in range(d):
            e = 0.0
            for j in range(7):
                ej = _E[j]
                if ej != 0.0:
                    e += ej * k_stages[j, m]
            e *= h
            err_sq += e * e
        err_rms = np.sqrt(err_sq / d)
        tol = atol + rtol * _rms(y)
        ratio = err_rms / tol
        if not np.isfinite(ratio):
            ratio = 1e10

        if ratio <= 1.0:
            t += h
            finite = True
            for m in range(d):
                y[m] = ystage[m]
                k_stages[0, m] = k_stages[6, m]
                if not np.isfinite(y[m]) or abs(y[m]) > DIVERGENCE_LIMIT:
                    finite = False
            nacc += 1
            if not finite:
                return y, nacc, nrej, nfev, STATUS_DIVERGED
            r = max(ratio, 1e-10)
            fac = _SAFETY * r ** (-_EXPO_ERR) * err_old ** _EXPO_OLD
            if fac > _MAX_FACTOR:
                fac = _MAX_FACTOR
            elif fac < _MIN_FACTOR:
                fac = _MIN_FACTOR
            h *= fac
            err_old = r
        else:
            nrej += 1
            fac = _SAFETY * ratio ** (-0.2)
            if fac < _MIN_FACTOR:
                fac = _MIN_FACTOR
            h *= fac

    return y, nacc, nrej, nfev, STATUS_OK
