"""Compiled inner loops (RK4, Euler-Maruyama, Milstein) for LV systems.

All kernels take the interaction matrix in the ``dy_i = y_i (r + sum_j a_ij y_j)``
convention and return a status code instead of raising, so that callers can
attach context to the error.
"""

import numpy as np
from numba import njit

OK = 0
DIVERGED = 1
NEGATIVE = 2

BLOWUP = 1e12
CLAMP_TOL = 1e-14


@njit(cache=True)
def _field(A, r, y, out):
    n = y.shape[0]
    for i in range(n):
        s = r
        for j in range(n):
            s += A[i, j] * y[j]
        out[i] = y[i] * s


@njit(cache=True)
def _log_field(A, r, z, mask, ey, out):
    # dz_i/dt = r + sum_j a_ij exp(z_j) over positive coordinates
    n = z.shape[0]
    for j in range(n):
        ey[j] = np.exp(z[j]) if mask[j] else 0.0
    for i in range(n):
        s = r
        for j in range(n):
            s += A[i, j] * ey[j]
        out[i] = s if mask[i] else 0.0


@njit(cache=True)
def _rk4_step(A, r, y, h, k1, k2, k3, k4, tmp, out):
    n = y.shape[0]
    _field(A, r, y, k1)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    _field(A, r, tmp, k2)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    _field(A, r, tmp, k3)
    for i in range(n):
        tmp[i] = y[i] + h * k3[i]
    _field(A, r, tmp, k4)
    for i in range(n):
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def _check(y):
    norm = 0.0
    for i in range(y.shape[0]):
        v = y[i]
        if v < 0.0:
            if v > -CLAMP_TOL:
                y[i] = 0.0
            else:
                return NEGATIVE
        norm += v * v
    if not norm < BLOWUP * BLOWUP:
        return DIVERGED
    return OK


@njit(cache=True)
def rk4_steps(A, r, y0, hs, out):
    """RK4 through the variable steps ``hs``; out[k] is the state after k steps."""
    n = y0.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    out[0, :] = y0
    for k in range(hs.shape[0]):
        _rk4_step(A, r, out[k], hs[k], k1, k2, k3, k4, tmp, out[k + 1])
        status = _check(out[k + 1])
        if status != OK:
            return status, k + 1
    return OK, hs.shape[0]


@njit(cache=True)
def rk4_log_steps(A, r, z0, mask, hs, out):
    """RK4 on log-coordinates for the positive coordinates selected by ``mask``."""
    n = z0.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    ey = np.empty(n)
    out[0, :] = z0
    for k in range(hs.shape[0]):
        h = hs[k]
        z = out[k]
        _log_field(A, r, z, mask, ey, k1)
        for i in range(n):
            tmp[i] = z[i] + 0.5 * h * k1[i]
        _log_field(A, r, tmp, mask, ey, k2)
        for i in range(n):
            tmp[i] = z[i] + 0.5 * h * k2[i]
        _log_field(A, r, tmp, mask, ey, k3)
        for i in range(n):
            tmp[i] = z[i] + h * k3[i]
        _log_field(A, r, tmp, mask, ey, k4)
        big = 0.0
        for i in range(n):
            out[k + 1, i] = z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if mask[i] and out[k + 1, i] > big:
                big = out[k + 1, i]
        if not big < 27.6:  # exp(27.6) ~ 1e12
            return DIVERGED, k + 1
    return OK, hs.shape[0]


@njit(cache=True)
def sde_ito(A, r_drift, sigma, y0, dw, h, milstein, out):
    """Euler-Maruyama (or Milstein) for dy_i = y_i (r + (A y)_i) dt + sigma y_i dW.

    Negative excursions are clamped to 0 and counted.
    """
    n = y0.shape[0]
    out[0, :] = y0
    clamps = 0
    drift = np.empty(n)
    for k in range(dw.shape[0]):
        y = out[k]
        _field(A, r_drift, y, drift)
        d = dw[k]
        corr = 0.5 * sigma * sigma * (d * d - h) if milstein else 0.0
        norm = 0.0
        for i in range(n):
            v = y[i] + drift[i] * h + sigma * y[i] * d + corr * y[i]
            if v < 0.0:
                v = 0.0
                clamps += 1
            out[k + 1, i] = v
            norm += v * v
        if not norm < BLOWUP * BLOWUP:
            return DIVERGED, k + 1, clamps
    return OK, dw.shape[0], clamps
