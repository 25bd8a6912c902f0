"""Dormand-Prince 5(4) stepping for complex-valued ODE systems.

Only the single-step kernel and the step-size controller live here; callers
own the loop, because both the leaf tracer and the Riccati transport switch
charts between steps.
"""

import numpy as np

from .errors import StepCollapseError

MIN_STEP = 1e-12

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def dp54_step(fun, t, y, h):
    """One step; returns (y_next, error_estimate_vector)."""
    y = np.asarray(y, dtype=complex)
    k = np.empty((7,) + y.shape, dtype=complex)
    k[0] = fun(t, y)
    for i in range(1, 7):
        yi = y + h * np.tensordot(_A[i], k[:i], axes=1)
        k[i] = fun(t + _C[i] * h, yi)
    y5 = y + h * np.tensordot(_B5, k, axes=1)
    err = h * np.tensordot(_E, k, axes=1)
    return y5, err


def next_step(h, ratio, grow=5.0, shrink=0.2, safety=0.9):
    """Scale h for an error ratio err/allowed (accepted when ratio <= 1)."""
    if ratio == 0:
        return h * grow
    return h * min(grow, max(shrink, safety * ratio ** (-0.2)))


def integrate(fun, t0, y0, t1, tol, h0=None, h_max=None):
    """Integrate from t0 to t1 with local error per unit step <= tol.

    Returns the final state.  Raises StepCollapseError with the last good
    (t, y) if the step shrinks below MIN_STEP.
    """
    t, y = float(t0), np.asarray(y0, dtype=complex)
    span = t1 - t0
    if span == 0:
        return y
    direction = np.sign(span)
    h = abs(h0 if h0 is not None else span / 16.0)
    h_max = abs(h_max) if h_max is not None else abs(span)
    while direction * (t1 - t) > 1e-13 * max(1.0, abs(t1)):
        h = min(h, abs(t1 - t), h_max)
        if h < MIN_STEP:
            raise StepCollapseError(f"step collapsed below {MIN_STEP} at t={t}", state=(t, y))
        y_new, err = dp54_step(fun, t, y, direction * h)
        ratio = float(np.max(np.abs(err))) / (tol * h) if np.all(np.isfinite(y_new)) else np.inf
        if ratio <= 1.0:
            t += direction * h
            y = y_new
        h = next_step(h, ratio) if np.isfinite(ratio) else 0.25 * h
    return y
