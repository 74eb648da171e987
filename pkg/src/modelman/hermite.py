"""Quintic Hermite blends used to join closed-form pieces with C2 contact."""

import numpy as np


def quintic_hermite(a, b, jet_a, jet_b):
    """Coefficients ``c[0..5]`` of the quintic in ``t = r - a`` matching jets.

    ``jet_a`` and ``jet_b`` are ``(value, first, second)`` derivatives at
    ``a`` and ``b``.
    """
    h = float(b - a)
    y0, d0, s0 = (float(v) for v in jet_a)
    y1, d1, s1 = (float(v) for v in jet_b)
    c0, c1, c2 = y0, d0, 0.5 * s0
    # remaining three coefficients from the conditions at t = h
    A = np.array([
        [h**3, h**4, h**5],
        [3 * h**2, 4 * h**3, 5 * h**4],
        [6 * h, 12 * h**2, 20 * h**3],
    ])
    rhs = np.array([
        y1 - (c0 + c1 * h + c2 * h**2),
        d1 - (c1 + 2 * c2 * h),
        s1 - 2 * c2,
    ])
    c3, c4, c5 = np.linalg.solve(A, rhs)
    return np.array([c0, c1, c2, c3, c4, c5])


def poly_jet(coeffs, t):
    """Value, first and second derivative of ``sum c_k t**k``."""
    t = np.asarray(t, dtype=float)
    c = np.asarray(coeffs, dtype=float)
    p = np.polynomial.polynomial
    d1 = p.polyder(c)
    d2 = p.polyder(d1)
    return p.polyval(t, c), p.polyval(t, d1), p.polyval(t, d2)


def smoothstep(t):
    """C2 step ``10t^3 - 15t^4 + 6t^5`` clamped to [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t**3 * (10.0 + t * (-15.0 + 6.0 * t))


def smoothstep_integral(t):
    """``∫_0^t smoothstep``; equals 1/2 at ``t = 1``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t**4 * (2.5 + t * (-3.0 + t))


def bump(t):
    """C2 bump ``64 t^3 (1-t)^3`` with peak 1 at ``t = 1/2``, zero outside [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return 64.0 * (t * (1.0 - t)) ** 3


BUMP_MASS = 64.0 / 140.0


def bump_integral(t):
    """``∫_0^t bump``; equals ``BUMP_MASS = 16/35`` at ``t = 1``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return 64.0 * t**4 * (0.25 + t * (-0.6 + t * (0.5 - t / 7.0)))
