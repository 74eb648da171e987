"""Adaptive Gauss-Kronrod quadrature carried out in log space.

Every integrand here is positive and may be astronomically large
(areas like ``exp(r**3)``), so integrands are passed as their natural
logarithm and every result is returned as a logarithm as well.  Each
panel is rescaled by its own maximum before exponentiation.

The panel loop is vectorised: all pending panels of one refinement
round are evaluated with a single call of the integrand.
"""

import threading

import numpy as np
from scipy.special import logsumexp

from .errors import NumericError

# QUADPACK qk15 abscissae/weights (Kronrod 15 points, embedded Gauss 7).
_XK_HALF = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK_HALF = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG_HALF = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

XK = np.concatenate([-_XK_HALF[:-1], _XK_HALF[::-1]])
WK = np.concatenate([_WK_HALF[:-1], _WK_HALF[::-1]])
# Gauss nodes sit at the odd positions of the half table.
WG = np.zeros(15)
for j, w in zip([1, 3, 5], _WG_HALF[:3]):
    WG[j] = w
    WG[14 - j] = w
WG[7] = _WG_HALF[3]


def _eval_log(log_g, x):
    lg = np.asarray(log_g(x), dtype=float)
    if lg.shape != x.shape:
        lg = np.broadcast_to(lg, x.shape)
    bad = np.isnan(lg) | np.isposinf(lg)
    if bad.any():
        where = float(x[bad][0])
        raise NumericError(f"integrand not finite at r={where!r}", where=where)
    return lg


def gk15_log(log_g, a, b):
    """One Gauss-Kronrod panel per entry of ``a``/``b``.

    Returns ``(log_kronrod, log_error)`` arrays; the error is
    ``|K15 - G7|`` which overestimates the Kronrod error for smooth
    integrands.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[..., None] + h[..., None] * XK
    lg = _eval_log(log_g, x)
    m = lg.max(axis=-1)
    finite = np.isfinite(m)
    shift = np.where(finite, m, 0.0)
    v = np.exp(lg - shift[..., None])
    k = v @ WK
    g = v @ WG
    with np.errstate(divide="ignore"):
        log_k = np.where(finite, shift + np.log(h * k), -np.inf)
        log_e = np.where(finite, shift + np.log(h * np.abs(k - g)), -np.inf)
    return log_k, log_e


def integrate_log(log_g, a, b, rtol=1e-10, breakpoints=(), max_panels=2_000_000,
                  full_output=False, local_only=False):
    """Return ``log ∫_a^b exp(log_g(r)) dr`` by adaptive GK15.

    A panel is accepted when its error estimate is below ``rtol`` times
    its own value, or below ``1e-3 * rtol`` times the running estimate
    of the whole integral (negligible panels are not refined further).

    Parameters
    ----------
    log_g : callable
        Vectorised natural log of a nonnegative integrand.
    a, b : float
        Finite limits, ``a <= b``.
    breakpoints : iterable of float
        Interior points where the integrand is only piecewise smooth.
    local_only : bool
        Drop the negligible-panel shortcut so every panel meets ``rtol``
        on its own; needed when partial sums are read off the panels.
    """
    a = float(a)
    b = float(b)
    if b < a:
        raise ValueError("integrate_log requires a <= b")
    if b == a:
        return (-np.inf, []) if full_output else -np.inf
    pts = sorted({a, b, *[float(p) for p in breakpoints if a < p < b]})
    lo = np.array(pts[:-1])
    hi = np.array(pts[1:])
    accepted_lo, accepted_hi, accepted_val = [], [], []
    log_rtol = np.log(rtol)
    total = -np.inf
    n_done = 0
    while lo.size:
        log_k, log_e = gk15_log(log_g, lo, hi)
        total_est = logsumexp(np.concatenate([[total], log_k]))
        tiny = (hi - lo) <= 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(lo))
        ok = (
            np.isneginf(log_k)
            | (log_e <= log_rtol + log_k)
            | ((not local_only) & (log_e <= log_rtol - 3 * np.log(10.0) + total_est))
            | tiny
        )
        if ok.any():
            accepted_lo.append(lo[ok])
            accepted_hi.append(hi[ok])
            accepted_val.append(log_k[ok])
            total = logsumexp(np.concatenate([[total], log_k[ok]]))
        n_done += int(ok.sum())
        lo, hi = lo[~ok], hi[~ok]
        if n_done + 2 * lo.size > max_panels:
            raise NumericError(
                f"adaptive quadrature exceeded {max_panels} panels on [{a}, {b}]",
                where=float(lo[0]) if lo.size else a,
            )
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    if not full_output:
        return float(total)
    order = np.argsort(np.concatenate(accepted_lo))
    panels = (
        np.concatenate(accepted_lo)[order],
        np.concatenate(accepted_hi)[order],
        np.concatenate(accepted_val)[order],
    )
    return float(total), panels


def integrate(g, a, b, rtol=1e-10, breakpoints=()):
    """Plain-value wrapper of :func:`integrate_log` for ``g >= 0``."""

    def log_g(x):
        with np.errstate(divide="ignore"):
            return np.log(g(x))

    return float(np.exp(integrate_log(log_g, a, b, rtol=rtol, breakpoints=breakpoints)))


class LogCumulative:
    """Memoised ``log ∫_a^r exp(log_g)`` for ``r`` in ``[a, b]``.

    Knots are the endpoints of the panels accepted by the adaptive rule;
    the table grows block by block as larger ``r`` are requested.  An
    evaluation between knots adds one GK15 panel on ``[knot, r]``, which
    sits inside an accepted panel and therefore inherits its accuracy.

    Extension is serialised by a lock; readers only ever see fully built
    arrays, so concurrent evaluation is safe.
    """

    def __init__(self, log_g, a, b=np.inf, rtol=1e-10, block=1.0, breakpoints=()):
        self.log_g = log_g
        self.a = float(a)
        self.b = float(b)
        self.rtol = rtol
        self.block = float(block)
        self.breakpoints = tuple(sorted(float(p) for p in breakpoints))
        self._knots = np.array([self.a])
        self._cum = np.array([-np.inf])
        self._lock = threading.Lock()

    @property
    def reach(self):
        return float(self._knots[-1])

    def extend_to(self, r):
        r = min(float(r), self.b)
        if r <= self.reach:
            return
        with self._lock:
            knots, cum = self._knots, self._cum
            x = float(knots[-1])
            new_k, new_c = [knots], [cum]
            last = float(cum[-1])
            while x < r:
                # whole blocks keep the knot set independent of request order
                y = min(self.b, x + self.block)
                _, (plo, phi, pval) = integrate_log(
                    self.log_g, x, y, rtol=self.rtol,
                    breakpoints=self.breakpoints, full_output=True, local_only=True,
                )
                c = np.logaddexp.accumulate(np.concatenate([[last], pval]))[1:]
                new_k.append(phi)
                new_c.append(c)
                last = float(c[-1])
                x = y
            self._knots = np.concatenate(new_k)
            self._cum = np.concatenate(new_c)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if r.size == 0:
            return r.copy()
        if np.any(r < self.a) or np.any(r > self.b):
            raise ValueError(f"LogCumulative evaluated outside [{self.a}, {self.b}]")
        self.extend_to(float(r.max()))
        knots, cum = self._knots, self._cum
        i = np.clip(np.searchsorted(knots, r, side="right") - 1, 0, knots.size - 1)
        base = knots[i]
        log_k, _ = gk15_log(self.log_g, base, r)
        log_k = np.where(r > base, log_k, -np.inf)
        out = np.logaddexp(cum[i], log_k)
        return out if out.ndim else float(out)
