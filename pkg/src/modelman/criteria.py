"""Numerical classification of improper integrals and volume-growth tests.

The classifier integrates ``g`` over doubling windows ``[r0 2^{m-1}, r0 2^m]``
and combines two pieces of evidence:

* a log-log least-squares fit ``g ≈ C r^{-p}`` over the last two decades;
* the per-unit-log-length increments ``J_m / log(R_m / R_{m-1})`` of the
  last three windows, which stay bounded below exactly when the integral
  grows at least logarithmically.

A convergent verdict additionally requires that the fitted power law
predicts the measured last-window increment, so a fit that merely happens
to have a steep slope cannot certify convergence.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InputError, NumericError
from .logspace import log1mexp, logsumexp
from .profile import radial_laplacian
from .quadrature import integrate_log

__all__ = [
    "Verdict",
    "ClassifierPolicy",
    "CriterionVerdict",
    "classify_improper_integral",
    "grigoryan",
    "model_completeness",
    "recurrence",
    "WoympProbe",
    "WoympReport",
    "woymp_report",
]


class Verdict(str, Enum):
    DIVERGES = "Diverges"
    CONVERGES = "Converges"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ClassifierPolicy:
    """Knobs of the doubling-window classifier.

    Attributes
    ----------
    m_max : int
        Number of doublings; the last window ends at ``r0 * 2**m_max``
        unless the integrand's reliable range ``r_max`` is shorter.
    tail_tolerance : float
        Relative agreement required between the fitted power law's
        prediction of the last window and its measured integral.
    fit_decades : float
        Width, in decades of ``r``, of the tail-exponent fit.
    """

    m_max: int = 40
    tail_tolerance: float = 1e-6
    fit_decades: float = 2.0
    rtol: float = 1e-10
    r0: float = 1.0
    fit_points: int = 65
    min_margin: float = 0.02
    sigma_factor: float = 3.0
    good_fit_residual: float = 0.05
    bounded_below_slack: float = 1e-6

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return ClassifierPolicy(**d)


@dataclass
class CriterionVerdict:
    verdict: Verdict
    r0: float
    R_max: float
    tail_exponent: float
    tail_sigma: float
    residual: float
    partial_integrals: list
    log_partial: list = field(default_factory=list)
    log_extrapolated_tail: float = math.nan
    log_increment_rates: list = field(default_factory=list)
    criterion: str = "integral"

    @property
    def extrapolated_tail(self):
        return math.exp(self.log_extrapolated_tail) if math.isfinite(self.log_extrapolated_tail) else (
            0.0 if self.log_extrapolated_tail == -math.inf else math.nan)

    @property
    def extrapolated_total(self):
        """``∫_{r0}^{R_max} g`` plus the power-law tail estimate (Converges only)."""
        return math.exp(np.logaddexp(self.log_partial[-1], self.log_extrapolated_tail))

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "criterion": self.criterion,
            "r0": self.r0,
            "R_max": self.R_max,
            "tail_exponent": self.tail_exponent,
            "tail_sigma": self.tail_sigma,
            "residual": self.residual,
            "extrapolated_tail": self.extrapolated_tail,
            "partial": [{"R": R, "I": I} for R, I in self.partial_integrals],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _wrap_plain(g):
    def log_g(r):
        v = np.asarray(g(r), dtype=float)
        if np.any(np.isnan(v)) or np.any(np.isinf(v)):
            bad = np.asarray(r)[~np.isfinite(np.broadcast_to(v, np.shape(r)))].ravel()[0]
            raise NumericError(f"integrand not finite at r={float(bad)!r}", where=float(bad))
        if np.any(v < 0):
            bad = np.asarray(r)[np.broadcast_to(v, np.shape(r)) < 0].ravel()[0]
            raise InputError(f"integrand negative at r={float(bad)!r}; g >= 0 is required")
        with np.errstate(divide="ignore"):
            return np.log(v)

    return log_g


def _window_edges(r0, policy, r_max):
    cap = r0 * 2.0 ** policy.m_max
    edges = [r0 * 2.0**m for m in range(policy.m_max + 1) if r0 * 2.0**m <= min(cap, r_max)]
    if r_max < cap and r_max > edges[-1] * (1 + 1e-12):
        edges.append(float(r_max))
    if len(edges) < 2:
        raise InputError(f"integration range [{r0}, {r_max}] is too short to classify")
    return np.array(edges)


def _fit_tail(log_g, R_end, r0, policy):
    lo = max(r0, R_end / 10.0**policy.fit_decades)
    r = np.geomspace(lo, R_end, policy.fit_points)
    y = np.asarray(log_g(r), dtype=float)
    if not np.all(np.isfinite(y)):
        return math.nan, math.nan, math.nan, math.nan
    x = np.log(r)
    fit = stats.linregress(x, y)
    resid = y - (fit.intercept + fit.slope * x)
    return -fit.slope, fit.stderr, float(np.sqrt(np.mean(resid**2))), fit.intercept


def _log_power_integral(log_C, p, a, b):
    """``log ∫_a^b C r^{-p} dr`` for ``p > 1``."""
    la, lb = math.log(a), math.log(b)
    return log_C + (1 - p) * la + float(log1mexp((p - 1) * (lb - la))) - math.log(p - 1)


def _geometric_decay(log_J, edges, p_hat, slack=1e-9):
    """Log of the last window ratio if the last full doubling windows shrink
    at a non-increasing ratio no larger than ``2^{1-p_hat}``; else None."""
    full = np.isclose(edges[1:] / edges[:-1], 2.0)
    lj = log_J[full][-4:]
    if lj.size < 4 or not np.all(np.isfinite(lj)):
        return None
    log_q = np.diff(lj)
    if np.all(np.diff(log_q) <= slack) and log_q[-1] <= (1 - p_hat) * math.log(2.0) + slack:
        return float(log_q[-1])
    return None


def classify_improper_integral(g=None, r0=1.0, policy=None, *, log_g=None,
                               r_max=math.inf, breakpoints=(), criterion="integral"):
    """Decide whether ``∫_{r0}^∞ g`` diverges, converges or is undecided.

    Parameters
    ----------
    g : callable, optional
        Vectorised nonnegative integrand.
    log_g : callable, optional
        Its natural logarithm; preferred for integrands that overflow.
    r_max : float
        Largest radius at which the integrand may be evaluated.  When it
        is below ``r0 * 2**m_max`` the final window is truncated there.

    Returns
    -------
    CriterionVerdict
    """
    policy = policy or ClassifierPolicy()
    if (g is None) == (log_g is None):
        raise InputError("pass exactly one of g or log_g")
    if log_g is None:
        log_g = _wrap_plain(g)
    if not r0 > 0:
        raise InputError("r0 must be positive")
    edges = _window_edges(float(r0), policy, r_max)
    # windows are integrated separately so each gets its own relative accuracy
    log_J = np.array([
        integrate_log(log_g, a, b, rtol=policy.rtol,
                      breakpoints=[p for p in breakpoints if a < p < b])
        for a, b in zip(edges[:-1], edges[1:])
    ])
    log_I = np.logaddexp.accumulate(log_J)
    partial = [(float(R), float(np.exp(li))) for R, li in zip(edges[1:], log_I)]
    with np.errstate(divide="ignore"):
        rates = log_J - np.log(np.log(edges[1:] / edges[:-1]))

    R_end = float(edges[-1])
    p_hat, sigma, residual, log_C = _fit_tail(log_g, R_end, float(r0), policy)
    margin = max(policy.sigma_factor * (sigma if np.isfinite(sigma) else np.inf), policy.min_margin)
    log_tail = math.nan

    verdict = Verdict.INCONCLUSIVE
    if log_J[-1] == -np.inf:
        verdict, log_tail = Verdict.CONVERGES, -math.inf
    elif np.isfinite(p_hat) and p_hat > 1 + margin:
        a, b = float(edges[-2]), R_end
        predicted = _log_power_integral(log_C, p_hat, a, b)
        if abs(predicted - log_J[-1]) <= policy.tail_tolerance:
            verdict = Verdict.CONVERGES
            log_tail = log_C + (1 - p_hat) * math.log(R_end) - math.log(p_hat - 1)
        else:
            log_q = _geometric_decay(log_J, edges, p_hat)
            if log_q is not None:
                # faster than any power: bound the tail by a geometric series
                verdict = Verdict.CONVERGES
                log_tail = log_J[-1] + log_q - float(log1mexp(-log_q))
    if verdict is Verdict.INCONCLUSIVE:
        slow = np.isfinite(p_hat) and p_hat < 1 - margin and residual <= policy.good_fit_residual
        last = rates[-3:]
        bounded = len(last) >= 3 and bool(np.all(
            np.diff(last) >= math.log1p(-policy.bounded_below_slack)))
        if slow or bounded:
            verdict = Verdict.DIVERGES

    return CriterionVerdict(
        verdict=verdict,
        r0=float(r0),
        R_max=R_end,
        tail_exponent=float(p_hat),
        tail_sigma=float(sigma),
        residual=float(residual),
        partial_integrals=partial,
        log_partial=[float(v) for v in log_I],
        log_extrapolated_tail=float(log_tail),
        log_increment_rates=[float(v) for v in rates],
        criterion=criterion,
    )


def _probe_grid(end, lo=2.0**-10, hi=2.0**40):
    hi = min(hi, end.r_max)
    k = np.arange(math.floor(16 * math.log2(lo)), math.floor(16 * math.log2(hi)) + 1)
    return 2.0 ** (k / 16.0)


def grigoryan(end, policy=None):
    """Classify ``∫^∞ r / log V(r) dr``, starting where ``log V >= 1``."""
    policy = policy or ClassifierPolicy()
    grid = _probe_grid(end)
    lv = np.asarray(end.log_V(grid))
    ok = np.nonzero(lv >= 1.0)[0]
    if ok.size == 0:
        raise InputError(f"V(r) <= e on the whole probe range up to r={grid[-1]:g}")
    r0 = float(grid[ok[0]])

    def log_g(r):
        r = np.asarray(r, dtype=float)
        return np.log(r) - np.log(np.asarray(end.log_V(r)))

    return classify_improper_integral(log_g=log_g, r0=r0, policy=policy, r_max=end.r_max,
                                      breakpoints=end.breakpoints, criterion="grigoryan")


def model_completeness(end, policy=None, r0=None):
    """Classify ``∫^∞ V/S dr``; divergence is stochastic completeness of a model."""
    policy = policy or ClassifierPolicy()
    r0 = policy.r0 if r0 is None else r0
    return classify_improper_integral(log_g=end.log_ratio, r0=r0, policy=policy,
                                      r_max=end.r_max, breakpoints=end.breakpoints,
                                      criterion="model")


def recurrence(end, policy=None, r0=None):
    """Classify ``∫^∞ dr / S``; divergence means Brownian motion is recurrent."""
    policy = policy or ClassifierPolicy()
    r0 = policy.r0 if r0 is None else r0

    def log_g(r):
        return -np.asarray(end.log_S(r))

    return classify_improper_integral(log_g=log_g, r0=r0, policy=policy, r_max=end.r_max,
                                      breakpoints=end.breakpoints, criterion="recurrence")


# --------------------------------------------------------------------------
# weak Omori-Yau evidence


@dataclass(frozen=True)
class WoympProbe:
    r0: float = 0.05
    R_max: float = 50.0
    grid: Optional[Sequence[float]] = None
    eps_levels: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    delta_min: float = 1e-3
    points: int = 4001


@dataclass
class WoympReport:
    """Evidence that ``u`` violates the weak maximum principle on a window.

    ``inf_delta_u[i]`` is ``None`` when the superlevel set for
    ``eps_levels[i]`` contains no grid point; such levels are ignored.
    ``u_ref`` is the level the superlevel sets are measured from: the
    supremum when the window reaches it, else the window maximum.
    """

    eps_levels: list
    inf_delta_u: list
    violating: bool
    u_ref: float
    sup_u: float
    window: tuple
    delta_min: float

    @property
    def vacuous(self):
        return [e for e, v in zip(self.eps_levels, self.inf_delta_u) if v is None]

    def to_dict(self):
        return {
            "violating": self.violating,
            "window": list(self.window),
            "u_ref": self.u_ref,
            "sup_u": self.sup_u,
            "delta_min": self.delta_min,
            "levels": [{"eps": e, "inf_delta_u": v} for e, v in zip(self.eps_levels, self.inf_delta_u)],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def woymp_report(u, profile, n, probe=None):
    """Sample ``Δu`` on ε-superlevel sets of ``u`` inside ``[r0, R_max]``.

    The verdict is a finite-window surrogate: ``violating`` means every
    non-vacuous level has ``inf Δu >= δ_min`` on the sampled window only.
    """
    probe = probe or WoympProbe()
    if probe.grid is not None:
        grid = np.asarray(probe.grid, dtype=float)
    else:
        grid = np.linspace(probe.r0, probe.R_max, probe.points)
    if np.any(grid <= 0):
        raise InputError("woymp grid must lie in r > 0")
    uv = np.asarray(u.u(grid), dtype=float) * np.ones_like(grid)
    lap = np.asarray(radial_laplacian(u, profile, n, grid), dtype=float) * np.ones_like(grid)
    sup = float(u.sup_u) if u.sup_u is not None else float(uv.max())
    u_ref = min(sup, float(uv.max()))
    eps = sorted((float(e) for e in probe.eps_levels), reverse=True)
    infs, prev = [], None
    for e in eps:
        mask = uv >= u_ref - e
        if prev is not None and np.any(mask & ~prev):
            raise NumericError(f"superlevel sets not nested at eps={e}")
        prev = mask
        infs.append(float(lap[mask].min()) if mask.any() else None)
    live = [v for v in infs if v is not None]
    violating = bool(live) and all(v >= probe.delta_min for v in live)
    return WoympReport(eps, infs, violating, u_ref, sup,
                       (float(grid[0]), float(grid[-1])), probe.delta_min)
