"""Constructions: balancing ends, two-ended gluings and their verification.

Areas of the balancing end grow like ``exp((k+3)^3)``, so every piece of
it is defined by closed-form logarithms of its area and of its volume
increment; nothing is ever exponentiated.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, ParameterDomainError, VerificationError
from .hermite import (BUMP_MASS, bump, bump_integral, poly_jet, quintic_hermite, smoothstep,
                      smoothstep_integral)
from .logspace import log1mexp, logsubexp, logsumexp
from .profile import (AreaPiece, EndProfile, PiecewiseArea, RadialFunction, TwoEndedManifold,
                      log_sphere_area)
from .quadrature import integrate_log

__all__ = [
    "Envelope",
    "dominating_area_envelope",
    "BalancingSpec",
    "build_balancing_end",
    "glue_two_ends",
    "VerificationReport",
    "verify_counterexample",
    "make_woymp_function",
    "woymp_laplacian",
    "perturbation_budget",
    "build_recurrent_finite_ratio_pair",
    "LOWER_BOUND",
    "UPPER_BOUND",
]

LOWER_BOUND = 2.0 / 11.0
UPPER_BOUND = 3.0 / 32.0


def _arr(r):
    return np.asarray(r, dtype=float)


def _out(x):
    return x if np.ndim(x) else float(x)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


# --------------------------------------------------------------------------
# envelope


@dataclass(frozen=True, eq=False)
class Envelope:
    """Running maximum ``F(r) = max_{ρ <= r} Ŝ(ρ)`` of a sampled area.

    The maximum is taken over knots spaced ``h`` apart plus the query point
    itself, which is exact for nondecreasing ``Ŝ``.
    """

    log_area: object
    knots: np.ndarray
    log_cummax: np.ndarray
    label: str = "surrogate envelope"

    @property
    def r_hi(self):
        return float(self.knots[-1])

    def log_F(self, r):
        r = _arr(r)
        if np.any(r < 0) or np.any(r > self.r_hi):
            raise InputError(f"envelope evaluated outside [0, {self.r_hi}]")
        i = np.searchsorted(self.knots, r, side="right") - 1
        return _out(np.maximum(self.log_cummax[i], _arr(self.log_area(r))))

    def __call__(self, r):
        with np.errstate(over="ignore"):
            return _out(np.exp(self.log_F(r)))


def dominating_area_envelope(incomplete_end, d0=1.0, r_hi=64.0, h=1.0 / 64):
    """Envelope of the area of ``incomplete_end`` seen from distance ``d0``.

    The shifted area ``Ŝ(r) = S(r + d0)`` stands in for the area of the
    punctured end around a point at distance ``d0`` from the pole.
    """
    if not d0 > 0:
        raise ParameterDomainError("d0 must be positive")
    d0 = float(d0)

    def log_area(r):
        return incomplete_end.log_S(_arr(r) + d0)

    knots = np.arange(0.0, r_hi + h / 2, h)
    lcm = np.maximum.accumulate(_arr(log_area(knots)))
    return Envelope(log_area, knots, lcm)


def _log_F_callable(F):
    if isinstance(F, Envelope):
        return F.log_F
    if callable(F):
        return lambda r: _log(_arr(F(r)))
    c = math.log(float(F))
    return lambda r: np.full_like(_arr(r), c) if np.ndim(r) else c


# --------------------------------------------------------------------------
# balancing end


def _ramp_piece(a, L, ls_a, ls_b, lP):
    """Area ``s_a(1-φ) + s_b φ + P ψ`` on ``[a, a+L]`` with φ smoothstep, ψ bump."""
    lL = math.log(L)

    def log_S(r):
        t = (_arr(r) - a) / L
        terms = np.stack(np.broadcast_arrays(
            ls_a + _log(smoothstep(1.0 - t)), ls_b + _log(smoothstep(t)), lP + _log(bump(t))))
        return logsumexp(terms, axis=0)

    def log_int(r):
        t = np.clip((_arr(r) - a) / L, 0.0, 1.0)
        Ph = smoothstep_integral(t)
        terms = np.stack(np.broadcast_arrays(
            ls_a + _log(t - Ph), ls_b + _log(Ph), lP + _log(bump_integral(t))))
        return lL + logsumexp(terms, axis=0)

    return AreaPiece(a, a + L, log_S, log_int)


def _flat_piece(a, b, ls):
    def log_S(r):
        return np.full_like(_arr(r), ls)

    def log_int(r):
        return ls + _log(_arr(r) - a)

    return AreaPiece(a, b, log_S, log_int)


def _ramp_bump(lV_start, ls_a, ls_b, L, c_target):
    """Log bump height making ``V(end of ramp) >= c_target * s_b`` (``-inf`` if none needed)."""
    have = float(np.logaddexp(lV_start, math.log(L / 2) + np.logaddexp(ls_a, ls_b)))
    need = math.log(c_target) + ls_b
    if have >= need:
        return -math.inf, have
    lP = float(logsubexp(need, have)) - math.log(L * BUMP_MASS)
    return lP, float(np.logaddexp(have, lP + math.log(L * BUMP_MASS)))


@dataclass
class BalancingSpec:
    """Recipe and audit trail of a balancing end.

    Plateau values and bump heights are stored as logarithms because they
    exceed the floating-point range after a few periods.
    """

    n: int
    k_max: int
    C1: float
    log_S0: float
    log_plateau_values: list
    log_bump_heights: list
    c_target: float
    F_label: str
    ramp_form: str = "smoothstep with C2 bump overshoot"
    bullets: dict = field(default_factory=dict)

    @property
    def plateau_values(self):
        with np.errstate(over="ignore"):
            return list(np.exp(self.log_plateau_values))

    def to_dict(self):
        return {
            "n": self.n,
            "k_max": self.k_max,
            "C1": self.C1,
            "log_S0": self.log_S0,
            "log_plateau_values": list(self.log_plateau_values),
            "log_bump_heights": [None if not math.isfinite(v) else v for v in self.log_bump_heights],
            "c_target": self.c_target,
            "F": self.F_label,
            "ramp_form": self.ramp_form,
            "bullets": self.bullets,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def build_balancing_end(F, n=2, k_max=30, c_target=6.0, check=True):
    """Model end with plateaus ``s_k`` on ``[k+1/8, k+3/4]`` that out-grow ``F``.

    ``s_k = max(s_{k-1}, (8/5) F(k+2) + 1)``.  Between plateaus the area
    rises along a smoothstep and, where needed, a ``C^2`` bump is added on
    top so that the volume at the start of the next plateau is at least
    ``c_target`` times its area.  Near 0 the area equals that of a round
    sphere of radius ``1/(8π)``.

    Returns
    -------
    (EndProfile, BalancingSpec)
    """
    if int(k_max) < 2:
        raise ParameterDomainError("k_max must be at least 2")
    if c_target <= 0:
        raise ParameterDomainError("c_target must be positive")
    n, k_max = int(n), int(k_max)
    log_F = _log_F_callable(F)
    C1 = 1.0 / (8.0 * math.pi)
    lS0 = log_sphere_area(n) + (n - 1) * math.log(C1)

    ls = []
    prev = lS0
    for k in range(k_max + 1):
        cand = float(np.logaddexp(math.log(1.6) + float(log_F(k + 2.0)), 0.0))
        prev = max(prev, cand)
        ls.append(prev)

    pieces = [_flat_piece(0.0, 1.0 / 32, lS0)]
    lV = lS0 + math.log(1.0 / 32)
    bumps = []
    lP, lV = _ramp_bump(lV, lS0, ls[0], 3.0 / 32, c_target)
    bumps.append(lP)
    pieces.append(_ramp_piece(1.0 / 32, 3.0 / 32, lS0, ls[0], lP))
    for k in range(k_max + 1):
        a = k + 0.125
        if k == k_max:
            pieces.append(_flat_piece(a, math.inf, ls[k]))
            break
        pieces.append(_flat_piece(a, k + 0.75, ls[k]))
        lV = float(np.logaddexp(lV, ls[k] + math.log(0.625)))
        lP, lV = _ramp_bump(lV, ls[k], ls[k + 1], 0.375, c_target)
        bumps.append(lP)
        pieces.append(_ramp_piece(k + 0.75, 0.375, ls[k], ls[k + 1], lP))

    area = PiecewiseArea(pieces)
    end = EndProfile(
        area.log_S, area.log_V,
        S_at_zero=math.exp(lS0),
        provenance="constructed",
        r_max=k_max + 0.75,
        breakpoints=tuple(p.lo for p in pieces[1:]),
        label="balancing",
    )
    plan = BalancingSpec(n, k_max, C1, lS0, ls, bumps, float(c_target),
                         getattr(F, "label", "user-supplied F"))
    if check:
        plan.bullets = _check_bullets(end, plan, log_F)
    return end, plan


def _check_bullets(end, plan, log_F):
    """Assert the defining properties of a balancing end; return their evidence."""
    out = {}
    if end.log_V(0.0) != -math.inf:
        raise VerificationError("bullet V(0) = 0 violated")
    out["V(0)=0"] = True
    grid = np.linspace(0.0, end.r_max, 64 * int(end.r_max) + 1)
    if not np.all(np.isfinite(_arr(end.log_S(grid)))):
        raise VerificationError("bullet S > 0 violated")
    out["S>0"] = True
    worst = math.inf
    for k in range(1, plan.k_max + 1):
        gap = float(end.log_V(float(k))) - float(log_F(k + 1.0))
        if gap < 0:
            raise VerificationError(f"bullet V(k) >= F(k+1) violated at k={k}")
        worst = min(worst, gap)
    out["V(k)>=F(k+1)"] = {"min_log_margin": worst}
    for k in range(plan.k_max + 1):
        vals = _arr(end.log_S(np.linspace(k + 0.125, k + 0.75, 33)))
        if vals.max() != vals.min():
            raise VerificationError(f"bullet: S not constant on plateau k={k}")
    out["plateaus_constant"] = True
    return out


def glue_two_ends(end1, end2, v_K=0.0):
    """Two-ended manifold; flags the volume sandwich when ``end2`` is a balancing end."""
    if v_K < 0:
        raise ParameterDomainError("v_K must be nonnegative")
    return TwoEndedManifold(end1, end2, float(v_K), sandwich=(getattr(end2, "label", "") == "balancing"))


# --------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    ks: list
    A: list
    B: list
    lower: float = LOWER_BOUND
    upper: float = UPPER_BOUND

    @property
    def pass_A(self):
        return [a >= self.lower for a in self.A]

    @property
    def pass_B(self):
        return [b <= self.upper for b in self.B]

    @property
    def passes(self):
        return [a and b for a, b in zip(self.pass_A, self.pass_B)]

    @property
    def cumulative(self):
        return list(np.cumsum(self.A))

    @property
    def all_pass(self):
        return all(self.passes)

    @property
    def linear_witness(self):
        """``Σ_{k<=K} A_k >= (2/11) K`` for every prefix."""
        return all(c >= self.lower * (i + 1) for i, c in enumerate(self.cumulative))

    def failures(self):
        return [k for k, ok in zip(self.ks, self.passes) if not ok]

    def to_dict(self):
        return {
            "lower_bound": self.lower,
            "upper_bound": self.upper,
            "all_pass": self.all_pass,
            "sum_A": float(math.fsum(self.A)),
            "rows": [
                {"k": k, "A_k": a, "B_k": b, "pass": p}
                for k, a, b, p in zip(self.ks, self.A, self.B, self.passes)
            ],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self, fh=None):
        own = fh is None
        fh = fh or io.StringIO()
        w = csv.writer(fh)
        w.writerow(["k", "A_k", "B_k", "pass"])
        for k, a, b, p in zip(self.ks, self.A, self.B, self.passes):
            w.writerow([k, repr(a), repr(b), int(p)])
        return fh.getvalue() if own else None


def verify_counterexample(m, k_range=range(1, 31), rtol=1e-8):
    """Per-period integrals of the glued ratio and of the balancing end.

    ``A_k = ∫_{k+1/2}^{k+3/4} (V1+V2)/(S1+S2)`` and
    ``B_k = ∫_{k+3/8}^{k+3/4} S2/V2``.  When ``end2`` has no plateau
    structure ``B_k`` is still computed but has no special meaning.
    """
    ks = [int(k) for k in k_range]
    bps = m.breakpoints
    A, B = [], []
    e2 = m.end2

    def neg_ratio(r):
        return -_arr(e2.log_ratio(r))

    for k in ks:
        lo, hi = k + 0.5, k + 0.75
        try:
            la = integrate_log(m.log_ratio, lo, hi, rtol=rtol,
                               breakpoints=[p for p in bps if lo < p < hi])
            lb = integrate_log(neg_ratio, k + 0.375, hi, rtol=rtol,
                               breakpoints=[p for p in bps if k + 0.375 < p < hi])
        except Exception as exc:
            raise VerificationError(f"quadrature failed for k={k}: {exc}") from exc
        A.append(float(math.exp(la)))
        B.append(float(math.exp(lb)))
    return VerificationReport(ks, A, B)


# --------------------------------------------------------------------------
# WOYMP-violating function


def woymp_laplacian(alpha, beta, r):
    """``β(α r^{α-β-2} + (α-β-2) r^{-β-2})``: Laplacian of ``1 - r^{-β}`` on the
    power-exponential model for ``r >= 1``."""
    r = _arr(r)
    return _out(beta * (alpha * r ** (alpha - beta - 2) + (alpha - beta - 2) * r ** (-beta - 2)))


def make_woymp_function(alpha, beta, R1=1.0):
    """Bounded radial function with ``u = 1 - r^{-β}`` for ``r >= R1``.

    Below ``R1`` a quintic cap with ``u'(0) = u''(0) = 0`` joins it with
    ``C^2`` contact and stays increasing, so ``u < 1 = sup u``.
    """
    if not beta > 0:
        raise ParameterDomainError(f"need beta > 0, got {beta}")
    if not alpha - beta > 2:
        raise ParameterDomainError(f"need alpha - beta > 2, got {alpha} - {beta} = {alpha - beta}")
    if not R1 >= 1:
        raise ParameterDomainError("R1 must be >= 1")
    a, b, R1 = float(alpha), float(beta), float(R1)
    right = (1 - R1**-b, b * R1 ** (-b - 1), -b * (b + 1) * R1 ** (-b - 2))
    coeffs = None
    ts = np.linspace(0.0, R1, 401)
    # the cap's free parameter is u(0); take the largest value keeping u' >= 0
    for drop in np.linspace(0.05, 2.0, 40):
        c = quintic_hermite(0.0, R1, (right[0] - drop * R1 * right[1], 0.0, 0.0), right)
        if np.all(poly_jet(c, ts)[1] >= -1e-14):
            coeffs = c
            break
    if coeffs is None:
        raise ParameterDomainError("no monotone cap found")

    def piecewise(r, k):
        r = _arr(r)
        inner = poly_jet(coeffs, np.minimum(r, R1))[k]
        with np.errstate(divide="ignore"):
            rr = np.maximum(r, R1)
            outer = [1 - rr**-b, b * rr ** (-b - 1), -b * (b + 1) * rr ** (-b - 2)][k]
        return _out(np.where(r < R1, inner, outer))

    u = RadialFunction(
        u=lambda r: piecewise(r, 0),
        du=lambda r: piecewise(r, 1),
        d2u=lambda r: piecewise(r, 2),
        sup_u=1.0,
    )
    return u


# --------------------------------------------------------------------------
# perturbation budget


@dataclass(frozen=True)
class BudgetInterval:
    j: int
    R: float
    eps: float
    integral: float
    bound: float


def perturbation_budget(m, R_seq, excluded=(), rtol=1e-10, iters=60):
    """Radii ``ε_j`` with ``∫_{R_j-ε_j}^{R_j+ε_j} V/S <= 2^{-j}`` and disjoint intervals.

    ``ε_j`` starts at a quarter of the distance to the nearest neighbour
    or excluded radius and is bisected down until the local integral
    meets its budget.
    """
    R = [float(x) for x in R_seq]
    if any(b <= a for a, b in zip(R, R[1:])):
        raise InputError("R_seq must be strictly increasing")
    ex = sorted(float(x) for x in excluded)
    for x in ex:
        if x in R:
            raise InputError(f"excluded radius {x} coincides with a perturbation centre")
    out = []
    for j, Rj in enumerate(R, start=1):
        near = [abs(Rj - o) for o in R if o != Rj] + [abs(Rj - x) for x in ex]
        cap = 0.25 * min(near) if near else 0.25 * Rj
        cap = min(cap, 0.999 * Rj)
        bound = 2.0**-j

        def local(eps):
            return math.exp(integrate_log(m.log_ratio, Rj - eps, Rj + eps, rtol=rtol))

        eps, val = cap, local(cap)
        if val > bound:
            lo, hi = 0.0, cap
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                if local(mid) <= bound:
                    lo = mid
                else:
                    hi = mid
            eps, val = lo, local(lo)
        out.append(BudgetInterval(j, Rj, eps, val, bound))
    return out


# --------------------------------------------------------------------------
# recurrent pair with a finite combined ratio


def _log_T(r):
    r = _arr(r)
    return math.log(3.0) + 2 * np.log(r) + r**3


def _log_T_minus(r, c):
    """``log(T(r) - c)`` for ``c`` well below ``T``."""
    return logsubexp(_log_T(r), math.log(c))


def _log_T_minus_one_jet(r):
    lT = float(_log_T(r))
    q = 1.0 / (-math.expm1(-lT))           # T/(T-1)
    d = 2.0 / r + 3.0 * r * r               # T'/T
    dd = d * d + (-2.0 / r**2 + 6.0 * r)    # T''/T
    l1 = q * d
    return float(_log_T_minus(r, 1.0)), l1, q * dd - l1 * l1


def _pair_piece(m, w_kind, which):
    """Integer interval ``[m, m+1]``: ``S1 = 1 + w(t)(T-2)``, ``S2 = T - S1``.

    ``w_kind`` is 0 or 1 (constant weight) or ``"up"``/``"down"``
    (smoothstep crossfades).
    """
    a = float(m)
    if which == 2:
        w_kind = {0: 1, 1: 0, "up": "down", "down": "up"}[w_kind]
    if w_kind == 0:
        return _flat_piece(a, a + 1, 0.0)
    if w_kind == 1:
        def log_S(r):
            return _log_T_minus(r, 1.0)

        def log_int(r):
            r = _arr(r)
            with np.errstate(divide="ignore", invalid="ignore"):
                big = r**3 + log1mexp(r**3 - a**3)
                val = logsubexp(big, _log(r - a))
            return np.where(r > a, val, -np.inf)

        return AreaPiece(a, a + 1, log_S, log_int)

    def log_S(r):
        t = _arr(r) - a
        # 1 - smoothstep(t) == smoothstep(1 - t), without cancellation
        w = smoothstep(t) if w_kind == "up" else smoothstep(1.0 - t)
        return np.logaddexp(0.0, _log(w) + _log_T_minus(r, 2.0))

    return AreaPiece(a, a + 1, log_S, None)


def _pair_end(which, r_max):
    lw = math.log(2 * math.pi)
    pieces = [AreaPiece(
        0.0, 1.0,
        lambda r: lw + _log(_arr(r)),
        lambda r: lw - math.log(2.0) + 2 * _log(_arr(r)),
    )]
    left = (lw, 1.0, -1.0)
    right = (0.0, 0.0, 0.0) if which == 2 else _log_T_minus_one_jet(2.0)
    coeffs = quintic_hermite(1.0, 2.0, left, right)
    pieces.append(AreaPiece(1.0, 2.0, lambda r: poly_jet(coeffs, _arr(r) - 1.0)[0], None))
    for m in range(2, int(r_max)):
        phase = m % 4
        w = {0: 0, 1: "up", 2: 1, 3: "down"}[phase]
        pieces.append(_pair_piece(m, w, which))
    area = PiecewiseArea(pieces)
    return EndProfile(area.log_S, area.log_V, S_at_zero=0.0, provenance="constructed",
                      r_max=float(int(r_max)), breakpoints=tuple(p.lo for p in pieces[1:]),
                      label=f"pair-S{which}")


def build_recurrent_finite_ratio_pair(r_max=64, check=True):
    """Two planar ends, each with unit-area stretches every fourth unit.

    For ``r >= 2`` the areas add up to ``3 r^2 exp(r^3)``; ``S1 = 1`` on
    ``[4k, 4k+1]`` (``k >= 1``), ``S2 = 1`` on ``[4k+2, 4k+3]``; smoothstep
    crossfades in between.  Both equal ``2πr`` on ``(0, 1]`` and are joined
    to the periodic part by quintic bridges of ``log S`` on ``[1, 2]``.
    """
    e1, e2 = _pair_end(1, r_max), _pair_end(2, r_max)
    if check:
        _check_pair(e1, e2)
    return e1, e2


def _check_pair(e1, e2):
    r = np.linspace(0.05, 1.0, 40)
    for e in (e1, e2):
        if not np.allclose(e.S(r), 2 * np.pi * r, rtol=1e-12):
            raise VerificationError("areas S_j = 2πr on (0, 1] violated")
    r = np.linspace(2.0, e1.r_max - 1e-9, 4001)
    tot = np.logaddexp(e1.log_S(r), e2.log_S(r))
    if np.max(np.abs(tot - _log_T(r)) / np.maximum(1.0, np.abs(_log_T(r)))) > 1e-13:
        raise VerificationError("sum S1 + S2 = 3r^2 exp(r^3) violated")
    for k in range(1, int(e1.r_max) // 4):
        x = np.linspace(4 * k, 4 * k + 1, 9)
        if np.any(_arr(e1.log_S(x)) != 0.0):
            raise VerificationError(f"unit plateau S1 = 1 on [{4 * k}, {4 * k + 1}] violated")
    for k in range(0, (int(e1.r_max) - 3) // 4 + 1):
        x = np.linspace(4 * k + 2, 4 * k + 3, 9)
        if np.any(_arr(e2.log_S(x)) != 0.0):
            raise VerificationError(f"unit plateau S2 = 1 on [{4 * k + 2}, {4 * k + 3}] violated")
    if np.any(_arr(e1.log_S(r)) < -1e-12) or np.any(_arr(e2.log_S(r)) < -1e-12):
        raise VerificationError("S_j >= 1 for r >= 2 violated")
    # V1 + V2 - exp(r^3) is constant on [2, 3] (checked where it is resolvable)
    x = np.linspace(2.0, 2.5, 11)
    V = np.exp(np.logaddexp(e1.log_V(x), e2.log_V(x)))
    C = V - np.exp(x**3)
    if np.max(np.abs(C - C[0])) > 1e-8 * V.max():
        raise VerificationError("V1 + V2 = exp(r^3) + C violated")
