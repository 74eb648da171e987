"""Warping functions, end profiles and radial geometry of model manifolds.

A model manifold is ``R^n`` with metric ``dr^2 + f(r)^2 g_{S^{n-1}}``.
Its geodesic spheres about the origin have area ``S = ω_{n-1} f^{n-1}``
and its balls have volume ``V = ∫_0^r S``.  Because profiles such as
``r^a exp(r^α/(n-1))`` overflow binary64 almost immediately, areas and
volumes are only ever handled through their logarithms.
"""

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .errors import InputError, ParameterDomainError, VerificationError
from .hermite import poly_jet, quintic_hermite
from .logspace import logsubexp, logsumexp
from .quadrature import LogCumulative

__all__ = [
    "Segment",
    "WarpingProfile",
    "EndProfile",
    "TwoEndedManifold",
    "RadialFunction",
    "AreaPiece",
    "PiecewiseArea",
    "sphere_area",
    "log_sphere_area",
    "make_named_profile",
    "jet",
    "log_jet",
    "drift",
    "end_from_warping",
    "radial_laplacian",
]

NUMERIC_REACH = 64.0


def log_sphere_area(n):
    """Log of the area of the unit ``(n-1)``-sphere, ``2π^{n/2}/Γ(n/2)``."""
    return math.log(2.0) + 0.5 * n * math.log(math.pi) - float(gammaln(0.5 * n))


def sphere_area(n):
    return math.exp(log_sphere_area(n))


def _as_array(r):
    return np.asarray(r, dtype=float)


def _out(x):
    return x if np.ndim(x) else float(x)


# --------------------------------------------------------------------------
# closed-form segment kinds
#
# Each kind supplies ``jet(r, p) -> (f, f', f'')`` and
# ``log_jet(r, p) -> (log f, f'/f, f''/f)``.


def _linear_jet(r, p):
    return r, np.ones_like(r), np.zeros_like(r)


def _linear_log_jet(r, p):
    with np.errstate(divide="ignore"):
        return np.log(r), 1.0 / r, np.zeros_like(r)


def _sinh_jet(r, p):
    return np.sinh(r), np.cosh(r), np.sinh(r)


def _log_sinh(r):
    big = r > 1.0
    rs = np.where(big, r, 1.0)
    rb = np.where(big, 1.0, r)
    with np.errstate(divide="ignore"):
        small = np.log(np.sinh(rb))
    large = rs + np.log1p(-np.exp(-2.0 * rs)) - math.log(2.0)
    return np.where(big, large, small)


def _sinh_log_jet(r, p):
    with np.errstate(divide="ignore"):
        return _log_sinh(r), 1.0 / np.tanh(r), np.ones_like(r)


def _constant_jet(r, p):
    c = float(p["c"])
    return np.full_like(r, c), np.zeros_like(r), np.zeros_like(r)


def _constant_log_jet(r, p):
    c = float(p["c"])
    return np.full_like(r, math.log(c)), np.zeros_like(r), np.zeros_like(r)


def _power_exp_parts(r, p):
    n, al = float(p["n"]), float(p["alpha"])
    a = (al - 1.0) / (n - 1.0)
    log_f = a * np.log(r) + r**al / (n - 1.0)
    L = a / r + al * r ** (al - 1.0) / (n - 1.0)
    dL = -a / r**2 + al * (al - 1.0) * r ** (al - 2.0) / (n - 1.0)
    return log_f, L, dL + L * L


def _power_exp_jet(r, p):
    log_f, L, q = _power_exp_parts(r, p)
    with np.errstate(over="ignore"):
        f = np.exp(log_f)
    return f, f * L, f * q


def _power_exp_log_jet(r, p):
    return _power_exp_parts(r, p)


def _blend_jet(r, p):
    return poly_jet(p["coeffs"], r - float(p["origin"]))


def _blend_log_jet(r, p):
    f, d1, d2 = _blend_jet(r, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(f), d1 / f, d2 / f


_KINDS = {
    "linear": (_linear_jet, _linear_log_jet),
    "sinh": (_sinh_jet, _sinh_log_jet),
    "constant": (_constant_jet, _constant_log_jet),
    "power_exp": (_power_exp_jet, _power_exp_log_jet),
    "quintic_blend": (_blend_jet, _blend_log_jet),
}


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    form: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.form not in _KINDS:
            raise ParameterDomainError(f"unknown segment form {self.form!r}")
        if not self.lo < self.hi:
            raise ParameterDomainError(f"empty segment [{self.lo}, {self.hi}]")

    def jet(self, r):
        return _KINDS[self.form][0](_as_array(r), self.params)

    def log_jet(self, r):
        return _KINDS[self.form][1](_as_array(r), self.params)

    def to_dict(self):
        params = {k: (list(map(float, v)) if isinstance(v, (list, tuple, np.ndarray)) else v)
                  for k, v in self.params.items()}
        return {
            "lo": self.lo,
            "hi": None if math.isinf(self.hi) else self.hi,
            "form": self.form,
            "params": params,
        }

    @classmethod
    def from_dict(cls, d):
        hi = math.inf if d.get("hi") is None else float(d["hi"])
        return cls(float(d["lo"]), hi, d["form"], dict(d.get("params", {})))


@dataclass(frozen=True)
class WarpingProfile:
    """Piecewise closed-form warping function ``f`` on ``[0, ∞)``.

    Segments are ordered, contiguous and closed on the left; the last one
    extends to infinity.
    """

    segments: tuple
    dimension_hint: int = 2
    kind: str = "custom"
    alpha: Optional[float] = None

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs or segs[0].lo != 0.0:
            raise ParameterDomainError("profile must start at r = 0")
        for s, t in zip(segs, segs[1:]):
            if s.hi != t.lo:
                raise ParameterDomainError(f"gap between segments at {s.hi} and {t.lo}")
        if not math.isinf(segs[-1].hi):
            raise ParameterDomainError("last segment must extend to infinity")
        if int(self.dimension_hint) < 2:
            raise ParameterDomainError("dimension must be at least 2")

    @property
    def joins(self):
        return tuple(s.hi for s in self.segments[:-1])

    def _index(self, r):
        los = np.array([s.lo for s in self.segments])
        return np.searchsorted(los, r, side="right") - 1

    def _dispatch(self, r, method):
        r = _as_array(r)
        if np.any(r < 0):
            raise ParameterDomainError("warping functions are defined for r >= 0 only")
        idx = self._index(r)
        outs = [np.empty_like(r) for _ in range(3)]
        for i in np.unique(idx):
            m = idx == i
            vals = getattr(self.segments[i], method)(r[m])
            for o, v in zip(outs, vals):
                o[m] = v
        return tuple(_out(o) for o in outs)

    def jet(self, r):
        """``(f, f', f'')`` at ``r``; may overflow to ``inf`` for fast growth."""
        return self._dispatch(r, "jet")

    def log_jet(self, r):
        """``(log f, f'/f, f''/f)`` at ``r``, safe for any representable r."""
        return self._dispatch(r, "log_jet")

    def to_dict(self):
        return {
            "kind": self.kind,
            "n": int(self.dimension_hint),
            "alpha": self.alpha,
            "segments": [s.to_dict() for s in self.segments],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(Segment.from_dict(s) for s in d["segments"]),
            dimension_hint=int(d["n"]),
            kind=d.get("kind", "custom"),
            alpha=None if d.get("alpha") is None else float(d["alpha"]),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def check_invariants(self, grid=None, model=True):
        """Raise :class:`VerificationError` if an axiom fails on ``grid``."""
        if grid is None:
            grid = np.linspace(1e-3, 16.0, 2001)
        if model:
            f0, d0, _ = self.jet(0.0)
            if abs(f0) > 1e-12 or abs(d0 - 1.0) > 1e-9:
                raise VerificationError(f"f(0)={f0}, f'(0)={d0}; expected 0 and 1")
            h = 1e-6
            slope = (self.jet(h)[0] - f0) / h
            if abs(slope - 1.0) > 1e-5:
                raise VerificationError(f"finite-difference f'(0) = {slope}")
        log_f = self.log_jet(np.asarray(grid))[0]
        if not np.all(np.isfinite(log_f)):
            bad = np.asarray(grid)[~np.isfinite(log_f)][0]
            raise VerificationError(f"f not positive at r={bad}")
        for left, right in zip(self.segments, self.segments[1:]):
            x = right.lo
            a = np.array(left.log_jet(x), dtype=float)
            b = np.array(right.log_jet(x), dtype=float)
            # compare f, f'/f, f''/f; jumps in log f are relative jumps in f
            scale = np.maximum(1.0, np.abs(b))
            if np.any(np.abs(a - b) > 1e-9 * scale):
                raise VerificationError(f"C2 join broken at r={x}: {a} vs {b}")
        return True


def make_named_profile(kind, n, alpha=None):
    """Build the Euclidean, hyperbolic or power-exponential warping function.

    The power-exponential profile is ``f(r) = r^{(α-1)/(n-1)} exp(r^α/(n-1))``
    for ``r >= 1``, the identity on ``[0, 1/2]`` and a quintic Hermite
    bridge in between.
    """
    n = int(n)
    if n < 2:
        raise ParameterDomainError(f"dimension n={n} must be >= 2")
    if kind == "euclidean":
        return WarpingProfile((Segment(0.0, math.inf, "linear"),), n, "euclidean", alpha)
    if kind == "hyperbolic":
        return WarpingProfile((Segment(0.0, math.inf, "sinh"),), n, "hyperbolic", alpha)
    if kind != "power_exp":
        raise ParameterDomainError(f"unknown profile kind {kind!r}")
    if alpha is None or not alpha > 0:
        raise ParameterDomainError(f"power_exp needs alpha > 0, got {alpha!r}")
    alpha = float(alpha)
    tail = Segment(1.0, math.inf, "power_exp", {"n": n, "alpha": alpha})
    right = tuple(float(v) for v in tail.jet(1.0))
    coeffs = quintic_hermite(0.5, 1.0, (0.5, 1.0, 0.0), right)
    blend = Segment(0.5, 1.0, "quintic_blend", {"coeffs": list(coeffs), "origin": 0.5})
    return WarpingProfile(
        (Segment(0.0, 0.5, "linear"), blend, tail), n, "power_exp", alpha,
    )


def jet(profile, r):
    if np.any(_as_array(r) < 0):
        raise ParameterDomainError("negative radius")
    return profile.jet(r)


def log_jet(profile, r):
    return profile.log_jet(r)


def drift(profile, n, r):
    """Radial drift ``(n-1) f'(r)/f(r)`` of the Laplacian (log-derivative form)."""
    r = _as_array(r)
    if np.any(r <= 0):
        raise ParameterDomainError("drift is undefined at r <= 0 for model profiles")
    log_f, L, _ = profile.log_jet(r)
    if np.any(~np.isfinite(np.asarray(log_f))):
        raise ParameterDomainError("f(r) <= 0 where drift was requested")
    return _out((n - 1) * np.asarray(L))


# --------------------------------------------------------------------------
# end profiles


@dataclass(frozen=True, eq=False)
class AreaPiece:
    """One interval of a piecewise area function.

    ``log_int(r)`` is ``log ∫_lo^r S`` in closed form when available;
    otherwise the piece is integrated numerically.  ``log_ratio(r, log_V_lo)``
    optionally returns ``log(V/S)`` without forming the two huge logs.
    """

    lo: float
    hi: float
    log_S: Callable
    log_int: Optional[Callable] = None
    log_ratio: Optional[Callable] = None


class PiecewiseArea:
    """Cumulative volume of a piecewise area function, all in log space."""

    def __init__(self, pieces, rtol=1e-10, block=1.0):
        self.pieces = tuple(pieces)
        for p, q in zip(self.pieces, self.pieces[1:]):
            if p.hi != q.lo:
                raise InputError(f"area pieces not contiguous at {p.hi}")
        self._los = np.array([p.lo for p in self.pieces])
        self.hi = self.pieces[-1].hi
        self._numeric = {}
        log_V_lo = [-np.inf]
        for i, p in enumerate(self.pieces):
            if p.log_int is None:
                self._numeric[i] = LogCumulative(p.log_S, p.lo, p.hi, rtol=rtol, block=block)
            if i + 1 < len(self.pieces):
                log_V_lo.append(float(np.logaddexp(log_V_lo[-1], self._piece_int(i, p.hi))))
        self.log_V_lo = np.array(log_V_lo)

    def _piece_int(self, i, r):
        p = self.pieces[i]
        if p.log_int is not None:
            return p.log_int(r)
        return self._numeric[i](r)

    def _groups(self, r):
        r = _as_array(r)
        if np.any(r < self.pieces[0].lo) or np.any(r > self.hi):
            raise ParameterDomainError(
                f"radius outside [{self.pieces[0].lo}, {self.hi}] of this area function"
            )
        idx = np.clip(np.searchsorted(self._los, r, side="right") - 1, 0, len(self.pieces) - 1)
        return r, idx

    def log_S(self, r):
        r, idx = self._groups(r)
        out = np.empty_like(r)
        for i in np.unique(idx):
            m = idx == i
            out[m] = self.pieces[i].log_S(r[m])
        return _out(out)

    def log_V(self, r):
        r, idx = self._groups(r)
        out = np.empty_like(r)
        for i in np.unique(idx):
            m = idx == i
            out[m] = np.logaddexp(self.log_V_lo[i], self._piece_int(i, r[m]))
        return _out(out)

    def log_ratio(self, r):
        r, idx = self._groups(r)
        out = np.empty_like(r)
        for i in np.unique(idx):
            m = idx == i
            p = self.pieces[i]
            if p.log_ratio is not None:
                out[m] = p.log_ratio(r[m], self.log_V_lo[i])
            else:
                lv = np.logaddexp(self.log_V_lo[i], self._piece_int(i, r[m]))
                out[m] = lv - p.log_S(r[m])
        return _out(out)


@dataclass(frozen=True, eq=False)
class EndProfile:
    """Area and volume functions of one end, seen from a basepoint.

    ``log_S`` and ``log_V`` are vectorised callables.  ``log_ratio``, when
    given, evaluates ``log(V/S)`` directly; otherwise it is formed as
    ``log_V - log_S``, which loses all precision once both logs exceed
    ~1e15.
    """

    log_S: Callable
    log_V: Callable
    S_at_zero: float = 0.0
    provenance: str = "constructed"
    log_ratio_fn: Optional[Callable] = None
    r_max: float = math.inf
    breakpoints: tuple = ()
    label: str = ""

    def log_ratio(self, r):
        if self.log_ratio_fn is not None:
            return self.log_ratio_fn(r)
        return _out(np.asarray(self.log_V(r)) - np.asarray(self.log_S(r)))

    def S(self, r):
        with np.errstate(over="ignore"):
            return _out(np.exp(self.log_S(r)))

    def V(self, r):
        with np.errstate(over="ignore"):
            return _out(np.exp(self.log_V(r)))

    def scaled(self, c):
        """Multiply the area (hence the volume) by ``c > 0``."""
        if not c > 0:
            raise ParameterDomainError("scale factor must be positive")
        lc = math.log(c)
        return replace(
            self,
            log_S=lambda r: _out(np.asarray(self.log_S(r)) + lc),
            log_V=lambda r: _out(np.asarray(self.log_V(r)) + lc),
            log_ratio_fn=self.log_ratio,
            S_at_zero=self.S_at_zero * c,
            label=f"{self.label}*{c:g}",
        )

    def shifted(self, d0):
        """The area function ``r -> S(r + d0)`` with volume counted from 0."""
        if not d0 > 0:
            raise ParameterDomainError("shift d0 must be positive")
        d0 = float(d0)
        lv0 = float(self.log_V(d0))

        def log_S(r):
            return self.log_S(_as_array(r) + d0)

        def log_V(r):
            return _out(logsubexp(self.log_V(_as_array(r) + d0), lv0))

        def log_ratio(r):
            r = _as_array(r) + d0
            return _out(logsubexp(self.log_ratio(r), lv0 - np.asarray(self.log_S(r))))

        return EndProfile(
            log_S, log_V,
            S_at_zero=float(self.S(d0)),
            provenance="constructed",
            log_ratio_fn=log_ratio,
            r_max=self.r_max - d0,
            breakpoints=tuple(b - d0 for b in self.breakpoints if b > d0),
            label=f"{self.label}+{d0:g}",
        )

    def check_invariants(self, grid=None, rtol=1e-6):
        """Positivity, monotone volume and ``V' = S`` on ``grid``."""
        if grid is None:
            hi = min(self.r_max, 16.0)
            grid = np.linspace(hi / 100, hi * 0.99, 100)
        grid = np.asarray(grid, dtype=float)
        ls = np.asarray(self.log_S(grid))
        if not np.all(np.isfinite(ls)):
            raise VerificationError("area not positive on the sample grid")
        lv = np.asarray(self.log_V(grid))
        if np.any(np.diff(lv) <= 0):
            raise VerificationError("log V not strictly increasing")
        d = 1e-6 * np.maximum(1.0, grid)
        slope = np.abs(np.asarray(self.log_S(grid + d)) - np.asarray(self.log_S(grid - d))) / (2 * d)
        h = 1e-3 / (1.0 + slope)
        # (V(r+h) - V(r-h)) / (2h S(r)) evaluated without leaving log space
        num = logsubexp(self.log_V(grid + h), self.log_V(grid - h))
        ratio = np.exp(num - np.log(2 * h) - ls)
        if np.any(np.abs(ratio - 1.0) > rtol):
            worst = grid[np.argmax(np.abs(ratio - 1.0))]
            raise VerificationError(f"V' != S near r={worst}")
        return True


def _piece_for_segment(seg, n):
    lw = log_sphere_area(n)
    m = n - 1

    def log_S(r, seg=seg):
        return lw + m * seg.log_jet(r)[0]

    log_int = log_ratio = None
    lo = seg.lo
    if seg.form == "linear":
        def log_int(r, lo=lo):
            r = _as_array(r)
            with np.errstate(divide="ignore"):
                return lw - math.log(n) + n * np.log(r) + np.log1p(-(lo / r) ** n)
    elif seg.form == "constant":
        c = float(seg.params["c"])

        def log_int(r, lo=lo):
            with np.errstate(divide="ignore"):
                return lw + m * math.log(c) + np.log(_as_array(r) - lo)
    elif seg.form == "sinh" and n == 2:
        def log_int(r, lo=lo):
            r = _as_array(r)
            with np.errstate(divide="ignore"):
                return lw + math.log(2.0) + _log_sinh(0.5 * (r + lo)) + _log_sinh(0.5 * (r - lo))

        if lo == 0.0:
            def log_ratio(r, log_V_lo):
                # V/S = (cosh r - 1)/sinh r = tanh(r/2)
                with np.errstate(divide="ignore"):
                    return np.log(np.tanh(0.5 * _as_array(r)))
    elif seg.form == "power_exp" and int(seg.params["n"]) == n:
        al = float(seg.params["alpha"])
        lc3 = lw - math.log(al)

        def log_int(r, lo=lo):
            r = _as_array(r)
            x = r**al
            with np.errstate(divide="ignore"):
                return lc3 + x + np.log1p(-np.exp(lo**al - x))

        def log_ratio(r, log_V_lo, lo=lo):
            # V/S = (1 + α C2 e^{-x}/ω) / (α r^{α-1}),  C2 = V(lo) - (ω/α) e^{lo^α}
            r = _as_array(r)
            c2 = math.exp(log_V_lo) - math.exp(lc3 + lo**al)
            corr = np.log1p(al * c2 * np.exp(-r**al) / math.exp(lw))
            return -math.log(al) - (al - 1.0) * np.log(r) + corr

    return AreaPiece(seg.lo, seg.hi, log_S, log_int, log_ratio)


def end_from_warping(profile, n=None, reach=NUMERIC_REACH):
    """End profile ``S = ω_{n-1} f^{n-1}``, ``V = ∫_0^r S`` of a model profile.

    Segments with a closed-form antiderivative are integrated exactly;
    the rest go through the memoised log-space quadrature.  ``reach``
    bounds the radius advertised as reliably computable when the last
    segment has no closed form.
    """
    n = int(profile.dimension_hint if n is None else n)
    if n < 2:
        raise ParameterDomainError("dimension must be at least 2")
    pieces = [_piece_for_segment(s, n) for s in profile.segments]
    area = PiecewiseArea(pieces)
    r_max = math.inf if pieces[-1].log_int is not None else float(reach)
    s0 = float(np.exp(area.log_S(0.0))) if profile.segments[0].form != "linear" else 0.0
    return EndProfile(
        area.log_S, area.log_V,
        S_at_zero=s0,
        provenance="derived-from-warping",
        log_ratio_fn=area.log_ratio,
        r_max=r_max,
        breakpoints=profile.joins,
        label=f"{profile.kind}(n={n}" + (f", alpha={profile.alpha:g})" if profile.alpha else ")"),
    )


@dataclass(frozen=True, eq=False)
class TwoEndedManifold:
    """Two ends glued at a point ``q``; combined ``S = S1 + S2``, ``V = V1 + V2 + v_K``."""

    end1: EndProfile
    end2: EndProfile
    v_K: float = 0.0
    sandwich: bool = False

    def log_S(self, r):
        return _out(np.logaddexp(self.end1.log_S(r), self.end2.log_S(r)))

    def log_V(self, r):
        lv1 = np.asarray(self.end1.log_V(r))
        lv2 = np.asarray(self.end2.log_V(r))
        lk = math.log(self.v_K) if self.v_K > 0 else -np.inf
        return _out(logsumexp(np.stack(np.broadcast_arrays(lv1, lv2, np.full_like(lv1, lk))),
                              axis=0))

    def log_ratio(self, r):
        # V/S = ρ1 w1 + ρ2 w2 + v_K/S with w_j = S_j/S; avoids differencing huge logs
        ls1 = np.asarray(self.end1.log_S(r))
        ls2 = np.asarray(self.end2.log_S(r))
        ls = np.logaddexp(ls1, ls2)
        terms = [
            np.asarray(self.end1.log_ratio(r)) + (ls1 - ls),
            np.asarray(self.end2.log_ratio(r)) + (ls2 - ls),
        ]
        if self.v_K > 0:
            terms.append(math.log(self.v_K) - ls)
        return _out(logsumexp(np.stack(np.broadcast_arrays(*terms)), axis=0))

    @property
    def S_at_zero(self):
        return self.end1.S_at_zero + self.end2.S_at_zero

    @property
    def r_max(self):
        return min(self.end1.r_max, self.end2.r_max)

    @property
    def breakpoints(self):
        return tuple(sorted(set(self.end1.breakpoints) | set(self.end2.breakpoints)))

    def S(self, r):
        with np.errstate(over="ignore"):
            return _out(np.exp(self.log_S(r)))

    def V(self, r):
        with np.errstate(over="ignore"):
            return _out(np.exp(self.log_V(r)))

    def as_end(self):
        return EndProfile(
            self.log_S, self.log_V,
            S_at_zero=self.S_at_zero,
            provenance="constructed",
            log_ratio_fn=self.log_ratio,
            r_max=self.r_max,
            breakpoints=self.breakpoints,
            label=f"glue({self.end1.label}, {self.end2.label})",
        )


# --------------------------------------------------------------------------
# radial functions and the radial Laplacian


@dataclass(frozen=True, eq=False)
class RadialFunction:
    u: Callable
    du: Optional[Callable] = None
    d2u: Optional[Callable] = None
    sup_u: Optional[float] = None

    def derivatives(self, r):
        """``(u', u'')`` at ``r``; central differences where no closed form is attached."""
        r = _as_array(r)
        h = 1e-4 * np.maximum(1.0, np.abs(r))
        if self.du is not None:
            d1 = np.asarray(self.du(r), dtype=float)
        else:
            d1 = (np.asarray(self.u(r + h)) - np.asarray(self.u(r - h))) / (2 * h)
        if self.d2u is not None:
            d2 = np.asarray(self.d2u(r), dtype=float)
        else:
            d2 = (np.asarray(self.u(r + h)) - 2 * np.asarray(self.u(r))
                  + np.asarray(self.u(r - h))) / h**2
        return _out(d1), _out(d2)


def radial_laplacian(u, profile, n, r):
    """``Δu = u'' + (n-1)(f'/f) u'`` for a radial function ``u``."""
    b = np.asarray(drift(profile, n, r))
    d1, d2 = u.derivatives(r)
    return _out(np.asarray(d2) + b * np.asarray(d1))
