"""Radial diffusion ``dr = b(r) dt + sqrt(2) dW`` and its explosion probability.

``b = (n-1) f'/f`` is the radial part of the Laplacian, so ``r_t`` is the
distance from the pole of Brownian motion run at the speed of ``Δ``.

Blow-up is never inferred from overflow.  A path is declared exploded
only once it sits beyond a certification radius ``R_cert`` and the
deterministic half-drift flow ``ṙ = b/2`` from its current position
reaches infinity in less than half the remaining time, i.e.
``G(r) = ∫_r^∞ 2/b < (T - t)/2``.  ``G`` is tabulated on a geometric grid
and looked up at the grid point below ``r``, which overestimates it.
"""

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from .criteria import ClassifierPolicy, Verdict, classify_improper_integral
from .errors import InputError, NumericError, PolicyError
from .quadrature import integrate_log
from .rng import derive_seed_nb, normal_pair, wilson_interval

__all__ = [
    "SdePolicy",
    "PathOutcome",
    "ExplosionEstimate",
    "certification_table",
    "simulate_radial_path",
    "explosion_probability",
]

SURVIVED, EXPLODED, CENSORED, FAILED = 0, 1, 2, 3
_KIND_NAMES = {SURVIVED: "Survived", EXPLODED: "Exploded", CENSORED: "Censored"}
_FORM_CODES = {"linear": 0, "sinh": 1, "constant": 2, "power_exp": 3, "quintic_blend": 4}


@dataclass(frozen=True)
class SdePolicy:
    """Step control and certification settings.

    ``R_cert=None`` picks the smallest tabulated radius ``>= max(r0, 1)``
    whose certification integral is at most ``auto_fraction * T``; when
    that integral diverges no path can ever be certified and none explodes.

    The step is ``c_step / (1 + |b'| + |b| / max(r, 1))`` capped by
    ``dt_max``, where ``b`` is the drift: the drift changes by a fraction
    of at most ``c_step`` per step, so steep drifts cost ``O(log r)``
    steps rather than ``O(b(r))``.
    """

    dt_max: float = 1e-3
    c_step: float = 0.01
    R_cert: float = None
    margin: float = 0.5
    auto_fraction: float = 0.1
    max_steps: int = 20_000_000


@dataclass(frozen=True)
class PathOutcome:
    kind: str
    value: float
    steps: int
    seed: int

    @property
    def t_explode(self):
        return self.value if self.kind == "Exploded" else None

    @property
    def r_T(self):
        return self.value if self.kind == "Survived" else None


@dataclass
class ExplosionEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    n_paths: int
    n_exploded: int
    n_survived: int
    n_censored: int
    mean_explosion_time: float
    reliable: bool
    R_cert: float
    outcomes: tuple = ()

    def to_dict(self):
        return {k: getattr(self, k) for k in (
            "p_hat", "ci_low", "ci_high", "n_paths", "n_exploded", "n_survived",
            "n_censored", "mean_explosion_time", "reliable", "R_cert")}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def paths_csv(self, fh=None):
        own = fh is None
        fh = fh or io.StringIO()
        w = csv.writer(fh)
        w.writerow(["seed", "outcome", "t_explode_or_r_T", "steps"])
        for o in self.outcomes:
            w.writerow([o.seed, o.kind, repr(o.value), o.steps])
        return fh.getvalue() if own else None

    def same_as(self, other):
        """Bitwise equality of the estimate and every path outcome."""
        return self.to_dict() == other.to_dict() and self.outcomes == other.outcomes


# --------------------------------------------------------------------------
# profile encoding for the compiled kernel


def _encode(profile):
    segs = profile.segments
    los = np.array([s.lo for s in segs], dtype=np.float64)
    forms = np.array([_FORM_CODES[s.form] for s in segs], dtype=np.int64)
    P = np.zeros((len(segs), 10))
    for i, s in enumerate(segs):
        p = s.params
        if s.form == "power_exp":
            P[i, 0], P[i, 1] = float(p["n"]), float(p["alpha"])
        elif s.form == "constant":
            P[i, 2] = float(p["c"])
        elif s.form == "quintic_blend":
            P[i, 3] = float(p["origin"])
            P[i, 4:10] = np.asarray(p["coeffs"], dtype=float)
    return los, forms, P


@nb.njit(nogil=True, cache=True)
def _log_deriv(r, los, forms, P):
    """``(f'/f, (f'/f)')`` at ``r``; NaN where ``f <= 0``."""
    i = 0
    while i + 1 < los.size and r >= los[i + 1]:
        i += 1
    k = forms[i]
    if k == 0:
        return 1.0 / r, -1.0 / (r * r)
    if k == 1:
        sh = math.sinh(r)
        return 1.0 / math.tanh(r), -1.0 / (sh * sh)
    if k == 2:
        return 0.0, 0.0
    if k == 3:
        m = P[i, 0] - 1.0
        al = P[i, 1]
        L = (al - 1.0) / (m * r) + al * r ** (al - 1.0) / m
        dL = -(al - 1.0) / (m * r * r) + al * (al - 1.0) * r ** (al - 2.0) / m
        return L, dL
    t = r - P[i, 3]
    f = 0.0
    d = 0.0
    dd = 0.0
    for j in range(5, -1, -1):
        f = f * t + P[i, 4 + j]
    for j in range(5, 0, -1):
        d = d * t + j * P[i, 4 + j]
    for j in range(5, 1, -1):
        dd = dd * t + j * (j - 1) * P[i, 4 + j]
    if f <= 0.0:
        return math.nan, math.nan
    L = d / f
    return L, dd / f - L * L


@nb.njit(nogil=True, cache=True)
def _run_paths(keys, out_kind, out_val, out_steps, r0, T, nm1, los, forms, P,
               dt_max, c_step, R_cert, margin, g_log_r0, g_dlog, g_vals, max_steps):
    for j in range(keys.size):
        key = keys[j]
        r = r0
        t = 0.0
        step = 0
        kind = SURVIVED
        z1 = 0.0
        while t < T:
            if step >= max_steps:
                kind = CENSORED
                break
            if r >= R_cert:
                # conservative table lookup: grid point at or below r
                idx = int(math.floor((math.log(r) - g_log_r0) / g_dlog))
                if idx >= g_vals.size:
                    idx = g_vals.size - 1
                if g_vals[idx] < margin * (T - t):
                    kind = EXPLODED
                    break
            L, dL = _log_deriv(r, los, forms, P)
            b = nm1 * L
            if not math.isfinite(b):
                kind = FAILED
                break
            # the drift changes by at most a fraction c_step per step, and the
            # drift displacement stays below c_step * max(r, 1)
            dt = c_step / (1.0 + nm1 * abs(dL) + abs(b) / max(r, 1.0))
            if dt > dt_max:
                dt = dt_max
            if dt > T - t:
                dt = T - t
            if step % 2 == 0:
                z0, z1 = normal_pair(key, np.uint64(step // 2))
                z = z0
            else:
                z = z1
            r = abs(r + b * dt + math.sqrt(2.0 * dt) * z)
            t += dt
            step += 1
        out_kind[j] = kind
        out_val[j] = t if kind == EXPLODED else r
        out_steps[j] = step


# --------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class _CertTable:
    R_cert: float
    log_r0: float
    dlog: float
    values: np.ndarray


_PER_OCTAVE = 16


def certification_table(profile, n, R, octaves=40):
    """``G(r) = ∫_r^∞ 2/b`` at ``R 2^{k/16}``, or ``None`` if it diverges."""
    def log_g(r):
        r = np.asarray(r, dtype=float)
        _, L, _ = profile.log_jet(r)
        return math.log(2.0) - np.log((n - 1) * np.asarray(L))

    v = classify_improper_integral(log_g=log_g, r0=R, policy=ClassifierPolicy(m_max=octaves),
                                   criterion="certification")
    if v.verdict is not Verdict.CONVERGES:
        return None
    grid = R * 2.0 ** (np.arange(octaves * _PER_OCTAVE + 1) / _PER_OCTAVE)
    pieces = np.array([integrate_log(log_g, a, b) for a, b in zip(grid[:-1], grid[1:])])
    # G at each node = tail beyond the grid + everything between the node and the end
    log_tail = v.log_extrapolated_tail
    rev = np.logaddexp.accumulate(np.concatenate([[log_tail], pieces[::-1]]))[::-1]
    return _CertTable(float(R), math.log(R), math.log(2.0) / _PER_OCTAVE, np.exp(rev))


def _resolve_cert(profile, n, r0, T, policy):
    if policy.R_cert is not None:
        tab = certification_table(profile, n, float(policy.R_cert))
        if tab is None:
            raise PolicyError(
                f"∫ 2/b diverges beyond R_cert={policy.R_cert}: explosion cannot be "
                "certified for this profile (pass R_cert=None to simulate without it)"
            )
        return tab
    start = max(float(r0), 1.0)
    tab = certification_table(profile, n, start)
    if tab is None:
        return None
    ok = np.nonzero(tab.values <= policy.auto_fraction * max(T, 1e-300))[0]
    k = int(ok[0]) if ok.size else tab.values.size - 1
    R = start * 2.0 ** (k / _PER_OCTAVE)
    return _CertTable(R, math.log(R), tab.dlog, tab.values[k:])


def _kernel_args(profile, n, r0, T, policy, cert):
    los, forms, P = _encode(profile)
    if cert is None:
        cert_args = (math.inf, 0.0, 1.0, np.array([math.inf]))
    else:
        cert_args = (cert.R_cert, cert.log_r0, cert.dlog, cert.values)
    return (float(r0), float(T), float(n - 1), los, forms, P, float(policy.dt_max),
            float(policy.c_step), cert_args[0], float(policy.margin), cert_args[1],
            cert_args[2], cert_args[3], int(policy.max_steps))


def _check_failed(kind, val, seeds):
    bad = np.nonzero(kind == FAILED)[0]
    if bad.size:
        j = int(bad[0])
        raise NumericError(f"drift undefined (f <= 0) at r={val[j]!r} on path seed {seeds[j]}",
                           where=float(val[j]))


def simulate_radial_path(profile, n, r0, T, seed, policy=None):
    """One Euler-Maruyama path with adaptive step and certified explosion."""
    policy = policy or SdePolicy()
    if not r0 > 0:
        raise InputError("r0 must be positive")
    if T < 0:
        raise InputError("T must be nonnegative")
    cert = _resolve_cert(profile, n, r0, T, policy) if T > 0 else None
    keys = np.array([seed % 2**64], dtype=np.uint64)
    kind = np.zeros(1, np.int64)
    val = np.zeros(1)
    steps = np.zeros(1, np.int64)
    _run_paths(keys, kind, val, steps, *_kernel_args(profile, n, r0, T, policy, cert))
    _check_failed(kind, val, keys)
    return PathOutcome(_KIND_NAMES[int(kind[0])], float(val[0]), int(steps[0]), int(keys[0]))


def default_workers():
    return max(1, int(os.environ.get("MODELMAN_THREADS", os.cpu_count() or 1)))


def explosion_probability(profile, n, r0, T, n_paths=10_000, base_seed=0, workers=None,
                          policy=None, keep_paths=True):
    """Monte Carlo explosion probability by time ``T`` with a Wilson interval.

    Path ``j`` is keyed by ``derive_seed(base_seed, j)``; the result is
    identical for any number of workers.
    """
    policy = policy or SdePolicy()
    if n_paths < 100:
        raise InputError("n_paths must be at least 100")
    workers = default_workers() if workers is None else int(workers)
    cert = _resolve_cert(profile, n, r0, T, policy) if T > 0 else None
    args = _kernel_args(profile, n, r0, T, policy, cert)
    base = np.uint64(base_seed % 2**64)
    keys = np.array([derive_seed_nb(base, np.uint64(j)) for j in range(n_paths)], dtype=np.uint64)
    kind = np.zeros(n_paths, np.int64)
    val = np.zeros(n_paths)
    steps = np.zeros(n_paths, np.int64)

    chunks = np.array_split(np.arange(n_paths), max(1, 4 * workers))

    def work(ix):
        if ix.size:
            sl = slice(int(ix[0]), int(ix[-1]) + 1)
            _run_paths(keys[sl], kind[sl], val[sl], steps[sl], *args)

    if workers == 1:
        for c in chunks:
            work(c)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(work, chunks))
    _check_failed(kind, val, keys)

    n_exp = int(np.sum(kind == EXPLODED))
    n_cen = int(np.sum(kind == CENSORED))
    lo, hi = wilson_interval(n_exp, n_paths)
    times = val[kind == EXPLODED]
    mean_t = math.fsum(times) / n_exp if n_exp else math.nan
    outcomes = tuple(
        PathOutcome(_KIND_NAMES[int(k)], float(v), int(s), int(key))
        for k, v, s, key in zip(kind, val, steps, keys)
    ) if keep_paths else ()
    return ExplosionEstimate(
        p_hat=n_exp / n_paths,
        ci_low=lo,
        ci_high=hi,
        n_paths=n_paths,
        n_exploded=n_exp,
        n_survived=n_paths - n_exp - n_cen,
        n_censored=n_cen,
        mean_explosion_time=mean_t,
        reliable=n_cen <= 0.01 * n_paths,
        R_cert=cert.R_cert if cert is not None else math.inf,
        outcomes=outcomes,
    )
