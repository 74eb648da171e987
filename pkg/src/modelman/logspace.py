"""Small helpers for arithmetic on logarithms of positive quantities."""

import numpy as np
from scipy.special import logsumexp

__all__ = ["log1mexp", "logsubexp", "logsumexp", "logaddexp"]

logaddexp = np.logaddexp


def log1mexp(d):
    """Return ``log(1 - exp(-d))`` for ``d >= 0`` without cancellation.

    Uses the Maechler switch at ``log 2``.  ``d == 0`` gives ``-inf``.
    """
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(
            d < np.log(2.0),
            np.log(-np.expm1(-d)),
            np.log1p(-np.exp(-d)),
        )
    return out if out.ndim else float(out)


def logsubexp(a, b):
    """Return ``log(exp(a) - exp(b))`` for ``a >= b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        d = a - b
    d = np.where(np.isneginf(b), np.inf, d)
    out = a + log1mexp(d)
    return out if np.ndim(out) else float(out)
