"""Numerically stable log-domain helpers.

Probabilities are carried as base-2 logarithms throughout the package; the
sigmoid/softplus helpers below work in natural log because that is what
numpy's primitives expose. Conversions happen at the boundary.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

LN2 = float(np.log(2.0))

# Below this, log(log1p(exp(x))) is replaced by its asymptotic expansion.
_SOFTPLUS_ASYMPTOTE = -30.0


def logsumexp2(values, axis=None):
    """log2(sum(2**values)) without leaving log space.

    Empty input or all ``-inf`` entries give ``-inf``.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return -np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(values * LN2, axis=axis) / LN2


def softplus(x):
    """ln(1 + e^x)."""
    return np.logaddexp(0.0, x)


def log_softplus(x):
    """ln(ln(1 + e^x)), accurate where ``softplus(x)`` would underflow."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        direct = np.log(softplus(x))
        asymptotic = x - 0.5 * np.exp(x)
    out = np.where(x < _SOFTPLUS_ASYMPTOTE, asymptotic, direct)
    return out if out.ndim else float(out)


def log_sigmoid(x):
    """ln(1 / (1 + e^{-x}))."""
    return -softplus(-np.asarray(x, dtype=float))


def log1mexp(z, log_z=None):
    """ln(1 - e^{-z}) for z >= 0.

    ``log_z`` (the natural log of ``z``) may be supplied when ``z`` itself
    underflows to zero; it is then used for the small-``z`` branch.
    """
    z = np.asarray(z, dtype=float)
    if log_z is None:
        with np.errstate(divide="ignore"):
            log_z = np.log(z)
    log_z = np.asarray(log_z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tiny = log_z + np.log1p(-0.5 * z)
        mid = np.log(-np.expm1(-z))
        big = np.log1p(-np.exp(-z))
    out = np.where(z < 1e-8, tiny, np.where(z < LN2, mid, big))
    return out if out.ndim else float(out)
