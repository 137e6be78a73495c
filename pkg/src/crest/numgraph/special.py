"""Digamma, trigamma and log-gamma for positive reals.

All three shift the argument up to ``x >= 6`` with the standard recurrences and
then evaluate an asymptotic series. Inputs may be scalars or arrays; arrays are
evaluated elementwise without Python loops over elements.
"""

import numpy as np

from crest.errors import DomainError

_SHIFT = 6.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _as_positive(x):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"argument must be positive, got {x!r}")
    return arr


def _finish(out, x):
    return float(out) if np.ndim(x) == 0 else out


def digamma(x):
    """psi(x) = d/dx log Gamma(x) for x > 0."""
    arr = _as_positive(x)
    z = arr.copy()
    acc = np.zeros_like(z)
    mask = z < _SHIFT
    while np.any(mask):
        acc[mask] -= 1.0 / z[mask]
        z[mask] += 1.0
        mask = z < _SHIFT
    inv2 = 1.0 / (z * z)
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
        1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12))))))
    out = acc + np.log(z) - 0.5 / z - series
    return _finish(out, x)


def trigamma(x):
    """psi'(x) for x > 0; the derivative used when backpropagating through digamma."""
    arr = _as_positive(x)
    z = arr.copy()
    acc = np.zeros_like(z)
    mask = z < _SHIFT
    while np.any(mask):
        acc[mask] += 1.0 / (z[mask] * z[mask])
        z[mask] += 1.0
        mask = z < _SHIFT
    inv = 1.0 / z
    inv2 = inv * inv
    # B2/z^3 - B4/z^5 + ... with Bernoulli numbers B_2k
    series = inv2 * inv * (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (
        1.0 / 30 - inv2 * (5.0 / 66 - inv2 * (691.0 / 2730 - inv2 * 7.0 / 6))))))
    out = acc + inv + 0.5 * inv2 + series
    return _finish(out, x)


def lgamma(x):
    """log Gamma(x) for x > 0."""
    arr = _as_positive(x)
    z = arr.copy()
    prod = np.ones_like(z)
    mask = z < _SHIFT
    while np.any(mask):
        prod[mask] *= z[mask]
        z[mask] += 1.0
        mask = z < _SHIFT
    inv = 1.0 / z
    inv2 = inv * inv
    series = inv * (1.0 / 12 - inv2 * (1.0 / 360 - inv2 * (1.0 / 1260 - inv2 * (
        1.0 / 1680 - inv2 * (1.0 / 1188 - inv2 * (691.0 / 360360 - inv2 / 156))))))
    out = (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + series - np.log(prod)
    return _finish(out, x)
