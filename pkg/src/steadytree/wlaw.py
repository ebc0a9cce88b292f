"""Sampling utilities for the cluster size distribution w and its tilts.

Bulk draws use a table inverse-cdf with an exact tail walk based on
P(X >= n) = C(2n-2, n-1) 4^{1-n} and the ratio
P(X >= n+1)/P(X >= n) = (2n-1)/(2n).
"""

from __future__ import annotations

import math

import numpy as np

from .closed_forms import w_float_array, w_tail

_TABLE_N = 1 << 20
_cum = None
_w = None


def _tables():
    global _cum, _w
    if _cum is None:
        w = w_float_array(_TABLE_N)
        _w = w
        _cum = np.cumsum(w)
    return _cum, _w


def draw_w(rng, size=None):
    """Draw jump sizes from w (vectorized; exact tail inversion)."""
    cum, _ = _tables()
    u = rng.random(size)
    scalar = np.isscalar(u)
    u = np.atleast_1d(u)
    out = np.searchsorted(cum, u, side="left") + 0  # index i -> size i
    big = out >= _TABLE_N
    if np.any(big):
        out[big] = [_tail_inverse(1.0 - ub) for ub in u[big]]
    out = out.astype(np.int64)
    out[out < 1] = 1
    return int(out[0]) if scalar and out.shape == (1,) else out


def _log_tail(m: float) -> float:
    """log P(X >= m); exact log-gamma for small m, central-binomial
    asymptotics beyond (the log-gamma difference loses absolute precision
    once its terms reach ~1e12)."""
    if m <= 1_000_000:
        return (
            math.lgamma(2 * m - 1)
            - 2 * math.lgamma(m)
            + (1 - m) * math.log(4.0)
        )
    p = m - 1.0
    return -0.5 * math.log(math.pi * p) + math.log1p(
        -1.0 / (8 * p) + 1.0 / (128 * p * p)
    )


def _tail_inverse(tau: float) -> int:
    """Smallest n with cdf(n) >= 1 - tau, i.e. the smallest n such that
    P(X >= n+1) <= tau."""
    lt = math.log(tau)
    m = max(2.0, 1.0 / (math.pi * tau * tau))
    for _ in range(80):
        step = 2.0 * m * (_log_tail(m) - lt)  # d log tail / dm ~ -1/(2m)
        m = max(2.0, m + step)
        if abs(step) < 0.49:
            break
    mi = max(2, int(round(m)))
    if m < 1e12:
        for _ in range(10000):
            if _log_tail(mi) <= lt:
                break
            mi += 1
        for _ in range(10000):
            if mi <= 2 or _log_tail(mi - 1) > lt:
                break
            mi -= 1
    return mi - 1


def residual_explosion_time(sizes, rng):
    """Exact draw of the remaining time to explosion given current sizes:
    cdf 1 - sech^{2k}(x/2)."""
    k = np.asarray(sizes, dtype=float)
    u = rng.random(k.shape) if k.shape else rng.random()
    return 2.0 * np.arccosh(np.exp(-np.log(u) / (2.0 * k)))


def draw_equilibrium_age(rng, size=None):
    """Ages with density (1/2) sech^2(x/2) (cdf tanh(x/2))."""
    return 2.0 * np.arctanh(rng.random(size))


def draw_explosion_time(rng, size=None):
    """Explosion time from a singleton: cdf tanh^2(x/2)."""
    return 2.0 * np.arctanh(np.sqrt(rng.random(size)))


def sample_tilted_w(rng, q: float, jcap: int = 10**6) -> int:
    """One draw from the tilt pmf proportional to w_j q^j, q in (0, 1].

    Returns jcap + 1 when the draw exceeds jcap.
    """
    cum, w = _tables()
    if q >= 0.5:
        # rejection against w with acceptance q^j (evaluated in logs so a
        # huge proposal is simply rejected rather than flagged)
        log_q = math.log(q)
        for _ in range(100000):
            j = draw_w(rng)
            lp = j * log_q
            if lp > -745.0 and rng.random() <= math.exp(lp):
                return j if j <= jcap else jcap + 1
        raise RuntimeError("tilted-w rejection stalled")
    total = 1.0 - math.sqrt(1.0 - q)
    target = rng.random() * total
    acc = 0.0
    qj = 1.0
    for j in range(1, min(jcap, _TABLE_N) + 1):
        qj *= q
        acc += w[j] * qj
        if acc >= target:
            return j
    return jcap + 1


def sample_sizebiased_tilted_w(rng, q: float, jcap: int = 10**6) -> int:
    """One draw from the tilt pmf proportional to j w_j q^j, q in (0, 1)."""
    cum, w = _tables()
    total = q / (2.0 * math.sqrt(1.0 - q))
    target = rng.random() * total
    acc = 0.0
    qj = 1.0
    for j in range(1, min(jcap, _TABLE_N) + 1):
        qj *= q
        acc += j * w[j] * qj
        if acc >= target:
            return j
    return jcap + 1
