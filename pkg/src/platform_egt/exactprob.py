"""Exact log-space probability mass functions for small finite pools.

Both pmfs are computed from a shared cumulative log-factorial table so that
every value is a single exp() of a short sum of table entries: absolute error
stays below 1e-14 for pool sizes up to a few hundred, comfortably inside the
1e-12 budget the selection engine is built against.
"""

from __future__ import annotations

import math

import numpy as np

_LOGFACT = np.zeros(1)


def _logfact_table(n: int) -> np.ndarray:
    """Cumulative log-factorial lookup, grown on demand."""
    global _LOGFACT
    if n >= _LOGFACT.size:
        m = max(n + 1, 2 * _LOGFACT.size)
        t = np.zeros(m)
        t[1:] = np.cumsum(np.log(np.arange(1, m)))
        _LOGFACT = t
    return _LOGFACT


def log_binomial_coeff(n, k) -> np.ndarray:
    """log C(n, k), elementwise; -inf outside 0 <= k <= n."""
    n = np.asarray(n, dtype=np.int64)
    k = np.asarray(k, dtype=np.int64)
    hi = int(n.max()) if n.size else 0
    t = _logfact_table(max(hi, 0))
    valid = (k >= 0) & (k <= n) & (n >= 0)
    kc = np.where(valid, k, 0)
    nc = np.where(n >= 0, n, 0)
    out = t[nc] - t[kc] - t[nc - kc]
    return np.where(valid, out, -np.inf)


def hypergeometric_pmf(pool: int, marked: int, draws: int, hits) -> np.ndarray | float:
    """P(exactly `hits` marked items among `draws` without replacement).

    `pool` items of which `marked` are marked; vectorized over `hits`.
    Raises ValueError when (pool, marked, draws) are out of bounds; `hits`
    outside the support simply yields probability 0.
    """
    if pool < 0 or not 0 <= marked <= pool or not 0 <= draws <= pool:
        raise ValueError(
            f"invalid hypergeometric parameters: pool={pool}, marked={marked}, draws={draws}"
        )
    x = np.asarray(hits, dtype=np.int64)
    logp = (
        log_binomial_coeff(marked, x)
        + log_binomial_coeff(pool - marked, draws - x)
        - log_binomial_coeff(pool, draws)
    )
    out = np.exp(logp)
    if np.isscalar(hits):
        return float(out)
    return out


def binomial_pmf(n: int, p: float, successes) -> np.ndarray | float:
    """Binomial(n, p) pmf, exact point masses at p in {0, 1}."""
    if n < 0 or not 0.0 <= p <= 1.0:
        raise ValueError(f"invalid binomial parameters: n={n}, p={p}")
    x = np.asarray(successes, dtype=np.int64)
    if p == 0.0:
        out = np.where(x == 0, 1.0, 0.0)
    elif p == 1.0:
        out = np.where(x == n, 1.0, 0.0)
    else:
        logp = log_binomial_coeff(n, x) + x * math.log(p) + (n - x) * math.log1p(-p)
        out = np.where((x >= 0) & (x <= n), np.exp(logp), 0.0)
    if np.isscalar(successes):
        return float(out)
    return out


def binomial_pmf_table(max_n: int, p: float) -> np.ndarray:
    """Rows m = 0..max_n of Binomial(m, p) pmfs over x = 0..max_n."""
    x = np.arange(max_n + 1)
    rows = [binomial_pmf(m, p, x) for m in range(max_n + 1)]
    return np.vstack(rows)
