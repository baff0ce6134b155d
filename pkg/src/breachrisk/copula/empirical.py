"""Rank-based helpers: pseudo-observations, sample quantiles, Kendall's tau."""
from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import DomainError, ValidationError


def pseudo_observations(x) -> np.ndarray:
    """Map each column to ``rank / (n + 1)`` using average ranks for ties.

    Parameters
    ----------
    x : array_like, shape (n, d)
        Raw observations, ``n >= 2``.

    Returns
    -------
    numpy.ndarray
        Same shape as ``x`` with every entry strictly inside (0, 1).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise ValidationError("pseudo-observations need at least 2 rows")
    if not np.all(np.isfinite(x)):
        raise ValidationError("pseudo-observations need finite input")
    return stats.rankdata(x, axis=0, method="average") / (n + 1.0)


def empirical_quantile(sample, p):
    """Type-7 (linear interpolation) sample quantile.

    With sorted values x(1) <= ... <= x(n) and h = (n - 1) p + 1, the result
    is x(floor h) + (h - floor h) (x(floor h + 1) - x(floor h)). ``p`` may be
    an array; the result then has the same shape.
    """
    sample = np.asarray(sample, dtype=float).ravel()
    if sample.size == 0:
        raise ValidationError("empirical_quantile needs a nonempty sample")
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
        raise DomainError("quantile level must lie in [0, 1]")
    out = np.quantile(sample, p_arr, method="linear")
    return out if np.ndim(out) else float(out)


def kendall_tau(pairs) -> float:
    """Sample Kendall tau-b between the two columns of ``pairs``."""
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] < 2:
        raise ValidationError("kendall_tau needs an (n, 2) array with n >= 2")
    x, y = pairs[:, 0], pairs[:, 1]
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValidationError("kendall_tau undefined: a coordinate is constant")
    tau = stats.kendalltau(x, y, variant="b").statistic
    return float(tau)
