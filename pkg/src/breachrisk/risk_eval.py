"""Forecast scoring (CRPS, MAE), VaR estimates and violation backtests."""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from .copula.empirical import empirical_quantile
from .errors import ValidationError

DQ_LAGS = 4


def crps(samples, observation: float) -> float:
    """CRPS of the empirical predictive distribution of ``samples`` at ``observation``.

    Uses the energy form ``E|X - s| - E|X - X'| / 2`` where the second
    expectation runs over all ordered pairs (including i = j), which equals
    the integral of ``(F(y) - 1{s <= y})**2`` for the sample CDF ``F``.
    The pair term is evaluated in O(n log n) on the sorted sample.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValidationError("crps needs at least one sample")
    s = float(observation)
    if x[0] == x[-1]:
        # point forecast: the pair term vanishes, avoid rounding in the mean
        return abs(float(x[0]) - s)
    first = np.abs(x - s).mean()
    # sum_{i,j} |x_i - x_j| = 2 * sum_i (2i - n + 1) x_(i), i zero-based
    weights = 2.0 * np.arange(n) - n + 1
    pair_mean = 2.0 * np.dot(weights, x) / (n * n)
    return float(max(first - 0.5 * pair_mean, 0.0))


def mae(predicted, observed) -> float:
    """Mean absolute error between paired predictions and observations."""
    p = np.asarray(predicted, dtype=float)
    o = np.asarray(observed, dtype=float)
    if p.shape != o.shape or p.size == 0:
        raise ValidationError("mae needs two non-empty sequences of equal length")
    return float(np.abs(o - p).mean())


def var_estimate(samples, alpha: float) -> float:
    """Value at risk: the type-7 sample quantile at level ``alpha``."""
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValidationError("var_estimate needs at least one sample")
    return float(empirical_quantile(x, alpha))


def _xlogy(x, y):
    # 0 * log(0) = 0 convention
    return 0.0 if x == 0 else x * math.log(y)


def _bernoulli_ll(n0, n1, p):
    return _xlogy(n0, 1.0 - p) + _xlogy(n1, p)


def lruc(n: int, x: int, p: float):
    """Kupiec unconditional-coverage LR test.

    Returns ``(stat, p_value)`` with the p-value from chi-square(1).
    """
    if n <= 0:
        raise ValidationError("lruc needs n >= 1")
    if not 0 <= x <= n:
        raise ValidationError(f"violation count {x} outside [0, {n}]")
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    pi = x / n
    stat = -2.0 * (_bernoulli_ll(n - x, x, p) - _bernoulli_ll(n - x, x, pi))
    stat = max(stat, 0.0) + 0.0  # avoid -0.0
    return stat, float(stats.chi2.sf(stat, 1))


def transition_counts(hits):
    h = np.asarray(hits, dtype=int)
    prev, cur = h[:-1], h[1:]
    n00 = int(np.sum((prev == 0) & (cur == 0)))
    n01 = int(np.sum((prev == 0) & (cur == 1)))
    n10 = int(np.sum((prev == 1) & (cur == 0)))
    n11 = int(np.sum((prev == 1) & (cur == 1)))
    return n00, n01, n10, n11


def lrcc(hits, p: float):
    """Christoffersen conditional-coverage test: LRuc plus the first-order
    Markov independence LR. Returns ``(stat, p_value)`` from chi-square(2)."""
    h = np.asarray(hits)
    if h.size == 0:
        raise ValidationError("lrcc needs a non-empty hit sequence")
    if h.size < 2:
        raise ValidationError("lrcc needs at least two hits")
    if not np.all((h == 0) | (h == 1)):
        raise ValidationError("hits must be 0/1")
    uc, _ = lruc(h.size, int(h.sum()), p)
    n00, n01, n10, n11 = transition_counts(h)
    pi01 = n01 / (n00 + n01) if n00 + n01 else 0.0
    pi11 = n11 / (n10 + n11) if n10 + n11 else 0.0
    pi = (n01 + n11) / (n00 + n01 + n10 + n11)
    ll_markov = _bernoulli_ll(n00, n01, pi01) + _bernoulli_ll(n10, n11, pi11)
    ll_iid = _bernoulli_ll(n00 + n10, n01 + n11, pi)
    ind = max(-2.0 * (ll_iid - ll_markov), 0.0)
    stat = uc + ind
    return stat, float(stats.chi2.sf(stat, 2))


@dataclasses.dataclass(frozen=True)
class DQResult:
    stat: Optional[float]
    p_value: Optional[float]
    degenerate: bool = False

    def __iter__(self):
        return iter((self.stat, self.p_value))


def dq_test(hits, var_series, alpha: float, lags: int = DQ_LAGS) -> DQResult:
    """Engle-Manganelli dynamic quantile test.

    Demeaned hits ``hit_t - (1 - alpha)`` are regressed on an intercept,
    ``lags`` of their own lags and the contemporaneous VaR. A singular design
    (for instance no violations at all) yields a degenerate result with no
    p-value instead of raising.
    """
    h = np.asarray(hits, dtype=float)
    var = np.asarray(var_series, dtype=float)
    if h.shape != var.shape:
        raise ValidationError("hits and var_series must have equal length")
    if h.size <= lags + 2:
        raise ValidationError(f"dq_test needs more than {lags + 2} observations")
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    hit = h - (1.0 - alpha)
    y = hit[lags:]
    cols = [np.ones_like(y)] + [hit[lags - k:-k] for k in range(1, lags + 1)] + [var[lags:]]
    X = np.column_stack(cols)
    if h.min() == h.max() or np.linalg.matrix_rank(X) < X.shape[1]:
        return DQResult(None, None, True)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    xb = X @ beta
    stat = float(xb @ xb / (alpha * (1.0 - alpha)))
    return DQResult(stat, float(stats.chi2.sf(stat, lags + 2)))


@dataclasses.dataclass(frozen=True)
class BacktestReport:
    alpha: float
    n: int
    expected: float
    observed: int
    lruc_stat: float
    lruc_p: float
    lrcc_stat: Optional[float]
    lrcc_p: Optional[float]
    dq_stat: Optional[float]
    dq_p: Optional[float]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _present(obs) -> bool:
    return obs is not None and not (isinstance(obs, float) and math.isnan(obs))


def violations(samples_per_step, observations, alpha):
    """Return ``(hits, var)`` over the steps whose observation is present."""
    var, hits = [], []
    for samples, obs in zip(samples_per_step, observations):
        if not _present(obs):
            continue
        v = var_estimate(samples, alpha)
        var.append(v)
        hits.append(1 if obs > v else 0)
    return np.array(hits, dtype=int), np.array(var)


def backtest_var(var_series, observations: Sequence[Optional[float]], alpha: float,
                 lags: int = DQ_LAGS) -> BacktestReport:
    """Backtest a VaR series directly; missing observations are skipped."""
    if len(var_series) != len(observations):
        raise ValidationError("var_series and observations must have equal length")
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    keep = [(float(v), float(o)) for v, o in zip(var_series, observations) if _present(o)]
    if not keep:
        raise ValidationError("backtest needs at least one present observation")
    var = np.array([v for v, _ in keep])
    hits = np.array([1 if o > v else 0 for v, o in keep], dtype=int)
    return _report(hits, var, alpha, lags)


def _report(hits, var, alpha, lags) -> BacktestReport:
    n = hits.size
    x = int(hits.sum())
    uc_stat, uc_p = lruc(n, x, 1 - alpha)
    cc_stat = cc_p = None
    if n >= 2:
        cc_stat, cc_p = lrcc(hits, 1 - alpha)
    dq = DQResult(None, None, True)
    if n > lags + 2:
        dq = dq_test(hits, var, alpha, lags)
    return BacktestReport(alpha=float(alpha), n=n, expected=n * (1 - alpha), observed=x,
                          lruc_stat=uc_stat, lruc_p=uc_p, lrcc_stat=cc_stat, lrcc_p=cc_p,
                          dq_stat=dq.stat, dq_p=dq.p_value)


def backtest(steps, observations: Sequence[Optional[float]], alpha: float,
             metric: str = "ttn", lags: int = DQ_LAGS) -> BacktestReport:
    """Backtest VaR forecasts built from predictive steps.

    ``steps`` are :class:`~breachrisk.rolling.PredictiveStep` objects (or raw
    sample arrays). A violation is an observation strictly above the step's
    VaR. Missing observations are dropped from every test while the order of
    the remaining ones is kept.
    """
    if len(steps) != len(observations):
        raise ValidationError("steps and observations must have equal length")
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    samples = [s.samples(metric) if hasattr(s, "samples") else s for s in steps]
    hits, var = violations(samples, observations, alpha)
    if hits.size == 0:
        raise ValidationError("backtest needs at least one present observation")
    return _report(hits, var, alpha, lags)


def _cell(x):
    if x is None:
        return ""
    return str(x) if isinstance(x, int) else repr(float(x))


TABLE_COLUMNS = ("alpha", "expected", "observed", "lruc_p", "lrcc_p", "dq_p")


def backtest_table(reports: List[BacktestReport]) -> str:
    """Backtest summary as CSV text, one row per VaR level."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in reports:
        w.writerow([_cell(getattr(r, c)) for c in TABLE_COLUMNS])
    return buf.getvalue()
