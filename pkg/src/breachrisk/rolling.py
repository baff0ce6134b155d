"""Rolling-window one-step-ahead predictive distributions of TTN and TTI.

At each step the trailing window of log TTN and square-root TTI is fitted
with ARMA(1,1)+GARCH(1,1), a copula is re-selected on the standardized
residuals, and ``n_sim`` joint draws are pushed through both marginals'
one-step predictive laws back to the day scale.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from typing import List, Optional, Sequence

import numpy as np

from .breach_data import MetricPoint
from .copula import (ALL_FAMILIES, INDEPENDENCE, CopulaSpec, empirical_quantile,
                     kendall_tau, pseudo_observations, select_family)
from .copula.core import sample as copula_sample
from .copula.core import with_tau
from .errors import FitError, NumericalError, ValidationError
from .imputation import ImputationResult
from .marginal import (MarginalFit, TransformKind, TransformSpec, fit_arma_garch,
                       inverse_transform, one_step_moments, refilter, transform)

logger = logging.getLogger(__name__)

QUANTILES = (0.5, 0.9, 0.95, 0.99)
MIN_WINDOW = 50


@dataclasses.dataclass(frozen=True, eq=False)
class PredictiveStep:
    """Predictive sample for the point at absolute index ``step_index``."""

    step_index: int
    ttn_samples: np.ndarray
    tti_samples: np.ndarray
    copula: CopulaSpec
    filled: tuple                       # (ttn filled, tti filled)
    ttn_obs: Optional[float] = None
    tti_obs: Optional[float] = None
    marginal_fallback: tuple = (False, False)
    copula_fallback: bool = False

    @property
    def ttn_mean(self) -> float:
        return float(self.ttn_samples.mean())

    @property
    def tti_mean(self) -> float:
        return float(self.tti_samples.mean())

    def samples(self, metric: str) -> np.ndarray:
        if metric not in ("ttn", "tti"):
            raise ValidationError(f"unknown metric {metric!r}")
        return self.ttn_samples if metric == "ttn" else self.tti_samples

    def observation(self, metric: str) -> Optional[float]:
        return self.ttn_obs if metric == "ttn" else self.tti_obs


def _fit_window(x, prev: Optional[MarginalFit], which: str, index: int):
    """Fit one marginal on a window, warm-started from the previous window.

    A warm start alone is tried first; on failure the default starts are
    added, and if that fails too the previous parameters are re-used. The
    first window, having no predecessor, falls back to the rejected
    boundary estimate when there is one.
    """
    if prev is not None:
        try:
            return fit_arma_garch(x, 1, 1, start=prev.params, garch_starts=(),
                                  min_length=MIN_WINDOW), False
        except FitError:
            pass
    try:
        return fit_arma_garch(x, 1, 1, start=None if prev is None else prev.params,
                              min_length=MIN_WINDOW), False
    except FitError as exc:
        if prev is not None:
            fallback, what = prev.params, "re-using previous window's parameters"
        elif exc.estimate is not None:
            fallback, what = exc.estimate, "using the boundary estimate"
        else:
            raise
        msg = f"step {index}: {which} marginal fit failed ({exc}); {what}"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        logger.info(msg)
        return refilter(fallback, x), True


def _predict(fit: MarginalFit, x, z, spec: TransformSpec):
    sigma_t = fit.sigma[-1]
    eps_t = fit.residuals[-1] * sigma_t
    mean, sd = one_step_moments(fit.params, x[::-1], [eps_t], eps_t, sigma_t ** 2)
    return inverse_transform(mean + sd * z, spec)


def _missing(v) -> bool:
    return v is None or (isinstance(v, float) and math.isnan(v))


def roll(in_sample: ImputationResult, out_sample: Sequence[MetricPoint], window: int = 500,
         n_sim: int = 5000, seed: int = 0, *, candidates=ALL_FAMILIES,
         jitter_seed: int = 0, workers: int = 1) -> List[PredictiveStep]:
    """Rolling one-step-ahead predictive distributions over ``out_sample``.

    Parameters
    ----------
    in_sample : ImputationResult
        Completed in-sample series; its length must be at least ``window``.
    out_sample : sequence of MetricPoint
        Points to predict, in time order; they may contain missing values.
    window : int
        Rolling window length.
    n_sim : int
        Predictive draws per step.
    seed : int
        Root seed; step ``t`` samples from the substream ``(seed, t)``.
    candidates : iterable of Family
        Copula families re-selected on every window.
    jitter_seed : int
        Seed for the uniform replacement of zero TTN values before logging.
    workers : int
        Threads for the per-window copula fits; results do not depend on it.

    Returns
    -------
    list of PredictiveStep
        One per out-of-sample point. A missing observation is replaced in the
        working series by the day-scale predictive mean (``filled`` flags).
    """
    points = list(in_sample.points)
    out_sample = list(out_sample)
    if window < MIN_WINDOW:
        raise ValidationError(f"window must be >= {MIN_WINDOW}")
    if len(points) < window:
        raise ValidationError(f"in-sample length {len(points)} is shorter than the window {window}")
    if not out_sample:
        raise ValidationError("out-of-sample data is empty")
    if n_sim < 1:
        raise ValidationError("n_sim must be >= 1")

    log_spec = TransformSpec(TransformKind.LOG_WITH_ZERO_JITTER, jitter_seed)
    sqrt_spec = TransformSpec(TransformKind.SQUARE_ROOT)
    start = len(points)
    total = start + len(out_sample)
    x1 = np.empty(total)
    x2 = np.empty(total)
    x1[:start] = transform([p.ttn for p in points], log_spec)
    x2[:start] = transform([p.tti for p in points], sqrt_spec)

    fit1 = fit2 = None
    cop_starts = None
    steps = []
    for j, point in enumerate(out_sample):
        t = start + j
        w1, w2 = x1[t - window:t], x2[t - window:t]
        fit1, bad1 = _fit_window(w1, fit1, "TTN", t)
        fit2, bad2 = _fit_window(w2, fit2, "TTI", t)

        resid = np.column_stack([fit1.residuals, fit2.residuals])
        cop_failed = False
        try:
            spec, fits = select_family(pseudo_observations(resid), candidates, tau_draws=0,
                                       return_all=True, starts=cop_starts, workers=workers)
            cop_starts = {f.family: [(f.theta, f.delta)[:f.n_params]] for f in fits if f.n_params}
        except (FitError, ValidationError) as exc:
            msg = f"step {t}: copula selection failed ({exc}); using Independence"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            logger.info(msg)
            spec, cop_failed = INDEPENDENCE, True

        u = copula_sample(spec, n_sim, np.random.default_rng([int(seed), t]))
        if spec.n_params:
            try:
                spec = with_tau(spec, kendall_tau(u))
            except ValidationError:
                pass
        z1 = empirical_quantile(fit1.residuals, u[:, 0])
        z2 = empirical_quantile(fit2.residuals, u[:, 1])
        ttn_s = _predict(fit1, w1, z1, log_spec)
        tti_s = _predict(fit2, w2, z2, sqrt_spec)
        if not (np.all(np.isfinite(ttn_s)) and np.all(np.isfinite(tti_s))):
            raise NumericalError(f"step {t}: non-finite predictive samples")

        ttn_obs, tti_obs = point.ttn, point.tti
        fill1, fill2 = _missing(ttn_obs), _missing(tti_obs)
        ttn_next = float(ttn_s.mean()) if fill1 else float(ttn_obs)
        tti_next = float(tti_s.mean()) if fill2 else float(tti_obs)
        if fill2:
            tti_next = min(tti_next, ttn_next)
        x1[t] = transform([ttn_next], log_spec, offset=t)[0]
        x2[t] = math.sqrt(tti_next)

        steps.append(PredictiveStep(
            t, ttn_s, tti_s, spec, (fill1, fill2),
            None if fill1 else float(ttn_obs), None if fill2 else float(tti_obs),
            (bad1, bad2), cop_failed))
        logger.debug("step %d: copula %s", t, spec.family.value)
    return steps


# ---------------------------------------------------------------------------
# tabular output
# ---------------------------------------------------------------------------

def quantile_column(metric: str, q: float) -> str:
    """Column name for a predictive quantile, e.g. ``ttn_q95``."""
    return f"{metric}_q{round(q * 100):d}"


STEP_COLUMNS = (
    ["step_index"]
    + [c for m in ("ttn", "tti")
       for c in [f"{m}_mean", f"{m}_sd"] + [quantile_column(m, q) for q in QUANTILES]]
    + ["copula", "copula_theta", "copula_delta", "copula_tau",
       "ttn_filled", "tti_filled", "ttn_obs", "tti_obs", "ttn_crps", "tti_crps"]
)


def step_row(step: PredictiveStep) -> dict:
    """Summary of one step as a flat record (``None`` for absent values)."""
    from .risk_eval import crps

    row = {"step_index": step.step_index}
    for m in ("ttn", "tti"):
        s = step.samples(m)
        row[f"{m}_mean"] = float(s.mean())
        row[f"{m}_sd"] = float(s.std(ddof=1)) if s.size > 1 else 0.0
        for q, v in zip(QUANTILES, empirical_quantile(s, list(QUANTILES))):
            row[quantile_column(m, q)] = float(v)
    row["copula"] = step.copula.family.value
    row["copula_theta"] = step.copula.theta
    row["copula_delta"] = step.copula.delta
    row["copula_tau"] = None if math.isnan(step.copula.tau) else step.copula.tau
    row["ttn_filled"], row["tti_filled"] = int(step.filled[0]), int(step.filled[1])
    row["ttn_obs"], row["tti_obs"] = step.ttn_obs, step.tti_obs
    row["ttn_crps"] = None if step.ttn_obs is None else crps(step.ttn_samples, step.ttn_obs)
    row["tti_crps"] = None if step.tti_obs is None else crps(step.tti_samples, step.tti_obs)
    return row
