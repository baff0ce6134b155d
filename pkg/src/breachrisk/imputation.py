"""Copula imputation of missing TTN/TTI values.

Dependence is learned from the complete pairs only. Fully missing pairs get
the mean of jointly simulated values mapped through the observed marginals;
pairs with a known TTN but unknown TTI are imputed from the conditional
copula given the TTN's marginal level.
"""
from __future__ import annotations

import dataclasses
import logging
from typing import List, Sequence

import numpy as np

from .breach_data import MetricPoint, Pattern
from .copula import (ALL_FAMILIES, CopulaSpec, empirical_quantile, h_inverse,
                     pseudo_observations, select_family)
from .errors import ValidationError

logger = logging.getLogger(__name__)

MIN_COMPLETE = 30
TTI_RULES = ("mean_level", "mean_value")

# Substream tags. Joint draws are keyed per point; the conditional draws are
# common to every TTN-only point so imputed TTI stays monotone in TTN.
_JOINT, _CONDITIONAL = 1, 2


@dataclasses.dataclass(frozen=True, eq=False)
class ImputationResult:
    points: List[MetricPoint]
    copula: CopulaSpec
    imputed_flags: np.ndarray   # shape (n, 2): [ttn imputed, tti imputed]
    clamp_count: int
    n_sim: int
    seed: int

    @property
    def ttn(self) -> np.ndarray:
        return np.array([p.ttn for p in self.points], dtype=float)

    @property
    def tti(self) -> np.ndarray:
        return np.array([p.tti for p in self.points], dtype=float)

    def sidecar(self) -> dict:
        return {"copula": self.copula.to_dict(), "clamp_count": self.clamp_count,
                "n_sim": self.n_sim, "seed": self.seed}


def _point_rng(seed, tag, index):
    return np.random.default_rng([int(seed), tag, int(index)])


def _uniforms(rng, shape):
    x = rng.random(shape)
    return np.clip(x, np.finfo(float).tiny, 1 - np.finfo(float).epsneg)


def marginal_level(pool, values) -> np.ndarray:
    """Pseudo-level rank/(n+1) of ``values`` within the sorted ``pool``,
    with average ranks for ties (matches :func:`pseudo_observations`)."""
    pool = np.sort(np.asarray(pool, dtype=float))
    values = np.asarray(values, dtype=float)
    below = np.searchsorted(pool, values, side="left")
    upto = np.searchsorted(pool, values, side="right")
    rank = np.where(upto > below, (below + 1 + upto) / 2.0, below + 0.5)
    return rank / (pool.size + 1.0)


def impute(points: Sequence[MetricPoint], n_sim: int = 5000, seed: int = 0, *,
           candidates=ALL_FAMILIES, tti_rule: str = "mean_level",
           tau_draws: int = 100_000, workers: int = 1) -> ImputationResult:
    """Fill every missing TTN/TTI value.

    Parameters
    ----------
    points : sequence of MetricPoint
        Needs at least 30 complete pairs.
    n_sim : int
        Simulation size per imputed point.
    seed : int
        Root seed. A fully missing point ``t`` draws from the substream
        ``(seed, 1, t)``; TTN-only points share the conditional draws of
        substream ``(seed, 2)``, so their imputed TTI is nondecreasing in TTN
        under positive dependence.
    candidates : iterable of Family
        Copula families considered in the AIC selection.
    tti_rule : {"mean_level", "mean_value"}
        For TTN-only points: ``mean_level`` averages the conditional uniform
        draws and converts the mean once; ``mean_value`` converts every draw
        and averages on the data scale.
    workers : int
        Threads for the candidate copula fits; results do not depend on it.

    Returns
    -------
    ImputationResult
        Imputed TTI values above their TTN are clamped to it and counted.
    """
    if tti_rule not in TTI_RULES:
        raise ValidationError(f"tti_rule must be one of {TTI_RULES}")
    if n_sim < 1:
        raise ValidationError("n_sim must be >= 1")
    points = list(points)
    complete = [p for p in points if p.pattern is Pattern.COMPLETE]
    if len(complete) < MIN_COMPLETE:
        raise ValidationError(
            f"imputation needs >= {MIN_COMPLETE} complete pairs, got {len(complete)}")

    pairs = np.array([(p.ttn, p.tti) for p in complete], dtype=float)
    spec = select_family(pseudo_observations(pairs), candidates, tau_draws=tau_draws,
                         seed=seed, workers=workers)
    logger.info("imputation copula: %s", spec)

    ttn_pool = np.array([p.ttn for p in points if p.ttn is not None], dtype=float)
    tti_pool = np.array([p.tti for p in points if p.tti is not None], dtype=float)

    ttn = np.array([np.nan if p.ttn is None else p.ttn for p in points])
    tti = np.array([np.nan if p.tti is None else p.tti for p in points])
    flags = np.column_stack([np.isnan(ttn), np.isnan(tti)])

    both = [i for i, p in enumerate(points) if p.pattern is Pattern.BOTH_MISSING]
    if both:
        draws = np.stack([_uniforms(_point_rng(seed, _JOINT, points[i].index), (n_sim, 2))
                          for i in both])
        u1 = draws[:, :, 0].ravel()
        u2 = h_inverse(spec, draws[:, :, 1].ravel(), u1)
        x1 = empirical_quantile(ttn_pool, u1).reshape(len(both), n_sim)
        x2 = empirical_quantile(tti_pool, u2).reshape(len(both), n_sim)
        ttn[both] = x1.mean(axis=1)
        tti[both] = x2.mean(axis=1)

    partial = [i for i, p in enumerate(points) if p.pattern is Pattern.TTI_MISSING]
    if partial:
        levels = marginal_level(ttn_pool, ttn[partial])
        w = _uniforms(np.random.default_rng([int(seed), _CONDITIONAL]), n_sim)
        u2 = h_inverse(spec, np.tile(w, len(partial)),
                       np.repeat(levels, n_sim)).reshape(len(partial), n_sim)
        if tti_rule == "mean_level":
            tti[partial] = empirical_quantile(tti_pool, u2.mean(axis=1))
        else:
            tti[partial] = empirical_quantile(tti_pool, u2).mean(axis=1)

    over = flags[:, 1] & (tti > ttn)
    clamp_count = int(np.count_nonzero(over))
    tti[over] = ttn[over]
    if clamp_count:
        logger.info("clamped %d imputed TTI values to TTN", clamp_count)

    done = [MetricPoint(p.index, float(a), float(b)) if (fa or fb) else p
            for p, a, b, fa, fb in zip(points, ttn, tti, flags[:, 0], flags[:, 1])]
    return ImputationResult(done, spec, flags, clamp_count, n_sim, seed)


def impute_marginal_mean(points: Sequence[MetricPoint]):
    """Baseline: replace each missing value by the mean of that coordinate's
    observed values (TTI clamped to TTN). Returns ``(ttn, tti)`` arrays."""
    ttn = np.array([np.nan if p.ttn is None else p.ttn for p in points])
    tti = np.array([np.nan if p.tti is None else p.tti for p in points])
    miss_tti = np.isnan(tti)
    ttn = np.where(np.isnan(ttn), np.nanmean(ttn), ttn)
    tti = np.where(miss_tti, np.nanmean(tti), tti)
    tti = np.where(miss_tti, np.minimum(tti, ttn), tti)
    return ttn, tti


def imputation_mae(ttn, tti, ttn_true, tti_true, flags) -> float:
    """Mean absolute error over every imputed coordinate."""
    flags = np.asarray(flags, dtype=bool)
    err = np.concatenate([np.abs(np.asarray(ttn) - ttn_true)[flags[:, 0]],
                          np.abs(np.asarray(tti) - tti_true)[flags[:, 1]]])
    if err.size == 0:
        return 0.0
    return float(err.mean())
