"""Breach-notification records, TTN/TTI day counts, summaries and synthetic data.

Input CSV schema (UTF-8, header row required)::

    organization,breach_dates,identified_date,reported_date

Dates are ISO-8601; several breach dates are separated by ``;`` and an empty
field means the value is unknown.
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import enum
import io
import math
import os
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy import special

from .copula import CopulaSpec, sample as copula_sample
from .copula.empirical import empirical_quantile
from .errors import ValidationError
from .marginal import ArmaGarchParams, simulate_arma_garch

BREACH_COLUMNS = ("organization", "breach_dates", "identified_date", "reported_date")


class Pattern(str, enum.Enum):
    COMPLETE = "Complete"
    TTI_MISSING = "TtiMissing"
    BOTH_MISSING = "BothMissing"


@dataclasses.dataclass(frozen=True)
class BreachRecord:
    organization: str
    breach_dates: tuple
    identified_date: Optional[dt.date]
    reported_date: dt.date

    def __post_init__(self):
        object.__setattr__(self, "breach_dates", tuple(sorted(self.breach_dates)))
        if self.reported_date is None:
            raise ValidationError(f"record {self.organization!r}: reported_date is required")

    @property
    def breach_date(self) -> Optional[dt.date]:
        """Earliest breach date, used when a report lists several."""
        return self.breach_dates[0] if self.breach_dates else None


@dataclasses.dataclass(frozen=True)
class MetricPoint:
    """One (TTN, TTI) observation in days; ``None`` marks a missing value."""

    index: int
    ttn: Optional[float]
    tti: Optional[float]
    pattern: Optional[Pattern] = None

    def __post_init__(self):
        if self.ttn is None and self.tti is not None:
            raise ValidationError(f"point {self.index}: tti present without ttn")
        if self.ttn is not None and self.ttn < 0 or self.tti is not None and self.tti < 0:
            raise ValidationError(f"point {self.index}: negative day count")
        if self.ttn is not None and self.tti is not None and self.tti > self.ttn:
            raise ValidationError(f"point {self.index}: tti={self.tti} exceeds ttn={self.ttn}")
        inferred = pattern_of(self.ttn, self.tti)
        if self.pattern is None:
            object.__setattr__(self, "pattern", inferred)
        elif Pattern(self.pattern) is not inferred:
            raise ValidationError(f"point {self.index}: pattern {self.pattern} inconsistent with values")
        else:
            object.__setattr__(self, "pattern", Pattern(self.pattern))


def pattern_of(ttn, tti) -> Pattern:
    if ttn is None:
        return Pattern.BOTH_MISSING
    return Pattern.COMPLETE if tti is not None else Pattern.TTI_MISSING


# ---------------------------------------------------------------------------
# parsing and derivation
# ---------------------------------------------------------------------------

def _parse_date(text, field, row):
    text = (text or "").strip()
    if not text:
        return None
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise ValidationError(f"row {row}: field {field!r} is not an ISO date: {text!r}") from None


def read_breach_csv(source) -> List[BreachRecord]:
    """Parse breach records from a path, file object or CSV text."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = str(source)
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in BREACH_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise ValidationError(f"breach CSV lacks column(s): {', '.join(missing)}")
    records = []
    for row_no, row in enumerate(reader, start=2):
        breaches = [_parse_date(s, "breach_dates", row_no)
                    for s in (row["breach_dates"] or "").split(";") if s.strip()]
        reported = _parse_date(row["reported_date"], "reported_date", row_no)
        if reported is None:
            raise ValidationError(f"row {row_no}: field 'reported_date' is required")
        records.append(BreachRecord(
            organization=(row["organization"] or "").strip(),
            breach_dates=tuple(breaches),
            identified_date=_parse_date(row["identified_date"], "identified_date", row_no),
            reported_date=reported,
        ))
    return records


def derive_metrics(record: BreachRecord, index: int = 0) -> MetricPoint:
    """Whole-day TTN and TTI for one record, measured from the earliest breach date.

    Raises
    ------
    ValidationError
        If the report or identification date precedes the breach date, or the
        identification date follows the report date.
    """
    start = record.breach_date
    if start is None:
        return MetricPoint(index, None, None)
    ttn = (record.reported_date - start).days
    if ttn < 0:
        raise ValidationError(
            f"record {record.organization!r}: reported {record.reported_date} before breach {start}")
    tti = None
    if record.identified_date is not None:
        tti = (record.identified_date - start).days
        if tti < 0:
            raise ValidationError(
                f"record {record.organization!r}: identified {record.identified_date} before breach {start}")
        if tti > ttn:
            raise ValidationError(
                f"record {record.organization!r}: identified {record.identified_date} "
                f"after report {record.reported_date}")
    return MetricPoint(index, float(ttn), None if tti is None else float(tti))


def derive_itn(record: BreachRecord) -> Optional[float]:
    """Days from identification to notification; needs no breach date."""
    if record.identified_date is None:
        return None
    days = (record.reported_date - record.identified_date).days
    if days < 0:
        raise ValidationError(f"record {record.organization!r}: identified after reported")
    return float(days)


def derive_series(records: Sequence[BreachRecord]) -> List[MetricPoint]:
    """Order records by report date (input order breaks ties) and derive metrics."""
    order = sorted(range(len(records)), key=lambda i: records[i].reported_date)
    return [derive_metrics(records[i], index=t) for t, i in enumerate(order)]


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class SummaryStats:
    min: float
    q1: float
    median: float
    mean: float
    sd: float
    q3: float
    max: float
    na_pct: float
    zero_pct: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def summarize(values: Iterable[Optional[float]]) -> SummaryStats:
    """Summary statistics over the present values, with missing and zero shares.

    Quartiles use the type-7 sample quantile; ``sd`` is the sample standard
    deviation (n - 1 denominator, 0 for a single value). ``zero_pct`` is
    relative to the present values, ``na_pct`` to all values.
    """
    values = list(values)
    if not values:
        raise ValidationError("summarize needs at least one value")
    present = np.array([float(v) for v in values if v is not None and not _isnan(v)])
    if present.size == 0:
        raise ValidationError("summarize: every value is missing")
    q1, med, q3 = empirical_quantile(present, [0.25, 0.5, 0.75])
    return SummaryStats(
        min=float(present.min()), q1=float(q1), median=float(med),
        mean=float(present.mean()),
        sd=float(present.std(ddof=1)) if present.size > 1 else 0.0,
        q3=float(q3), max=float(present.max()),
        na_pct=100.0 * (len(values) - present.size) / len(values),
        zero_pct=100.0 * float(np.count_nonzero(present == 0)) / present.size,
    )


def _isnan(v) -> bool:
    return isinstance(v, float) and math.isnan(v)


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class SyntheticConfig:
    """Generator settings.

    Log TTN follows ``ttn_model``. A second ARMA+GARCH path ``frac_model``
    drives the share of the notification delay already elapsed at
    identification, so TTI = TTN * logistic(path) <= TTN. The two paths'
    standardized innovations are coupled through ``copula``.
    """

    length: int = 2123
    tti_missing_rate: float = 0.19
    both_missing_rate: float = 0.13
    ttn_model: ArmaGarchParams = ArmaGarchParams(3.22, (0.3,), (0.2,), 0.094, 0.1, 0.8)
    frac_model: ArmaGarchParams = ArmaGarchParams(-0.56, (0.3,), (0.2,), 0.2, 0.1, 0.8)
    copula: CopulaSpec = CopulaSpec("Gumbel", 2.0)
    burn_in: int = 500
    integer_days: bool = True

    def __post_init__(self):
        for name in ("tti_missing_rate", "both_missing_rate"):
            rate = getattr(self, name)
            if not 0 <= rate < 1:
                raise ValidationError(f"{name} must lie in [0, 1), got {rate}")
        if self.tti_missing_rate + self.both_missing_rate >= 1:
            raise ValidationError("missingness rates must sum to less than 1")
        if self.length < 1:
            raise ValidationError("length must be >= 1")


@dataclasses.dataclass(frozen=True, eq=False)
class SyntheticData:
    points: List[MetricPoint]
    ttn_true: np.ndarray
    tti_true: np.ndarray
    config: SyntheticConfig


def generate_synthetic(config: SyntheticConfig = SyntheticConfig(), seed: int = 0) -> SyntheticData:
    """Simulate a masked (TTN, TTI) series with its complete truth retained."""
    n = config.length
    total = n + config.burn_in
    ss = np.random.SeedSequence(seed)
    cop_seed, mask_seed = ss.spawn(2)
    u = copula_sample(config.copula, total, np.random.default_rng(cop_seed))
    z = special.ndtri(u)
    log_ttn = simulate_arma_garch(config.ttn_model, n, z=z[:, 0], burn=config.burn_in)
    logit_frac = simulate_arma_garch(config.frac_model, n, z=z[:, 1], burn=config.burn_in)
    ttn = np.exp(log_ttn)
    tti = ttn * special.expit(logit_frac)
    if config.integer_days:
        ttn, tti = np.rint(ttn), np.rint(tti)
        tti = np.minimum(tti, ttn)

    draw = np.random.default_rng(mask_seed).random(n)
    both = draw < config.both_missing_rate
    tti_only = ~both & (draw < config.both_missing_rate + config.tti_missing_rate)
    points = []
    for t in range(n):
        if both[t]:
            points.append(MetricPoint(t, None, None))
        elif tti_only[t]:
            points.append(MetricPoint(t, float(ttn[t]), None))
        else:
            points.append(MetricPoint(t, float(ttn[t]), float(tti[t])))
    return SyntheticData(points, ttn, tti, config)


def pattern_counts(points: Sequence[MetricPoint]) -> dict:
    counts = {p: 0 for p in Pattern}
    for pt in points:
        counts[pt.pattern] += 1
    return counts
