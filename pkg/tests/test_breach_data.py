import datetime as dt
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from breachrisk.breach_data import (BreachRecord, MetricPoint, Pattern, SyntheticConfig,
                                    derive_itn, derive_metrics, derive_series,
                                    generate_synthetic, pattern_counts, read_breach_csv,
                                    summarize)
from breachrisk.errors import ValidationError

D = dt.date


def test_multiple_breach_dates_use_earliest():
    rec = BreachRecord("Steel Partners Holdings", (D(2020, 4, 29), D(2020, 4, 18)), None,
                       D(2020, 11, 23))
    pt = derive_metrics(rec)
    assert pt.ttn == 219
    assert pt.tti is None
    assert pt.pattern is Pattern.TTI_MISSING


def test_same_day_breach_is_complete_with_zeros():
    rec = BreachRecord("x", (D(2020, 1, 1),), D(2020, 1, 1), D(2020, 1, 1))
    pt = derive_metrics(rec)
    assert (pt.ttn, pt.tti, pt.pattern) == (0, 0, Pattern.COMPLETE)


def test_no_breach_date_is_both_missing():
    pt = derive_metrics(BreachRecord("x", (), None, D(2020, 6, 1)))
    assert pt.ttn is None and pt.tti is None
    assert pt.pattern is Pattern.BOTH_MISSING


def test_identified_without_breach_date_is_both_missing_but_has_itn():
    rec = BreachRecord("x", (), D(2020, 5, 1), D(2020, 6, 1))
    assert derive_metrics(rec).pattern is Pattern.BOTH_MISSING
    assert derive_itn(rec) == 31


@pytest.mark.parametrize("identified, reported", [
    (None, D(2019, 12, 31)),               # report before breach
    (D(2019, 12, 1), D(2020, 2, 1)),       # identification before breach
    (D(2020, 3, 1), D(2020, 2, 1)),        # identification after report
])
def test_negative_day_counts_name_the_record(identified, reported):
    rec = BreachRecord("Acme Corp", (D(2020, 1, 1),), identified, reported)
    with pytest.raises(ValidationError, match="Acme Corp"):
        derive_metrics(rec)


def test_metric_point_invariants():
    with pytest.raises(ValidationError):
        MetricPoint(0, None, 3.0)
    with pytest.raises(ValidationError):
        MetricPoint(0, 3.0, 5.0)
    with pytest.raises(ValidationError):
        MetricPoint(0, -1.0, None)
    with pytest.raises(ValidationError):
        MetricPoint(0, 5.0, 3.0, Pattern.TTI_MISSING)
    assert MetricPoint(0, 5.0, 3.0, "Complete").pattern is Pattern.COMPLETE


@given(st.lists(st.tuples(st.integers(0, 3000), st.integers(0, 3000), st.integers(0, 3000)),
                min_size=1, max_size=20))
def test_derived_tti_never_exceeds_ttn(offsets):
    base = D(2015, 1, 1)
    for a, b, c in offsets:
        b_, i_, r_ = sorted((a, b, c))
        rec = BreachRecord("o", (base + dt.timedelta(b_),), base + dt.timedelta(i_),
                           base + dt.timedelta(r_))
        pt = derive_metrics(rec)
        assert 0 <= pt.tti <= pt.ttn


CSV = """organization,breach_dates,identified_date,reported_date
B,2020-03-01,,2020-05-01
A,2020-01-01;2019-12-25,2020-01-10,2020-02-01
C,,,2020-02-01
"""


def test_read_csv_and_order_by_report_date():
    recs = read_breach_csv(io.StringIO(CSV))
    assert [r.organization for r in recs] == ["B", "A", "C"]
    assert recs[1].breach_date == D(2019, 12, 25)
    pts = derive_series(recs)
    # ties on report date keep input order: A before C
    assert [p.ttn for p in pts] == [38, None, 61]
    assert [p.index for p in pts] == [0, 1, 2]


def test_read_csv_reports_row_and_field():
    bad = "organization,breach_dates,identified_date,reported_date\nX,2020-13-01,,2020-01-01\n"
    with pytest.raises(ValidationError, match=r"row 2.*breach_dates"):
        read_breach_csv(bad)
    with pytest.raises(ValidationError, match="reported_date"):
        read_breach_csv("organization,breach_dates,identified_date\n")
    with pytest.raises(ValidationError, match="reported_date"):
        read_breach_csv("organization,breach_dates,identified_date,reported_date\nX,,,\n")


def test_summarize_examples():
    s = summarize([1, 2, 3, 4, 100])
    assert (s.mean, s.median, s.min, s.max) == (22, 3, 1, 100)
    s = summarize([0, 0, 5, None])
    assert s.na_pct == 25
    assert s.zero_pct == pytest.approx(200 / 3)
    s = summarize([7])
    assert s.min == s.q1 == s.median == s.mean == s.q3 == s.max == 7
    assert s.sd == 0
    assert set(s.to_dict()) == {"min", "q1", "median", "mean", "sd", "q3", "max", "na_pct", "zero_pct"}


def test_summarize_rejects_all_missing():
    with pytest.raises(ValidationError):
        summarize([None, None])
    with pytest.raises(ValidationError):
        summarize([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.one_of(st.just(0.0), st.floats(1e-3, 1e4)), min_size=2, max_size=40),
       st.floats(0.1, 10), st.randoms(use_true_random=False))
def test_summarize_permutation_invariant_and_scale_equivariant(xs, c, rnd):
    s = summarize(xs)
    ys = list(xs)
    rnd.shuffle(ys)
    assert summarize(ys).to_dict() == pytest.approx(s.to_dict())
    t = summarize([c * x for x in xs])
    for f in ("min", "q1", "median", "mean", "q3", "max", "sd"):
        assert getattr(t, f) == pytest.approx(c * getattr(s, f), rel=1e-9, abs=1e-9)
    assert t.na_pct == s.na_pct and t.zero_pct == s.zero_pct
    assert s.min <= s.q1 <= s.median <= s.q3 <= s.max


def test_synthetic_pattern_proportions():
    cfg = SyntheticConfig(length=2123, tti_missing_rate=0.19, both_missing_rate=0.11)
    data = generate_synthetic(cfg, seed=3)
    counts = pattern_counts(data.points)
    assert abs(counts[Pattern.TTI_MISSING] / 2123 - 0.19) < 0.02
    assert abs(counts[Pattern.BOTH_MISSING] / 2123 - 0.11) < 0.02


def test_synthetic_no_missingness_and_truth_consistency():
    data = generate_synthetic(SyntheticConfig(length=300, tti_missing_rate=0, both_missing_rate=0), 1)
    assert all(p.pattern is Pattern.COMPLETE for p in data.points)
    assert np.all(data.tti_true <= data.ttn_true)
    # unmasking reproduces the observed values exactly
    assert [p.ttn for p in data.points] == list(data.ttn_true)
    assert [p.tti for p in data.points] == list(data.tti_true)


def test_synthetic_deterministic_and_masked_values_match_truth():
    a = generate_synthetic(SyntheticConfig(length=400), 9)
    b = generate_synthetic(SyntheticConfig(length=400), 9)
    assert a.points == b.points
    for p, x, y in zip(a.points, a.ttn_true, a.tti_true):
        if p.ttn is not None:
            assert p.ttn == x
        if p.tti is not None:
            assert p.tti == y


@pytest.mark.parametrize("rates", [(-0.1, 0.1), (1.0, 0.0), (0.6, 0.5)])
def test_synthetic_rejects_bad_rates(rates):
    with pytest.raises(ValidationError):
        SyntheticConfig(tti_missing_rate=rates[0], both_missing_rate=rates[1])
