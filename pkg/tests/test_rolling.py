import math
import warnings

import numpy as np
import pytest

from breachrisk.breach_data import MetricPoint, SyntheticConfig, generate_synthetic
from breachrisk.copula import CopulaSpec, Family
from breachrisk.errors import ValidationError
from breachrisk.imputation import ImputationResult, impute
from breachrisk.rolling import STEP_COLUMNS, quantile_column, roll, step_row

FAMS = (Family.INDEPENDENCE, Family.GAUSSIAN, Family.GUMBEL, Family.FRANK)


def as_result(points):
    flags = np.zeros((len(points), 2), dtype=bool)
    return ImputationResult(list(points), CopulaSpec("Independence"), flags, 0, 0, 0)


def independent_noise(n, seed):
    """log TTN and sqrt TTI as independent Gaussian white noise (tti <= ttn)."""
    rng = np.random.default_rng(seed)
    ttn = np.exp(rng.normal(6.0, 0.3, n))
    tti = rng.normal(5.0, 1.0, n) ** 2
    return [MetricPoint(i, float(a), float(b)) for i, (a, b) in enumerate(zip(ttn, tti))]


@pytest.fixture(scope="module")
def data():
    d = generate_synthetic(SyntheticConfig(length=260, tti_missing_rate=0.15,
                                           both_missing_rate=0.1, integer_days=False), 2)
    ins = impute(d.points[:200], 500, 2, tau_draws=2000)
    return d, ins


@pytest.fixture(scope="module")
def steps(data):
    d, ins = data
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return roll(ins, d.points[200:], window=150, n_sim=400, seed=9, candidates=FAMS)


def test_sample_counts_and_nonnegativity(data, steps):
    d, _ = data
    assert len(steps) == 60
    for k, s in enumerate(steps):
        assert s.step_index == 200 + k
        assert s.ttn_samples.shape == s.tti_samples.shape == (400,)
        assert np.all(np.isfinite(s.ttn_samples)) and np.all(s.ttn_samples > 0)
        assert np.all(s.tti_samples >= 0)


def test_filled_flags_match_mask(data, steps):
    d, _ = data
    for s, p in zip(steps, d.points[200:]):
        assert s.filled == (p.ttn is None, p.tti is None)
        assert (s.ttn_obs is None) == (p.ttn is None)
        assert (s.tti_obs is None) == (p.tti is None)
    assert any(all(s.filled) for s in steps)


def test_both_missing_point_carries_predictive_means(data):
    d, ins = data
    out = list(d.points[200:205])
    out[2] = MetricPoint(out[2].index, None, None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = roll(ins, out, window=150, n_sim=400, seed=9, candidates=FAMS)
        filled = list(out)
        filled[2] = MetricPoint(out[2].index, a[2].ttn_mean, min(a[2].tti_mean, a[2].ttn_mean))
        b = roll(ins, filled, window=150, n_sim=400, seed=9, candidates=FAMS)
    assert a[2].filled == (True, True)
    # the working series carried exactly the two predictive means
    for x, y in zip(a[3:], b[3:]):
        np.testing.assert_array_equal(x.ttn_samples, y.ttn_samples)
        np.testing.assert_array_equal(x.tti_samples, y.tti_samples)


def test_deterministic_across_runs_and_workers(data, steps):
    d, ins = data
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        again = roll(ins, d.points[200:220], window=150, n_sim=400, seed=9, candidates=FAMS,
                     workers=4)
    for x, y in zip(steps, again):
        np.testing.assert_array_equal(x.ttn_samples, y.ttn_samples)
        np.testing.assert_array_equal(x.tti_samples, y.tti_samples)
        assert x.copula == y.copula


def test_no_lookahead(data, steps):
    d, ins = data
    out = list(d.points[200:230])
    for j in range(15, 30):
        out[j] = MetricPoint(out[j].index, 1e6, 5e5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        corrupt = roll(ins, out, window=150, n_sim=400, seed=9, candidates=FAMS)
    for x, y in zip(steps[:16], corrupt[:16]):
        np.testing.assert_array_equal(x.ttn_samples, y.ttn_samples)
    assert not np.array_equal(steps[16].ttn_samples, corrupt[16].ttn_samples)


def test_independent_series_select_weak_dependence():
    pts = independent_noise(400, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        steps = roll(as_result(pts[:300]), pts[300:], window=300, n_sim=2000, seed=1)
    weak = [s.copula.family is Family.INDEPENDENCE or abs(s.copula.tau) < 0.1 for s in steps]
    assert np.mean(weak) >= 0.9


@pytest.mark.slow
def test_central_interval_coverage():
    d = generate_synthetic(SyntheticConfig(length=1100, tti_missing_rate=0, both_missing_rate=0,
                                           integer_days=False), 11)
    ins = impute(d.points[:500], 500, 11, tau_draws=2000)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        steps = roll(ins, d.points[500:], window=500, n_sim=2000, seed=11)
    inside = [np.quantile(s.ttn_samples, 0.05) <= s.ttn_obs <= np.quantile(s.ttn_samples, 0.95)
              for s in steps]
    assert len(inside) >= 500
    assert 0.86 <= np.mean(inside) <= 0.94


def test_input_validation(data):
    d, ins = data
    with pytest.raises(ValidationError):
        roll(ins, [], window=150)
    with pytest.raises(ValidationError):
        roll(ins, d.points[200:], window=201)
    with pytest.raises(ValidationError):
        roll(ins, d.points[200:], window=20)


def test_step_rows(steps):
    row = step_row(steps[0])
    assert list(row) == list(STEP_COLUMNS)
    assert quantile_column("ttn", 0.95) == "ttn_q95"
    s = steps[0]
    assert row["ttn_mean"] == pytest.approx(s.ttn_samples.mean())
    assert row["ttn_q50"] <= row["ttn_q90"] <= row["ttn_q95"] <= row["ttn_q99"]
    assert row["copula"] == s.copula.family.value
    if s.ttn_obs is not None:
        assert row["ttn_crps"] >= 0
    assert math.isfinite(row["tti_sd"])
