"""Metrics, placebo shuffling, and aggregate series."""

import json
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import mean_absolute_error, mean_squared_error, r2_score

from seatrade.errors import DataError, SchemaError
from seatrade.evaluation import (
    EvalReport,
    aggregate_timeseries,
    build_report,
    metrics,
    placebo_shuffle,
)

finite_floats = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_metrics_perfect_prediction():
    out = metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert out["r2"] == 1.0
    assert out["pearson_corr"] == pytest.approx(1.0)
    assert out["mae"] == out["rmse"] == out["mape_pct"] == 0.0
    assert out["n_test"] == 3


def test_metrics_mean_prediction_r2_zero():
    a = np.array([1.0, 2.0, 3.0, 6.0])
    out = metrics(a, np.full(4, a.mean()))
    assert out["r2"] == 0.0


def test_metrics_hand_example():
    out = metrics([1.0, 2.0, 3.0], [2.0, 2.0, 2.0])
    assert out["mae"] == pytest.approx(2.0 / 3.0)
    assert out["rmse"] == pytest.approx(math.sqrt(2.0 / 3.0))
    assert out["r2"] == pytest.approx(0.0)
    assert out["mape_pct"] == pytest.approx(100.0 / 3.0 * (1.0 + 0.0 + 1.0 / 3.0))


def test_metrics_constant_offset_exact():
    # integer actuals plus a half: differences are exact in floats
    a = np.array([1.0, 2.0, 3.0])
    out = metrics(a, a + 0.5)
    assert out["mae"] == 0.5
    assert out["rmse"] == 0.5


def test_metrics_zero_variance_actuals_undefined():
    out = metrics([2.0, 2.0], [1.0, 3.0])
    assert out["r2"] is None
    assert out["pearson_corr"] is None
    assert out["mae"] == 1.0


def test_metrics_mape_excludes_zero_actuals():
    out = metrics([0.0, 2.0], [1.0, 1.0])
    assert out["mape_pct"] == pytest.approx(50.0)


def test_metrics_length_mismatch():
    with pytest.raises(DataError, match="length mismatch"):
        metrics([1.0], [1.0, 2.0])


def test_metrics_against_sklearn_oracle():
    rng = np.random.default_rng(0)
    a = rng.normal(size=200)
    p = a + rng.normal(scale=0.3, size=200)
    out = metrics(a, p)
    assert out["r2"] == pytest.approx(r2_score(a, p), abs=1e-12)
    assert out["mae"] == pytest.approx(mean_absolute_error(a, p), abs=1e-12)
    assert out["rmse"] == pytest.approx(math.sqrt(mean_squared_error(a, p)), abs=1e-12)
    assert out["pearson_corr"] == pytest.approx(np.corrcoef(a, p)[0, 1], abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(finite_floats, min_size=3, max_size=20), finite_floats)
def test_metrics_shift_invariance_and_mae_rmse_order(values, shift):
    rng = np.random.default_rng(1)
    a = np.asarray(values)
    p = a + rng.normal(size=a.size)
    base = metrics(a, p)
    shifted = metrics(a + shift, p + shift)
    assert base["rmse"] >= base["mae"] - 1e-12
    if base["r2"] is not None and shifted["r2"] is not None:
        assert shifted["r2"] == pytest.approx(base["r2"], rel=1e-6, abs=1e-6)
    if base["pearson_corr"] is not None and shifted["pearson_corr"] is not None:
        assert shifted["pearson_corr"] == pytest.approx(
            base["pearson_corr"], rel=1e-6, abs=1e-6
        )


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 100.0))
def test_pearson_invariant_to_positive_rescaling(scale):
    rng = np.random.default_rng(2)
    a = rng.normal(size=50)
    p = a + rng.normal(scale=0.5, size=50)
    base = metrics(a, p)["pearson_corr"]
    scaled = metrics(a, p * scale)["pearson_corr"]
    assert scaled == pytest.approx(base, rel=1e-9)


# --------------------------------------------------------------- placebo


def sample_panel(n=40, seed=3):
    rng = np.random.default_rng(seed)
    return pd.DataFrame(
        {
            "port_id": [f"P{i % 4}" for i in range(n)],
            "year_month": [f"2020-{1 + i % 12:02d}" for i in range(n)],
            "sar_diff_median": rng.normal(size=n),
            "ntl_mean": rng.normal(size=n),
            "y_value_log": rng.normal(size=n),
        }
    )


def test_placebo_single_row_unchanged():
    panel = sample_panel(n=1)
    out = placebo_shuffle(panel, ["sar_diff_median"], seed=0)
    pd.testing.assert_frame_equal(out, panel)


def test_placebo_preserves_column_multisets_and_targets():
    panel = sample_panel()
    out = placebo_shuffle(panel, ["sar_diff_median", "ntl_mean"], seed=5)
    assert sorted(out["sar_diff_median"]) == pytest.approx(
        sorted(panel["sar_diff_median"])
    )
    assert out["y_value_log"].tolist() == panel["y_value_log"].tolist()
    assert out["port_id"].tolist() == panel["port_id"].tolist()
    assert out["sar_diff_median"].tolist() != panel["sar_diff_median"].tolist()


def test_placebo_one_shared_permutation_across_columns():
    panel = sample_panel()
    out = placebo_shuffle(panel, ["sar_diff_median", "ntl_mean"], seed=5)
    perm = np.random.default_rng(5).permutation(len(panel))
    assert out["sar_diff_median"].tolist() == panel["sar_diff_median"].to_numpy()[perm].tolist()
    assert out["ntl_mean"].tolist() == panel["ntl_mean"].to_numpy()[perm].tolist()


def test_placebo_unshuffle_is_identity():
    panel = sample_panel()
    out = placebo_shuffle(panel, ["sar_diff_median"], seed=9)
    perm = np.random.default_rng(9).permutation(len(panel))
    inverse = np.argsort(perm)
    restored = out.copy()
    restored["sar_diff_median"] = out["sar_diff_median"].to_numpy()[inverse]
    pd.testing.assert_frame_equal(restored, panel)


def test_placebo_unknown_column():
    with pytest.raises(SchemaError, match="unknown satellite columns"):
        placebo_shuffle(sample_panel(), ["not_a_column"], seed=0)


def test_placebo_deterministic_in_seed():
    panel = sample_panel()
    a = placebo_shuffle(panel, ["sar_diff_median"], seed=7)
    b = placebo_shuffle(panel, ["sar_diff_median"], seed=7)
    pd.testing.assert_frame_equal(a, b)


# ------------------------------------------------------------- aggregates


def test_aggregate_timeseries_sums_levels():
    months = ["2020-01", "2020-01", "2020-02"]
    actual_log = np.log1p([10.0, 20.0, 5.0])
    pred_log = np.log1p([8.0, 22.0, 10.0])
    out = aggregate_timeseries(months, actual_log, pred_log)
    assert out["year_month"].tolist() == ["2020-01", "2020-02"]
    assert out["actual_sum"].tolist() == pytest.approx([30.0, 5.0])
    assert out["predicted_sum"].tolist() == pytest.approx([30.0, 10.0])
    assert out["pct_error"].tolist() == pytest.approx([0.0, -100.0])


def test_report_json_shape(tmp_path):
    report = build_report("sat", "value", [1.0, 2.0], [1.1, 1.9], {"sar_diff_median": 100.0})
    path = tmp_path / "report.json"
    report.save(path)
    payload = json.loads(path.read_text())
    assert set(payload) == {
        "spec_label", "target_label", "r2", "pearson_corr", "mae", "rmse",
        "mape_pct", "n_test", "importance",
    }
    assert payload["n_test"] == 2
    assert isinstance(report, EvalReport)
