"""Anchoring algebra and pre/post change estimation."""

import numpy as np
import pandas as pd
import pytest

from seatrade.errors import DataError
from seatrade.extrap import (
    anchor,
    anchor_panel,
    anchored_frame,
    changes_frame,
    pct_change,
    pct_change_anchored,
    pct_change_window,
)
from seatrade.months import month_range


def test_anchor_no_offset_when_first_month_matches():
    s = anchor(["2022-01", "2022-02"], [5.0, 6.0], 5.0)
    assert s.offset == 0.0
    assert s.anchored_pred.tolist() == [5.0, 6.0]


def test_anchor_constant_offset_arithmetic():
    s = anchor(["2022-01", "2022-02", "2022-03"], [10.0, 11.0, 12.0], 7.0)
    assert s.offset == 3.0
    assert s.anchored_pred.tolist() == [7.0, 8.0, 9.0]


def test_anchor_first_month_residual_exactly_zero():
    # awkward magnitudes on purpose: the first anchored value is assigned,
    # not recomputed, so the residual is exactly zero regardless
    s = anchor(["2022-01", "2022-02"], [0.1, 0.5], 0.3)
    assert s.anchored_pred[0] == 0.3
    assert s.anchored_pred[0] - 0.3 == 0.0


def test_anchor_offset_is_constant_along_series():
    rng = np.random.default_rng(0)
    raw = rng.uniform(5.0, 25.0, size=24)
    s = anchor(month_range("2020-01", "2021-12"), raw, 11.7)
    diffs = s.anchored_pred - s.raw_pred
    assert np.allclose(diffs, -s.offset, rtol=0, atol=1e-12)


def test_anchor_idempotent():
    s = anchor(["2022-01", "2022-02"], [10.0, 12.5], 9.25)
    again = anchor(s.months, s.anchored_pred, s.anchored_pred[0])
    assert again.offset == 0.0
    assert np.array_equal(again.anchored_pred, s.anchored_pred)


def test_anchor_requires_finite_observation():
    with pytest.raises(DataError, match="anchor unavailable"):
        anchor(["2022-01"], [1.0], float("nan"))


def test_anchor_empty_series():
    with pytest.raises(DataError, match="empty"):
        anchor([], [], 1.0)


def test_anchor_panel_uses_earliest_month_with_both():
    preds = pd.DataFrame(
        {
            "port_id": ["H", "H", "H"],
            "year_month": ["2022-01", "2022-02", "2022-03"],
            "predicted": [10.0, 11.0, 12.0],
            "actual": [np.nan, 9.0, 9.5],
        }
    )
    series = anchor_panel(preds)
    assert len(series) == 1
    s = series[0]
    assert s.months == ("2022-02", "2022-03")
    assert s.offset == 2.0
    assert s.anchored_pred.tolist() == [9.0, 10.0]


def test_anchor_panel_errors_without_observations():
    preds = pd.DataFrame(
        {
            "port_id": ["H"],
            "year_month": ["2022-01"],
            "predicted": [10.0],
            "actual": [np.nan],
        }
    )
    with pytest.raises(DataError, match="anchor unavailable"):
        anchor_panel(preds)


# -------------------------------------------------------------- pct_change


def test_pct_change_constant_series_is_zero():
    months = month_range("2021-01", "2021-12")
    est = pct_change(months, [19.0] * 12, cutoff="2021-06")
    assert est.delta_log == 0.0
    assert est.pct == 0.0


def test_pct_change_hand_example():
    months = month_range("2021-01", "2021-05")
    values = [19.0, 19.0, 0.0, 19.2, 19.2]  # cutoff month value must be ignored
    est = pct_change(months, values, cutoff="2021-03")
    assert est.delta_log == pytest.approx(0.2, abs=1e-12)
    assert est.pct == pytest.approx(20.0, abs=1e-10)
    assert est.n_pre == 2 and est.n_post == 2


def test_pct_change_window_lengths():
    months = month_range("2020-01", "2020-12")
    values = list(range(12))
    est = pct_change(months, values, cutoff="2020-06", pre_len=2, post_len=2)
    # pre window 2020-04..05 -> mean 3.5; post 2020-07..08 -> mean 6.5
    assert est.delta_log == pytest.approx(3.0)
    assert est.n_pre == 2 and est.n_post == 2


def test_pct_change_empty_window_errors():
    months = ["2021-01", "2021-02"]
    with pytest.raises(DataError, match="empty window"):
        pct_change(months, [1.0, 2.0], cutoff="2021-01")  # nothing before cutoff


def test_pct_change_window_overlap_rejected():
    months = month_range("2021-01", "2021-06")
    with pytest.raises(DataError, match="overlap"):
        pct_change_window(
            months, list(range(6)), "2021-03",
            pre_window=(None, "2021-04"), post_window=("2021-03", None),
        )


def test_pct_change_anchoring_invariance_bit_exact():
    months = month_range("2021-01", "2021-10")
    rng = np.random.default_rng(1)
    raw = rng.uniform(10.0, 20.0, size=10)
    s = anchor(months, raw, 12.345)
    raw_est = pct_change(months, raw, cutoff="2021-05")
    anchored_est = pct_change_anchored(s, cutoff="2021-05")
    assert anchored_est.delta_log == raw_est.delta_log
    assert anchored_est.pct == raw_est.pct


@pytest.mark.parametrize("shift", [-5.0, 0.0, 13.7])
def test_pct_change_invariant_to_constant_shift(shift):
    months = month_range("2021-01", "2021-12")
    rng = np.random.default_rng(2)
    values = rng.uniform(5.0, 25.0, size=12)
    base = pct_change(months, values, cutoff="2021-07")
    shifted = pct_change(months, values + shift, cutoff="2021-07")
    assert shifted.delta_log == pytest.approx(base.delta_log, abs=1e-12)


def test_pct_change_equivariant_to_post_only_shift():
    months = month_range("2021-01", "2021-12")
    rng = np.random.default_rng(3)
    values = rng.uniform(5.0, 25.0, size=12)
    base = pct_change(months, values, cutoff="2021-07")
    bumped = values.copy()
    post = [i for i, m in enumerate(months) if m > "2021-07"]
    bumped[post] += 2.5
    est = pct_change(months, bumped, cutoff="2021-07")
    assert est.delta_log == pytest.approx(base.delta_log + 2.5, abs=1e-12)


def test_pct_ratio_convention():
    months = ["2021-01", "2021-02", "2021-03"]
    est = pct_change(months, [1.0, 0.0, 1.0 + np.log(2.0)], cutoff="2021-02")
    assert est.pct == pytest.approx(100.0 * np.log(2.0))
    assert est.pct_ratio == pytest.approx(100.0)  # exp(log 2) - 1 = 1


# -------------------------------------------------------------- framing


def test_changes_frame_schema():
    months = month_range("2021-01", "2021-04")
    ests = [
        pct_change(months, [1.0, 2.0, 3.0, 4.0], cutoff="2021-02", port_id=p)
        for p in ("B", "A")
    ]
    frame = changes_frame(ests)
    assert list(frame.columns) == ["port_id", "delta_log", "pct", "n_pre", "n_post"]
    assert frame["port_id"].tolist() == ["A", "B"]  # sorted


def test_anchored_frame_schema():
    s = anchor(["2022-01", "2022-02"], [10.0, 11.0], 9.0, port_id="H")
    frame = anchored_frame([s])
    assert list(frame.columns) == [
        "port_id", "year_month", "raw_pred", "anchored_pred", "offset",
    ]
    assert frame["anchored_pred"].tolist() == [9.0, 10.0]
