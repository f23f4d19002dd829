"""Spatial-extrapolation corrections: level anchoring and pre/post change.

Models extrapolated outside the training region track within-port movement
well but miss the port-specific level. Two remedies:

* ``anchor``: subtract the first observable month's (prediction - observation)
  offset from the whole predicted series, pinning its level to one ground
  truth point.
* ``pct_change``: compare mean predictions across windows before and after a
  cutoff month. Any constant level error cancels algebraically in the
  difference, so this needs no ground truth at all. Since predictions are in
  log units, the delta is approximately a growth rate; both the log-point
  and level-ratio percent conventions are reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
import pandas as pd

from .errors import DataError
from .months import add_months, month_index

__all__ = [
    "AnchoredSeries",
    "ChangeEstimate",
    "anchor",
    "anchor_panel",
    "pct_change",
    "pct_change_window",
    "changes_frame",
]


@dataclass(frozen=True)
class AnchoredSeries:
    """A per-port predicted series with its level pinned to the first observation.

    ``offset = raw_pred[first] - observed_first`` and
    ``anchored_pred = raw_pred - offset``. The first anchored value is set to
    the observation itself, so the first-month residual is exactly zero and
    ``anchored_pred - raw_pred`` equals ``-offset`` everywhere.
    """

    port_id: str
    months: tuple[str, ...]
    raw_pred: np.ndarray
    observed_first: float
    offset: float
    anchored_pred: np.ndarray


def anchor(months, raw_pred, observed_first: float, port_id: str = "") -> AnchoredSeries:
    """Anchor a predicted series on its first month's observation."""
    months = tuple(str(m) for m in months)
    raw = np.array(raw_pred, dtype=np.float64)  # private copy
    if raw.size == 0:
        raise DataError("cannot anchor an empty series")
    if raw.size != len(months):
        raise DataError("months and predictions differ in length")
    if not math.isfinite(observed_first):
        raise DataError("anchor unavailable: first-month observation is not finite")
    offset = float(raw[0] - observed_first)
    anchored = raw - offset
    anchored[0] = observed_first  # exact by construction, not by arithmetic
    return AnchoredSeries(
        port_id=port_id,
        months=months,
        raw_pred=raw,
        observed_first=float(observed_first),
        offset=offset,
        anchored_pred=anchored,
    )


def anchor_panel(
    pred: pd.DataFrame,
    value_col: str = "predicted",
    observed_col: str = "actual",
) -> list[AnchoredSeries]:
    """Anchor every port in a (port_id, year_month, predicted, actual) frame.

    The anchor month is each port's earliest month having both a prediction
    and an observation; earlier prediction-only months are dropped for that
    port. Ports with no such month raise.
    """
    for col in ("port_id", "year_month", value_col):
        if col not in pred.columns:
            raise DataError(f"missing column {col!r}")
    out = []
    for port_id, group in pred.groupby("port_id", sort=True):
        group = group.sort_values("year_month")
        usable = group[value_col].notna() & group[observed_col].notna()
        if not usable.any():
            raise DataError(f"anchor unavailable for port {port_id!r}")
        first_pos = int(np.argmax(usable.to_numpy()))
        group = group.iloc[first_pos:]
        series = group.loc[group[value_col].notna()]
        out.append(
            anchor(
                series["year_month"].tolist(),
                series[value_col].to_numpy(dtype=np.float64),
                float(series[observed_col].iloc[0]),
                port_id=str(port_id),
            )
        )
    return out


@dataclass(frozen=True)
class ChangeEstimate:
    """Pre/post change in mean predicted log levels around a cutoff month.

    ``delta_log`` is mean(post) - mean(pre); ``pct`` is the log-point
    convention (100 * delta_log) and ``pct_ratio`` the level-ratio convention
    (100 * (exp(delta_log) - 1)).
    """

    port_id: str
    cutoff: str
    n_pre: int
    n_post: int
    delta_log: float
    pct: float
    pct_ratio: float


def _window_mean(months, values, lo: str | None, hi: str | None) -> tuple[float, int]:
    sel = np.ones(len(months), dtype=bool)
    if lo is not None:
        lo_idx = month_index(lo)
        sel &= np.array([month_index(m) >= lo_idx for m in months])
    if hi is not None:
        hi_idx = month_index(hi)
        sel &= np.array([month_index(m) <= hi_idx for m in months])
    if not sel.any():
        raise DataError("empty window")
    vals = np.asarray(values, dtype=np.float64)[sel]
    return float(np.mean(vals)), int(sel.sum())


def pct_change_window(
    months,
    values,
    cutoff: str,
    pre_window: tuple[str | None, str | None],
    post_window: tuple[str | None, str | None],
    port_id: str = "",
) -> ChangeEstimate:
    """Change estimate with explicit inclusive month windows."""
    months = [str(m) for m in months]
    pre_lo, pre_hi = pre_window
    post_lo, post_hi = post_window
    if pre_hi is not None and post_lo is not None:
        if month_index(pre_hi) >= month_index(post_lo):
            raise DataError("pre and post windows overlap")
    pre_mean, n_pre = _window_mean(months, values, pre_lo, pre_hi)
    post_mean, n_post = _window_mean(months, values, post_lo, post_hi)
    delta = post_mean - pre_mean
    return ChangeEstimate(
        port_id=port_id,
        cutoff=cutoff,
        n_pre=n_pre,
        n_post=n_post,
        delta_log=float(delta),
        pct=float(delta * 100.0),
        pct_ratio=float(np.expm1(delta) * 100.0),
    )


def pct_change(
    months,
    values,
    cutoff: str,
    pre_len: int | None = None,
    post_len: int | None = None,
    port_id: str = "",
) -> ChangeEstimate:
    """Change in mean predicted level across the cutoff month.

    The cutoff month itself is excluded. ``pre_len``/``post_len`` bound the
    windows in calendar months on each side; None means all available months
    on that side. Works identically on an AnchoredSeries' raw or anchored
    values because the anchoring offset cancels in the difference.
    """
    pre_hi = add_months(cutoff, -1)
    post_lo = add_months(cutoff, 1)
    pre_lo = add_months(cutoff, -int(pre_len)) if pre_len is not None else None
    post_hi = add_months(cutoff, int(post_len)) if post_len is not None else None
    return pct_change_window(
        months, values, cutoff, (pre_lo, pre_hi), (post_lo, post_hi), port_id=port_id
    )


def pct_change_anchored(
    series: AnchoredSeries,
    cutoff: str,
    pre_len: int | None = None,
    post_len: int | None = None,
) -> ChangeEstimate:
    """Change estimate for an anchored series.

    Computed from the raw predictions: the anchoring offset is a constant, so
    it cancels exactly in mean(post) - mean(pre); using the raw series keeps
    the result bit-identical to ``pct_change`` on the unanchored predictions.
    """
    return pct_change(
        series.months,
        series.raw_pred,
        cutoff,
        pre_len=pre_len,
        post_len=post_len,
        port_id=series.port_id,
    )


def changes_frame(estimates: list[ChangeEstimate]) -> pd.DataFrame:
    """Tabulate change estimates in the changes.csv column layout."""
    rows = [
        {
            "port_id": e.port_id,
            "delta_log": e.delta_log,
            "pct": e.pct,
            "n_pre": e.n_pre,
            "n_post": e.n_post,
        }
        for e in sorted(estimates, key=lambda e: e.port_id)
    ]
    return pd.DataFrame(rows, columns=["port_id", "delta_log", "pct", "n_pre", "n_post"])


def anchored_frame(series_list: list[AnchoredSeries]) -> pd.DataFrame:
    """Tabulate anchored series for anchored.csv."""
    rows = []
    for s in sorted(series_list, key=lambda s: s.port_id):
        for month, raw, anchored in zip(s.months, s.raw_pred, s.anchored_pred):
            rows.append(
                {
                    "port_id": s.port_id,
                    "year_month": month,
                    "raw_pred": float(raw),
                    "anchored_pred": float(anchored),
                    "offset": s.offset,
                }
            )
    return pd.DataFrame(
        rows, columns=["port_id", "year_month", "raw_pred", "anchored_pred", "offset"]
    )
