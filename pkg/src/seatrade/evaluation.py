"""Prediction metrics, placebo shuffling, and report artifacts.

Conventions: the coefficient of determination uses the population sum of
squares over the evaluated set (no degrees-of-freedom correction); MAPE is
computed on the log-scale targets with zero-valued actuals excluded from the
MAPE average only. When the actuals have zero variance, r2 and the Pearson
correlation are reported as undefined (None) rather than raising.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError


@dataclass
class EvalReport:
    """Metric bundle for one (spec, target) evaluation run."""

    spec_label: str
    target_label: str
    r2: float | None
    pearson_corr: float | None
    mae: float
    rmse: float
    mape_pct: float | None
    n_test: int
    importance: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


def metrics(actual, predicted) -> dict:
    """Core regression metrics between two equal-length vectors.

    Returns a dict with r2, pearson_corr, mae, rmse, mape_pct, n_test.
    r2 = 1 - sum((a-p)^2) / sum((a-mean(a))^2).
    """
    a = np.asarray(actual, dtype=np.float64).reshape(-1)
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if a.shape != p.shape:
        raise DataError(f"length mismatch: {a.shape[0]} vs {p.shape[0]}")
    if a.size == 0:
        raise DataError("empty evaluation vectors")
    err = a - p
    mae = float(np.mean(np.abs(err)))
    rmse = float(math.sqrt(np.mean(err**2)))

    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = None
        corr = None
    else:
        r2 = float(1.0 - np.sum(err**2) / ss_tot)
        sp = float(np.std(p))
        if sp == 0.0:
            corr = None
        else:
            corr = float(np.corrcoef(a, p)[0, 1])

    nonzero = a != 0
    if nonzero.any():
        # near-zero (but nonzero) actuals can push the ratio to inf; that is
        # the honest answer for a percentage error, so only the warning is
        # suppressed
        with np.errstate(over="ignore", divide="ignore"):
            mape = float(np.mean(np.abs(err[nonzero] / a[nonzero])) * 100.0)
    else:
        mape = None
    return {
        "r2": r2,
        "pearson_corr": corr,
        "mae": mae,
        "rmse": rmse,
        "mape_pct": mape,
        "n_test": int(a.size),
    }


def build_report(
    spec_label: str,
    target_label: str,
    actual,
    predicted,
    importance: dict[str, float] | None = None,
) -> EvalReport:
    stats = metrics(actual, predicted)
    return EvalReport(
        spec_label=spec_label,
        target_label=target_label,
        importance=dict(importance or {}),
        **stats,
    )


def placebo_shuffle(
    panel: pd.DataFrame, satellite_columns, seed: int
) -> pd.DataFrame:
    """Apply one shared random row permutation to the satellite block only.

    Targets and all other columns keep their original row alignment, so any
    predictive power surviving the shuffle cannot come from the satellite
    signal. Seeded and reproducible.
    """
    cols = list(satellite_columns)
    missing = [c for c in cols if c not in panel.columns]
    if missing:
        raise SchemaError(f"unknown satellite columns {missing}")
    out = panel.copy()
    perm = np.random.default_rng(seed).permutation(len(out))
    out[cols] = out[cols].to_numpy()[perm]
    return out


def aggregate_timeseries(
    year_months, actual_log, predicted_log
) -> pd.DataFrame:
    """Back-transform log predictions to levels and aggregate by month.

    Levels are recovered with expm1 (the inverse of the log(1+x) target
    transform), summed across ports within each month, and the monthly
    percentage error is (actual - predicted) / actual * 100.
    """
    frame = pd.DataFrame(
        {
            "year_month": np.asarray(year_months, dtype=object),
            "actual": np.expm1(np.asarray(actual_log, dtype=np.float64)),
            "predicted": np.expm1(np.asarray(predicted_log, dtype=np.float64)),
        }
    )
    grouped = (
        frame.groupby("year_month", sort=True)[["actual", "predicted"]]
        .sum()
        .reset_index()
        .rename(columns={"actual": "actual_sum", "predicted": "predicted_sum"})
    )
    grouped["pct_error"] = (
        (grouped["actual_sum"] - grouped["predicted_sum"])
        / grouped["actual_sum"]
        * 100.0
    )
    return grouped
