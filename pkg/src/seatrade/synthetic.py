"""Deterministic synthetic fixture: rasters, port attributes, and trade tables.

Builds a miniature end-to-end dataset (default 3 ports x 24 months) whose
monthly activity level drives both the satellite imagery and the trade
targets, so the full extract -> panel -> train -> eval -> extrap pipeline
runs meaningfully at desk scale. Everything derives from one seed.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np
import pandas as pd

from .months import add_months, parse_ym
from .panel import WPI_FLAG_ATTRS, WPI_NUMERIC_ATTRS
from .raster import grid_from_array
from .rgrid import grid_path, write_rgrid

DEFAULT_PORTS = (
    ("ALPHA", "Medium", "Mainland"),
    ("BRAVO", "Medium", "Mainland"),
    ("HILO", "Medium", "Hawaii"),
)
ACQUISITION_DAYS = (3, 13, 23)


def _activity(rng, port_index: int, month_index: int) -> float:
    base = 0.8 + 0.45 * port_index
    seasonal = 0.35 * np.sin(2.0 * np.pi * month_index / 12.0)
    return base + seasonal + rng.normal(0.0, 0.05)


def _write_month_rasters(rng, root, port_id, ym, activity, shape):
    year, month = parse_ym(ym)
    height, width = shape
    background = rng.lognormal(mean=-0.5, sigma=0.15, size=shape)
    for day in ACQUISITION_DAYS:
        stamp = dt.date(year, month, day)
        # VV: transient bright "vessel" pixels; day-to-day churn scales with
        # activity, which is what the differencing feature measures.
        ships = (rng.random(shape) < 0.12).astype(float)
        vv = background * (1.0 + 4.0 * activity * ships * rng.random(shape))
        # VH: persistent metallic backscatter near the activity level.
        vh = activity * rng.lognormal(mean=0.0, sigma=0.08, size=shape)
        # NTL: radiance spread around the activity level; brighter cores lit.
        ntl = activity * rng.uniform(0.0, 2.0, size=shape)
        for band, values in (("vv", vv), ("vh", vh), ("ntl", ntl)):
            mask = rng.random(shape) < 0.04
            values = values.copy()
            values[mask] = np.nan
            write_rgrid(
                grid_from_array(values, timestamp=stamp),
                grid_path(root, port_id, band, stamp),
            )


def _wpi_frame(rng, ports) -> pd.DataFrame:
    rows = []
    for port_id, size, region in ports:
        row: dict = {"port_id": port_id, "harbor_size": size, "region": region}
        for name in WPI_NUMERIC_ATTRS:
            row[name] = float(np.round(rng.uniform(3.0, 25.0), 1))
        for name in WPI_FLAG_ATTRS:
            row[name] = rng.choice(["yes", "no", "unknown"], p=[0.45, 0.45, 0.10])
        rows.append(row)
    return pd.DataFrame(rows)


def make_fixture(
    root: str | Path,
    ports=DEFAULT_PORTS,
    n_months: int = 24,
    start: str = "2016-01",
    shape: tuple[int, int] = (8, 8),
    seed: int = 7,
) -> dict[str, Path]:
    """Write rasters plus wpi.csv and trade.csv under `root`.

    Returns the paths of the generated inputs:
    ``{"raster_root": ..., "wpi": ..., "trade": ...}``.
    """
    root = Path(root)
    raster_root = root / "rasters"
    raster_root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    months = [add_months(start, k) for k in range(n_months)]
    trade_rows = []
    for p_idx, (port_id, _size, _region) in enumerate(ports):
        for m_idx, ym in enumerate(months):
            activity = _activity(rng, p_idx, m_idx)
            _write_month_rasters(rng, raster_root, port_id, ym, activity, shape)
            value_log = 14.0 + 2.0 * activity + rng.normal(0.0, 0.05)
            weight_log = 15.0 + 1.5 * activity + rng.normal(0.0, 0.05)
            trade_rows.append(
                {
                    "port_id": port_id,
                    "year_month": ym,
                    "trade_value": float(np.expm1(value_log)),
                    "trade_weight": float(np.expm1(weight_log)),
                }
            )

    wpi_path = root / "wpi.csv"
    trade_path = root / "trade.csv"
    _wpi_frame(rng, ports).to_csv(wpi_path, index=False)
    pd.DataFrame(trade_rows).to_csv(trade_path, index=False)
    return {"raster_root": raster_root, "wpi": wpi_path, "trade": trade_path}
