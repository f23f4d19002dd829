"""Port-month panel assembly: satellite features + port attributes + trade targets.

The panel is a pandas DataFrame with a fixed column layout:

    keys/meta : port_id, year_month, region, harbor_size
    targets   : y_value_log, y_weight_log
    satellite : sar_diff_median, vh_median_mean, ntl_mean, ntl_std, lit_area_ratio
    port      : the remaining World-Port-Index attribute columns

``region`` is carried only so rows can be filtered (leave-region-out,
coverage); it is never a model feature. ``harbor_size`` doubles as the
ordinal size attribute in port-bearing feature sets and as filter metadata
otherwise. Targets are natural log(1 + trade) so zero-trade months stay
finite.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError
from .raster import SatFeatures

log = logging.getLogger(__name__)

HARBOR_SIZES = ("Very Small", "Small", "Medium", "Large")
_HARBOR_ORDINAL = {name: float(i) for i, name in enumerate(HARBOR_SIZES)}

# Port attributes measured in meters; passed through as numeric features.
WPI_NUMERIC_ATTRS = (
    "tidal_range_m",
    "entrance_width_m",
    "channel_depth_m",
    "anchorage_depth_m",
    "cargo_pier_depth_m",
    "oil_terminal_depth_m",
    "lng_terminal_depth_m",
    "max_vessel_length_m",
    "max_vessel_beam_m",
    "max_vessel_draft_m",
    "offshore_max_length_m",
    "offshore_max_beam_m",
    "offshore_max_draft_m",
)

# Ternary yes/no/unknown port attributes.
WPI_FLAG_ATTRS = (
    "harbor_type",
    "harbor_use",
    "shelter_afforded",
    "ent_restr_tide",
    "ent_restr_swell",
    "ent_restr_ice",
    "ent_restr_other",
    "overhead_limits",
    "underkeel_clearance",
    "good_holding_ground",
    "turning_area",
    "traffic_sep_scheme",
    "vessel_traffic_service",
    "navarea",
    "search_and_rescue",
    "port_security",
    "eta_message",
    "quarantine_pratique",
    "quarantine_sanitation",
    "quarantine_other",
    "first_port_entry",
    "us_representative",
    "pilotage_compulsory",
    "pilotage_available",
    "pilotage_local_assist",
    "pilotage_advisable",
    "tugs_salvage",
    "tugs_assistance",
    "comm_telephone",
    "comm_telefax",
    "comm_radio",
    "comm_radio_tel",
    "comm_airport",
    "comm_rail",
    "wharves",
    "anchorage",
    "dang_cargo_anchorage",
    "med_mooring",
    "beach_mooring",
    "ice_mooring",
    "ro_ro",
    "solid_bulk",
    "liquid_bulk",
    "container",
    "breakbulk",
    "oil_terminal",
    "lng_terminal",
    "other_facilities",
    "medical_facilities",
    "garbage_disposal",
    "chemical_tank_disposal",
    "dirty_ballast_disposal",
    "degaussing",
    "cranes_fixed",
    "cranes_mobile",
    "cranes_floating",
    "cranes_container",
    "lifts_100_tons",
    "lifts_50_100_tons",
    "lifts_25_49_tons",
    "lifts_0_24_tons",
    "svc_longshoremen",
    "svc_electricity",
    "svc_steam",
    "svc_nav_equip",
    "svc_elec_repair",
    "svc_ice_breaking",
    "svc_diving",
    "sup_provisions",
    "sup_potable_water",
    "sup_fuel_oil",
    "sup_diesel_oil",
    "sup_aviation_fuel",
    "sup_deck",
    "sup_engine",
    "repairs",
    "dry_dock",
)

# Full encoded attribute vector: ordinal size + numerics + flags.
WPI_FEATURE_NAMES = ("harbor_size",) + WPI_NUMERIC_ATTRS + WPI_FLAG_ATTRS
assert len(WPI_FEATURE_NAMES) == 91

# Satellite features used by the models. ntl_max is extracted and stored in
# the features CSV but is not part of the modeling block.
SAT_FEATURES = (
    "sar_diff_median",
    "vh_median_mean",
    "ntl_mean",
    "ntl_std",
    "lit_area_ratio",
)

FEATURES_CSV_COLUMNS = (
    "aoi_id",
    "year_month",
    "sar_diff_median",
    "vh_median_mean",
    "ntl_mean",
    "ntl_max",
    "ntl_std",
    "lit_area_ratio",
    "n_obs_vv",
    "n_obs_vh",
    "n_obs_ntl",
)

META_COLUMNS = ("port_id", "year_month", "region", "harbor_size")
TARGET_COLUMNS = ("y_value_log", "y_weight_log")

SPEC_ALIASES = {
    "sat": "sat",
    "satellite": "sat",
    "port": "port",
    "port_only": "port",
    "sat+port": "sat+port",
    "satellite+port": "sat+port",
}


def normalize_spec(spec: str) -> str:
    try:
        return SPEC_ALIASES[spec.strip().lower()]
    except KeyError:
        raise DataError(f"unknown feature spec {spec!r}; use sat, port, or sat+port")


@dataclass(frozen=True)
class WpiRecord:
    """One port's World-Port-Index row: identity, size class, and attributes."""

    port_id: str
    harbor_size: str
    region: str
    attributes: dict[str, float | str]

    def __post_init__(self):
        if self.harbor_size not in HARBOR_SIZES:
            raise SchemaError(
                f"harbor_size {self.harbor_size!r} not in {HARBOR_SIZES}"
            )


def _encode_flag(value, name: str) -> float:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return float("nan")
    text = str(value).strip().lower()
    if text in ("yes", "y"):
        return 1.0
    if text in ("no", "n"):
        return 0.0
    if text in ("unknown", "", "nan"):
        return float("nan")
    raise SchemaError(f"flag attribute {name!r} has non-ternary value {value!r}")


def _encode_numeric(value, name: str) -> float:
    if value is None or value == "":
        return float("nan")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"numeric attribute {name!r} has value {value!r}")


def encode_wpi(record: WpiRecord) -> dict[str, float]:
    """Encode one port's attributes into the 91-entry numeric feature vector.

    Numeric attributes pass through, ternary flags map yes->1 / no->0 /
    unknown->missing, and harbor size maps ordinally Very Small->0 .. Large->3.
    The port identifier and region name are never emitted.
    """
    for name in record.attributes:
        if name not in WPI_NUMERIC_ATTRS and name not in WPI_FLAG_ATTRS:
            raise SchemaError(f"unknown WPI attribute {name!r}")
    encoded: dict[str, float] = {"harbor_size": _HARBOR_ORDINAL[record.harbor_size]}
    for name in WPI_NUMERIC_ATTRS:
        encoded[name] = _encode_numeric(record.attributes.get(name), name)
    for name in WPI_FLAG_ATTRS:
        encoded[name] = _encode_flag(record.attributes.get(name), name)
    return encoded


def encode_wpi_frame(wpi: pd.DataFrame) -> pd.DataFrame:
    """Encode a raw WPI table into port_id, region, and the feature vector."""
    required = {"port_id", "harbor_size", "region"}
    missing = required - set(wpi.columns)
    if missing:
        raise SchemaError(f"wpi table missing columns {sorted(missing)}")
    if wpi["port_id"].duplicated().any():
        dupes = wpi.loc[wpi["port_id"].duplicated(), "port_id"].tolist()
        raise SchemaError(f"duplicate port_id in wpi table: {dupes}")
    rows = []
    for rec in wpi.to_dict("records"):
        attrs = {
            k: v for k, v in rec.items() if k not in ("port_id", "harbor_size", "region")
        }
        record = WpiRecord(
            port_id=str(rec["port_id"]),
            harbor_size=str(rec["harbor_size"]),
            region=str(rec["region"]),
            attributes=attrs,
        )
        row = {"port_id": record.port_id, "region": record.region}
        row.update(encode_wpi(record))
        rows.append(row)
    return pd.DataFrame(rows, columns=["port_id", "region", *WPI_FEATURE_NAMES])


def log1p(x: float) -> float:
    """Natural log of (1 + x) for nonnegative x."""
    if x < 0:
        raise DataError(f"log1p input must be nonnegative, got {x}")
    return float(np.log1p(x))


def features_to_frame(rows: list[SatFeatures]) -> pd.DataFrame:
    data = [
        {
            "aoi_id": r.aoi_id,
            "year_month": r.year_month,
            "sar_diff_median": r.sar_diff_median,
            "vh_median_mean": r.vh_median_mean,
            "ntl_mean": r.ntl_mean,
            "ntl_max": r.ntl_max,
            "ntl_std": r.ntl_std,
            "lit_area_ratio": r.lit_area_ratio,
            "n_obs_vv": r.n_obs_vv,
            "n_obs_vh": r.n_obs_vh,
            "n_obs_ntl": r.n_obs_ntl,
        }
        for r in rows
    ]
    frame = pd.DataFrame(data, columns=list(FEATURES_CSV_COLUMNS))
    return frame.sort_values(["aoi_id", "year_month"], kind="stable").reset_index(
        drop=True
    )


def write_features_csv(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False, columns=list(FEATURES_CSV_COLUMNS))


def read_features_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(
        path,
        dtype={"aoi_id": str, "year_month": str},
        float_precision="round_trip",
    )
    missing = set(FEATURES_CSV_COLUMNS) - set(frame.columns)
    if missing:
        raise SchemaError(f"features csv missing columns {sorted(missing)}")
    return frame


def load_trade_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"port_id": str, "year_month": str})
    return validate_trade(frame)


def validate_trade(trade: pd.DataFrame) -> pd.DataFrame:
    required = {"port_id", "year_month", "trade_value", "trade_weight"}
    missing = required - set(trade.columns)
    if missing:
        raise SchemaError(f"trade table missing columns {sorted(missing)}")
    if trade.duplicated(["port_id", "year_month"]).any():
        raise DataError("trade table has duplicate port-month records")
    for col in ("trade_value", "trade_weight"):
        try:
            vals = trade[col].to_numpy(dtype=float)
        except (TypeError, ValueError) as exc:
            raise DataError(f"non-numeric {col} in trade table: {exc}")
        if not np.all(np.isfinite(vals)):
            raise DataError(f"non-finite {col} in trade table")
        if np.any(vals < 0):
            raise DataError(f"negative {col} in trade table")
    return trade


def assemble_panel(
    features: pd.DataFrame,
    wpi: pd.DataFrame,
    trade: pd.DataFrame,
    spec: str = "sat+port",
) -> pd.DataFrame:
    """Inner-join trade targets with the requested feature blocks.

    In satellite-bearing specs, port-months without any satellite feature are
    dropped (counts are logged). Port-bearing specs require a WPI record for
    the port. The result has the deterministic column layout documented in
    the module docstring.
    """
    spec = normalize_spec(spec)
    trade = validate_trade(trade).copy()
    trade["port_id"] = trade["port_id"].astype(str)
    trade["year_month"] = trade["year_month"].astype(str)
    trade["y_value_log"] = trade["trade_value"].map(log1p)
    trade["y_weight_log"] = trade["trade_weight"].map(log1p)

    encoded_wpi = encode_wpi_frame(wpi)
    panel = trade[["port_id", "year_month", "y_value_log", "y_weight_log"]]

    if spec in ("sat", "sat+port"):
        feats = features.rename(columns={"aoi_id": "port_id"}).copy()
        feats["port_id"] = feats["port_id"].astype(str)
        feats["year_month"] = feats["year_month"].astype(str)
        feats = feats[["port_id", "year_month", *SAT_FEATURES]]
        before = len(panel)
        panel = panel.merge(feats, on=["port_id", "year_month"], how="inner")
        log.info("satellite join: %d of %d trade rows matched", len(panel), before)
        no_sat = panel[list(SAT_FEATURES)].isna().all(axis=1)
        if no_sat.any():
            log.info("dropping %d rows with no satellite observations", int(no_sat.sum()))
            panel = panel.loc[~no_sat]

    if spec in ("port", "sat+port"):
        before = len(panel)
        panel = panel.merge(encoded_wpi, on="port_id", how="inner")
        log.info("port join: %d of %d rows matched", len(panel), before)
    else:
        meta = encoded_wpi[["port_id", "region", "harbor_size"]]
        panel = panel.merge(meta, on="port_id", how="left")
        panel["region"] = panel["region"].fillna("")

    if panel.empty:
        raise DataError(f"panel is empty after {spec!r} join")

    columns = list(META_COLUMNS) + list(TARGET_COLUMNS)
    if spec in ("sat", "sat+port"):
        columns += list(SAT_FEATURES)
    if spec in ("port", "sat+port"):
        columns += [c for c in WPI_FEATURE_NAMES if c != "harbor_size"]
    panel = panel[columns]
    return panel.sort_values(["year_month", "port_id"], kind="stable").reset_index(
        drop=True
    )


def feature_columns(panel: pd.DataFrame, spec: str) -> list[str]:
    """Model feature columns for a spec; never port_id or region."""
    spec = normalize_spec(spec)
    cols: list[str] = []
    if spec in ("sat", "sat+port"):
        cols += [c for c in SAT_FEATURES if c in panel.columns]
    if spec in ("port", "sat+port"):
        cols += [c for c in WPI_FEATURE_NAMES if c in panel.columns]
    if not cols:
        raise DataError(f"panel has no feature columns for spec {spec!r}")
    return cols


def chrono_split(
    panel: pd.DataFrame, train_fraction: float = 0.70
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Chronological split on distinct year-months.

    The first ceil(train_fraction * n_months) calendar months form the train
    set, the remainder the test set; the train count is capped so the test
    set is never empty. The product of the fraction and the month count is
    rounded at the 9th decimal before the ceiling to absorb binary float fuzz
    (0.7 * 10 must mean exactly 7).
    """
    if panel.empty:
        raise DataError("cannot split an empty panel")
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    months = sorted(panel["year_month"].unique())
    if len(months) < 2:
        raise DataError("need at least 2 distinct months to split")
    n_train = math.ceil(round(train_fraction * len(months), 9))
    n_train = max(1, min(len(months) - 1, n_train))
    train_months = set(months[:n_train])
    in_train = panel["year_month"].isin(train_months)
    train = panel.loc[in_train].copy()
    test = panel.loc[~in_train].copy()
    return train, test


def filter_size(panel: pd.DataFrame, sizes) -> pd.DataFrame:
    """Keep rows whose port's harbor size is in `sizes` (labels or ordinals)."""
    if "harbor_size" not in panel.columns:
        raise SchemaError("panel has no harbor_size column")
    ordinals = set()
    for size in sizes:
        if isinstance(size, str):
            if size not in _HARBOR_ORDINAL:
                raise DataError(f"unknown harbor size {size!r}")
            ordinals.add(_HARBOR_ORDINAL[size])
        else:
            ordinals.add(float(size))
    out = panel.loc[panel["harbor_size"].isin(ordinals)].copy()
    if out.empty:
        raise DataError(f"no rows with harbor size in {sorted(ordinals)}")
    return out


def leave_region_out(
    panel: pd.DataFrame, region_key: str
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Train on all rows outside `region_key`, test on rows inside it."""
    if "region" not in panel.columns:
        raise SchemaError("panel has no region column")
    in_region = panel["region"] == region_key
    if not in_region.any():
        raise DataError(f"region {region_key!r} not present in panel")
    train = panel.loc[~in_region].copy()
    test = panel.loc[in_region].copy()
    overlap = set(train["port_id"]) & set(test["port_id"])
    if overlap:
        raise DataError(f"ports {sorted(overlap)} appear on both sides of the split")
    return train, test


def filter_coverage(panel: pd.DataFrame, min_coverage: float = 0.8) -> pd.DataFrame:
    """Keep ports observed in at least `min_coverage` of the panel's months."""
    if not 0.0 <= min_coverage <= 1.0:
        raise DataError(f"min_coverage must be in [0, 1], got {min_coverage}")
    n_months = panel["year_month"].nunique()
    share = panel.groupby("port_id")["year_month"].nunique() / n_months
    keep = set(share.index[share >= min_coverage])
    out = panel.loc[panel["port_id"].isin(keep)].copy()
    if out.empty:
        raise DataError(f"no port reaches {min_coverage:.0%} monthly coverage")
    return out


def write_panel_csv(panel: pd.DataFrame, path) -> None:
    panel.to_csv(path, index=False)


def read_panel_csv(path) -> pd.DataFrame:
    # float_precision="round_trip" so write -> read -> write is byte-stable
    return pd.read_csv(
        path,
        dtype={"port_id": str, "year_month": str, "region": str},
        float_precision="round_trip",
    )
