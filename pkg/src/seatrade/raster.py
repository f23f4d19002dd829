"""Pure numeric kernels reducing monthly AOI raster stacks to activity features.

A port's area of interest (AOI) is observed several times per month in three
bands: SAR VV (movement proxy), SAR VH (metallic-object backscatter), and
nighttime-light radiance (NTL). This module turns one month of co-registered
grids into the scalar features used downstream:

* ``sar_diff_median`` - median over consecutive image pairs of the summed
  absolute pixel-wise dB difference (VV band).
* ``vh_median_mean``  - spatial mean, in dB, of the monthly per-pixel median
  composite (VH band); negative values are valid weak returns.
* ``ntl_mean`` / ``ntl_max`` / ``ntl_std`` - statistics of the monthly median
  NTL composite after flooring negative radiance artifacts at zero.
* ``lit_area_ratio``  - share of pixels whose monthly median radiance exceeds
  a luminosity threshold (default 0.5).

All functions are pure and deterministic: safe to evaluate concurrently
across AOI-months. Nodata handling: pairwise operations use the intersection
of unmasked pixels; composites use whatever observations each pixel has, and
a composite pixel is masked only when masked at every timestamp.
"""

from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .months import parse_ym

# Offset inside the dB conversion; keeps log10 finite for zero-valued pixels.
DB_EPSILON = 1e-8

# Default luminosity threshold for the lit-area ratio.
DEFAULT_LIT_THRESHOLD = 0.5

NTL_STD_MODES = ("spatial", "temporal")


@dataclass(frozen=True)
class RasterGrid:
    """Single-band float image over one AOI at one timestamp.

    `values` is a (height, width) float64 array; `mask` marks nodata pixels
    (True = missing). Values at masked pixels are never read and are
    normalized to NaN. Pixel units are sensor-native (linear radiance or
    linear backscatter) unless a function documents otherwise.
    """

    values: np.ndarray
    mask: np.ndarray
    timestamp: dt.date

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"grid values must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"grid must be at least 1x1, got {values.shape}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != values.shape:
            raise DataError(
                f"mask shape {mask.shape} does not match values shape {values.shape}"
            )
        values = values.copy()
        values[mask] = np.nan
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask.copy())

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def unmasked_values(self) -> np.ndarray:
        return self.values[~self.mask]


def grid_from_array(
    values, timestamp: dt.date, mask=None, nodata_nan: bool = True
) -> RasterGrid:
    """Build a RasterGrid, deriving the mask from NaNs unless given explicitly."""
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = np.isnan(values) if nodata_nan else np.zeros_like(values, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool) | (np.isnan(values) if nodata_nan else False)
    return RasterGrid(values=values, mask=mask, timestamp=timestamp)


@dataclass(frozen=True)
class AoiMonthStack:
    """Time-ordered grids for one AOI within one calendar month.

    The constructor sorts by timestamp and enforces: identical dimensions,
    strictly increasing timestamps (no duplicate acquisition dates), and all
    timestamps inside `year_month`.
    """

    aoi_id: str
    year_month: str
    grids: tuple[RasterGrid, ...] = field(default=())

    def __post_init__(self):
        year, month = parse_ym(self.year_month)
        grids = tuple(sorted(self.grids, key=lambda g: g.timestamp))
        for a, b in zip(grids, grids[1:]):
            if a.timestamp == b.timestamp:
                raise DataError(
                    f"duplicate timestamp {a.timestamp} in stack {self.aoi_id}"
                )
        for g in grids:
            if (g.timestamp.year, g.timestamp.month) != (year, month):
                raise DataError(
                    f"grid at {g.timestamp} outside month {self.year_month}"
                )
            if g.shape != grids[0].shape:
                raise DataError(
                    f"grid shape {g.shape} differs from {grids[0].shape} "
                    f"in stack {self.aoi_id}"
                )
        object.__setattr__(self, "grids", grids)

    def __len__(self) -> int:
        return len(self.grids)


@dataclass(frozen=True)
class SatFeatures:
    """Per-(AOI, month) satellite features; None marks a missing feature.

    A feature is missing (never zero) when its band stack violates the
    preconditions of the reduction that produces it, e.g. fewer than two VV
    grids or an empty NTL stack.
    """

    aoi_id: str
    year_month: str
    sar_diff_median: float | None = None
    vh_median_mean: float | None = None
    ntl_mean: float | None = None
    ntl_max: float | None = None
    ntl_std: float | None = None
    lit_area_ratio: float | None = None
    n_obs_vv: int = 0
    n_obs_vh: int = 0
    n_obs_ntl: int = 0

    def __post_init__(self):
        if self.lit_area_ratio is not None and not 0.0 <= self.lit_area_ratio <= 1.0:
            raise DataError(f"lit_area_ratio {self.lit_area_ratio} outside [0, 1]")


def to_db(grid: RasterGrid) -> RasterGrid:
    """Convert linear pixel values to decibels: 10*log10(value + 1e-8).

    The mask is unchanged. Raises if any unmasked pixel is negative, since
    linear radiance/backscatter cannot be negative.
    """
    unmasked = ~grid.mask
    if np.any(grid.values[unmasked] < 0):
        raise DataError("negative linear radiance")
    values = np.full_like(grid.values, np.nan)
    values[unmasked] = 10.0 * np.log10(grid.values[unmasked] + DB_EPSILON)
    return RasterGrid(values=values, mask=grid.mask, timestamp=grid.timestamp)


def abs_diff_sum(g1: RasterGrid, g2: RasterGrid) -> float:
    """Sum of |g2 - g1| over pixels unmasked in both grids.

    Inputs are assumed to be in dB already; this function does no conversion.
    """
    if g1.shape != g2.shape:
        raise DataError(f"dimension mismatch {g1.shape} vs {g2.shape}")
    joint = ~g1.mask & ~g2.mask
    if not np.any(joint):
        raise DataError("no jointly unmasked pixels")
    return float(np.sum(np.abs(g2.values[joint] - g1.values[joint])))


def _median_even_mean(values: np.ndarray) -> float:
    """Median with the even-count convention: mean of the two central values."""
    return float(np.median(values))


def vv_diff_median(stack: AoiMonthStack) -> float | None:
    """Monthly movement proxy: median of consecutive-pair dB difference sums.

    Each grid is converted to dB first; all consecutive available pairs within
    the month are differenced. Returns None (feature missing, not zero) when
    the stack has fewer than two grids.
    """
    if len(stack) < 2:
        return None
    db_grids = [to_db(g) for g in stack.grids]
    diffs = [abs_diff_sum(a, b) for a, b in zip(db_grids, db_grids[1:])]
    return _median_even_mean(np.asarray(diffs))


def _composite(stack: AoiMonthStack, reducer: str) -> RasterGrid:
    if len(stack) == 0:
        raise DataError(f"empty stack for {stack.aoi_id} {stack.year_month}")
    cube = np.stack([g.values for g in stack.grids])  # (T, H, W), NaN = masked
    all_masked = np.all(np.stack([g.mask for g in stack.grids]), axis=0)
    with np.errstate(invalid="ignore"), warnings.catch_warnings():
        # pixels masked at every timestamp legitimately reduce over all-NaN
        warnings.simplefilter("ignore", category=RuntimeWarning)
        if reducer == "median":
            out = np.nanmedian(cube, axis=0)
        elif reducer == "max":
            out = np.nanmax(np.where(np.isnan(cube), -np.inf, cube), axis=0)
            out = np.where(all_masked, np.nan, out)
        else:
            raise ValueError(f"unknown reducer {reducer!r}")
    return RasterGrid(values=out, mask=all_masked, timestamp=stack.grids[0].timestamp)


def pixelwise_median(stack: AoiMonthStack) -> RasterGrid:
    """Per-pixel median across time, ignoring masked observations.

    An output pixel is masked only if it is masked at every timestamp.
    Even observation counts use the mean of the two central values.
    """
    return _composite(stack, "median")


def pixelwise_max(stack: AoiMonthStack) -> RasterGrid:
    """Per-pixel maximum across time, ignoring masked observations."""
    return _composite(stack, "max")


def vh_backscatter(stack: AoiMonthStack) -> float:
    """Spatial mean, in dB, of the monthly per-pixel median composite.

    The median is taken in linear units, then converted to dB, then averaged
    over unmasked pixels. May legitimately be negative (weak radar returns).
    """
    composite = pixelwise_median(stack)
    if np.all(composite.mask):
        raise DataError("composite has no unmasked pixels")
    db = to_db(composite)
    return float(np.mean(db.unmasked_values()))


def ntl_stats(stack: AoiMonthStack, ntl_std_mode: str = "spatial") -> dict[str, float]:
    """Monthly nighttime-light statistics over the AOI.

    Builds the per-pixel median composite, floors each pixel at zero to remove
    negative radiance artifacts, and returns the spatial mean, max, and
    population standard deviation over unmasked pixels.

    `ntl_std_mode` selects the std interpretation: "spatial" (default) is the
    composite's spatial std; "temporal" is the population std across daily AOI
    means (each day's mean over its unmasked, zero-floored pixels). Mean and
    max always come from the composite.
    """
    if ntl_std_mode not in NTL_STD_MODES:
        raise DataError(f"ntl_std_mode must be one of {NTL_STD_MODES}")
    composite = pixelwise_median(stack)
    if np.all(composite.mask):
        raise DataError("composite has no unmasked pixels")
    floored = np.maximum(composite.unmasked_values(), 0.0)
    stats = {
        "ntl_mean": float(np.mean(floored)),
        "ntl_max": float(np.max(floored)),
        "ntl_std": float(np.std(floored)),
    }
    if ntl_std_mode == "temporal":
        daily_means = []
        for g in stack.grids:
            vals = g.unmasked_values()
            if vals.size == 0:
                continue
            daily_means.append(float(np.mean(np.maximum(vals, 0.0))))
        if not daily_means:
            raise DataError("no grid with unmasked pixels for temporal std")
        stats["ntl_std"] = float(np.std(np.asarray(daily_means)))
    return stats


def lit_area_ratio(stack: AoiMonthStack, tau: float = DEFAULT_LIT_THRESHOLD) -> float:
    """Share of unmasked pixels whose per-pixel temporal median exceeds tau.

    The comparison is strict (> tau). tau must be nonnegative.
    """
    if tau < 0:
        raise DataError(f"lit threshold must be >= 0, got {tau}")
    composite = pixelwise_median(stack)
    lit = composite.unmasked_values()
    if lit.size == 0:
        raise DataError("all pixels masked")
    return float(np.count_nonzero(lit > tau) / lit.size)


def month_features(
    aoi_id: str,
    year_month: str,
    vv_stack: AoiMonthStack | None = None,
    vh_stack: AoiMonthStack | None = None,
    ntl_stack: AoiMonthStack | None = None,
    tau: float = DEFAULT_LIT_THRESHOLD,
    ntl_std_mode: str = "spatial",
) -> SatFeatures:
    """Reduce one month's band stacks to a SatFeatures row.

    Stacks that are absent or violate a reduction's preconditions yield
    missing features for that band rather than an error; downstream models
    handle missingness explicitly.
    """
    fields: dict[str, float | None] = {}
    n_vv = len(vv_stack) if vv_stack is not None else 0
    n_vh = len(vh_stack) if vh_stack is not None else 0
    n_ntl = len(ntl_stack) if ntl_stack is not None else 0

    if vv_stack is not None and len(vv_stack) >= 2:
        try:
            fields["sar_diff_median"] = vv_diff_median(vv_stack)
        except DataError:
            fields["sar_diff_median"] = None
    if vh_stack is not None and len(vh_stack) >= 1:
        try:
            fields["vh_median_mean"] = vh_backscatter(vh_stack)
        except DataError:
            fields["vh_median_mean"] = None
    if ntl_stack is not None and len(ntl_stack) >= 1:
        try:
            fields.update(ntl_stats(ntl_stack, ntl_std_mode=ntl_std_mode))
            fields["lit_area_ratio"] = lit_area_ratio(ntl_stack, tau=tau)
        except DataError:
            fields.update(
                ntl_mean=None, ntl_max=None, ntl_std=None, lit_area_ratio=None
            )
    return SatFeatures(
        aoi_id=aoi_id,
        year_month=year_month,
        n_obs_vv=n_vv,
        n_obs_vh=n_vh,
        n_obs_ntl=n_ntl,
        **fields,
    )


def features_missing(features: SatFeatures) -> bool:
    """True when every satellite feature of the row is missing."""
    return all(
        getattr(features, name) is None
        for name in (
            "sar_diff_median",
            "vh_median_mean",
            "ntl_mean",
            "ntl_max",
            "ntl_std",
            "lit_area_ratio",
        )
    )
