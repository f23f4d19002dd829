"""Satellite port-activity features, boosted-tree trade nowcasting, and
spatial-extrapolation diagnostics."""

from .errors import ConfigError, DataError, RgridError, SchemaError, SeatradeError
from .extrap import AnchoredSeries, ChangeEstimate, anchor, pct_change
from .evaluation import EvalReport, build_report, metrics, placebo_shuffle
from .gbt import GradientBoostedTrees
from .mc import McConfig, McResult, run_mc, simulate_rep
from .panel import (
    SAT_FEATURES,
    WPI_FEATURE_NAMES,
    WpiRecord,
    assemble_panel,
    chrono_split,
    encode_wpi,
    feature_columns,
    filter_coverage,
    filter_size,
    leave_region_out,
    log1p,
)
from .raster import (
    AoiMonthStack,
    RasterGrid,
    SatFeatures,
    abs_diff_sum,
    lit_area_ratio,
    month_features,
    ntl_stats,
    pixelwise_max,
    pixelwise_median,
    to_db,
    vh_backscatter,
    vv_diff_median,
)
from .rgrid import read_rgrid, write_rgrid

__version__ = "0.1.0"
