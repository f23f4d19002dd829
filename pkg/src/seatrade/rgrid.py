"""Reader/writer for the RGRID raster file format and the raster directory layout.

Format, bit-exact:

    magic bytes  "RGRD"
    u32 little-endian  width
    u32 little-endian  height
    width*height float32 little-endian, row-major; NaN encodes nodata

Files live under ``<root>/<aoi_id>/<band>/<YYYY-MM-DD>.rgrd`` where the band
directory is one of ``vv``, ``vh``, ``ntl``.
"""

from __future__ import annotations

import datetime as dt
import logging
import struct
from pathlib import Path

import numpy as np

from .errors import RgridError
from .months import format_ym
from .raster import AoiMonthStack, RasterGrid, grid_from_array

log = logging.getLogger(__name__)

MAGIC = b"RGRD"
BANDS = ("vv", "vh", "ntl")
_HEADER = struct.Struct("<II")


def write_rgrid(grid: RasterGrid, path: str | Path) -> None:
    """Write a grid to `path`; masked pixels are stored as NaN."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = grid.values.astype("<f4")
    values[grid.mask] = np.nan
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(grid.width, grid.height))
        fh.write(values.tobytes(order="C"))


def read_rgrid(path: str | Path, timestamp: dt.date | None = None) -> RasterGrid:
    """Read a grid; the timestamp defaults to the date parsed from the filename."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + _HEADER.size:
        raise RgridError(f"{path}: truncated header")
    if raw[: len(MAGIC)] != MAGIC:
        raise RgridError(f"{path}: bad magic bytes")
    width, height = _HEADER.unpack_from(raw, len(MAGIC))
    if width < 1 or height < 1:
        raise RgridError(f"{path}: bad dimensions {width}x{height}")
    body = raw[len(MAGIC) + _HEADER.size :]
    expected = width * height * 4
    if len(body) != expected:
        raise RgridError(f"{path}: expected {expected} payload bytes, got {len(body)}")
    values = np.frombuffer(body, dtype="<f4").reshape(height, width).astype(np.float64)
    if timestamp is None:
        timestamp = date_from_filename(path)
    return grid_from_array(values, timestamp=timestamp)


def date_from_filename(path: str | Path) -> dt.date:
    stem = Path(path).stem
    try:
        return dt.date.fromisoformat(stem)
    except ValueError as exc:
        raise RgridError(f"{path}: filename is not a YYYY-MM-DD date") from exc


def grid_path(root: str | Path, aoi_id: str, band: str, day: dt.date) -> Path:
    if band not in BANDS:
        raise RgridError(f"unknown band {band!r}, expected one of {BANDS}")
    return Path(root) / aoi_id / band / f"{day.isoformat()}.rgrd"


def walk_raster_root(
    root: str | Path,
) -> dict[tuple[str, str], dict[str, list[RasterGrid]]]:
    """Load every readable grid under `root`, grouped by (aoi_id, year_month).

    Returns ``{(aoi, ym): {band: [grids...]}}``. Malformed files are skipped
    with a logged warning; callers decide whether zero usable grids is fatal.
    """
    root = Path(root)
    grouped: dict[tuple[str, str], dict[str, list[RasterGrid]]] = {}
    for path in sorted(root.glob("*/*/*.rgrd")):
        band = path.parent.name
        aoi_id = path.parent.parent.name
        if band not in BANDS:
            log.warning("skipping %s: unknown band directory %r", path, band)
            continue
        try:
            grid = read_rgrid(path)
        except RgridError as exc:
            log.warning("skipping %s: %s", path, exc)
            continue
        ym = format_ym(grid.timestamp.year, grid.timestamp.month)
        grouped.setdefault((aoi_id, ym), {}).setdefault(band, []).append(grid)
    return grouped


def stacks_for_month(
    aoi_id: str, year_month: str, band_grids: dict[str, list[RasterGrid]]
) -> dict[str, AoiMonthStack]:
    """Build per-band stacks from grouped grids for one (aoi, month)."""
    return {
        band: AoiMonthStack(aoi_id=aoi_id, year_month=year_month, grids=tuple(grids))
        for band, grids in band_grids.items()
    }
