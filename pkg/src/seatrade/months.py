"""Calendar-month arithmetic on "YYYY-MM" strings.

Month keys are zero-padded strings so that lexicographic order equals
calendar order; every table in the pipeline uses this representation.
"""

from __future__ import annotations

import re

from .errors import DataError

_YM_RE = re.compile(r"^(\d{4})-(\d{2})$")


def parse_ym(ym: str) -> tuple[int, int]:
    """Split "YYYY-MM" into (year, month), validating the month range."""
    m = _YM_RE.match(ym)
    if not m:
        raise DataError(f"bad year-month {ym!r}, expected YYYY-MM")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise DataError(f"bad month in {ym!r}")
    return year, month


def format_ym(year: int, month: int) -> str:
    return f"{year:04d}-{month:02d}"


def add_months(ym: str, k: int) -> str:
    year, month = parse_ym(ym)
    idx = year * 12 + (month - 1) + k
    return format_ym(idx // 12, idx % 12 + 1)


def month_index(ym: str) -> int:
    """Months since 0000-01; differences of indices are month gaps."""
    year, month = parse_ym(ym)
    return year * 12 + (month - 1)


def month_range(first: str, last: str) -> list[str]:
    """All months from `first` through `last`, inclusive."""
    lo, hi = month_index(first), month_index(last)
    if hi < lo:
        raise DataError(f"month range {first}..{last} is reversed")
    return [add_months(first, k) for k in range(hi - lo + 1)]
