"""YYYYMM period arithmetic."""

from __future__ import annotations

import numpy as np


def validate_period(period: int) -> int:
    period = int(period)
    year, month = divmod(period, 100)
    if not (1 <= month <= 12) or year < 1:
        raise ValueError(f"invalid YYYYMM period: {period}")
    return period


def to_index(period, origin: int):
    """Months elapsed from ``origin`` to ``period`` (vectorised)."""
    p = np.asarray(period)
    oy, om = divmod(int(origin), 100)
    idx = (p // 100 - oy) * 12 + (p % 100 - om)
    return int(idx) if idx.ndim == 0 else idx


def from_index(index, origin: int):
    """Inverse of :func:`to_index`."""
    i = np.asarray(index)
    oy, om = divmod(int(origin), 100)
    total = oy * 12 + (om - 1) + i
    out = (total // 12) * 100 + total % 12 + 1
    return int(out) if out.ndim == 0 else out


def add_months(period: int, n: int) -> int:
    return from_index(n, period)


def months_between(start: int, end: int) -> int:
    return to_index(end, start)


def period_range(start: int, end: int) -> list[int]:
    return [from_index(i, start) for i in range(months_between(start, end) + 1)]
