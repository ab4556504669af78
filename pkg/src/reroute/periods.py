"""Monthly period arithmetic.

All trade data is monthly, so a period is a (year, month) pair.  Internally
periods are often carried as integer ordinals (``year * 12 + month - 1``),
which makes ranges and comparisons cheap in numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

_PERIOD_RE = re.compile(r"^(\d{4})-(\d{2})(?:-\d{2})?$")


@dataclass(frozen=True, order=True, slots=True)
class YearMonth:
    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    def __hash__(self) -> int:
        return self.year * 12 + self.month

    @classmethod
    def parse(cls, text: str) -> "YearMonth":
        """Parse ``YYYY-MM``; a trailing ``-DD`` is accepted and floored to the month."""
        return _parse(text.strip())

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "YearMonth":
        year, month0 = divmod(int(ordinal), 12)
        return cls(year, month0 + 1)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    def __add__(self, months: int) -> "YearMonth":
        return YearMonth.from_ordinal(self.ordinal + months)

    def __sub__(self, other):
        """``YearMonth - YearMonth`` is a month count; ``YearMonth - int`` steps back."""
        if isinstance(other, YearMonth):
            return self.ordinal - other.ordinal
        if isinstance(other, int):
            return YearMonth.from_ordinal(self.ordinal - other)
        return NotImplemented

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@lru_cache(maxsize=4096)
def _parse(text: str) -> YearMonth:
    m = _PERIOD_RE.match(text)
    if m is None:
        raise ValueError(f"not a YYYY-MM period: {text!r}")
    return YearMonth(int(m.group(1)), int(m.group(2)))


def as_period(value: "YearMonth | str") -> YearMonth:
    if isinstance(value, YearMonth):
        return value
    return YearMonth.parse(value)


def month_range(start: YearMonth, end: YearMonth) -> list[YearMonth]:
    """Inclusive monthly range ``start..end``."""
    return [YearMonth.from_ordinal(o) for o in range(start.ordinal, end.ordinal + 1)]


def iter_months(start: YearMonth, count: int) -> Iterator[YearMonth]:
    for o in range(start.ordinal, start.ordinal + count):
        yield YearMonth.from_ordinal(o)


def check_monthly_grid(periods) -> None:
    """Raise ``ValueError`` unless periods are strictly increasing with monthly spacing."""
    for prev, cur in zip(periods, periods[1:]):
        if cur.ordinal - prev.ordinal != 1:
            raise ValueError(f"periods not consecutive months: {prev} -> {cur}")
