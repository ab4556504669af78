"""Two-hop circumvention index and its monthly series.

For an exporter ``j`` and importer ``i`` the index of a monthly network sums,
over every third country ``k``, the amount carried by the complete path
``j -> k -> i``.  A path counts only when both legs exist in the same month.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateSeriesError, InsufficientDataError, PreconditionError
from .graph import TradeNetwork
from .periods import YearMonth, check_monthly_grid, month_range
from .table import FlowTable


class PathStatistic(str, enum.Enum):
    VALUE_SUM = "value"
    QUANTITY_SUM = "quantity"
    LAST_LEG_VALUE = "last-leg"


def _leg_amounts(stat: PathStatistic, value: np.ndarray, quantity: np.ndarray):
    stat = PathStatistic(stat)
    if stat is PathStatistic.VALUE_SUM:
        return value, value
    if stat is PathStatistic.QUANTITY_SUM:
        return quantity, quantity
    # first leg only has to exist
    return np.zeros_like(value), value


def two_hop_value(net: TradeNetwork, exporter: str, importer: str, via: str, stat=PathStatistic.VALUE_SUM) -> float:
    """Amount on the path ``exporter -> via -> importer``, 0 if either leg is absent."""
    if len({exporter, importer, via}) < 3:
        raise PreconditionError(f"exporter, importer and via must be distinct: {exporter}, {importer}, {via}")
    first = net.edge(exporter, via)
    last = net.edge(via, importer)
    if first is None or last is None:
        return 0.0
    stat = PathStatistic(stat)
    if stat is PathStatistic.VALUE_SUM:
        a, b = first.value, last.value
    elif stat is PathStatistic.QUANTITY_SUM:
        a, b = first.quantity, last.quantity
    else:
        a, b = 0.0, last.value
    if a is None or b is None:
        return 0.0
    return a + b


def circumvention_index(net: TradeNetwork, exporter: str, importer: str, stat=PathStatistic.VALUE_SUM) -> float:
    """Sum of ``two_hop_value`` over all third countries of ``net``."""
    if exporter == importer:
        raise PreconditionError(f"exporter and importer must differ ({exporter})")
    j, i = net.node_index(exporter), net.node_index(importer)
    if j is None or i is None:
        return 0.0
    src, dst, value, qty = net.arrays()
    out_amt, in_amt = _leg_amounts(stat, value, qty)
    group = np.zeros(len(src), dtype=np.int64)
    return float(kernels.route_index(group, src, dst, out_amt, in_amt, 1, len(net.nodes), j, i)[0])


@dataclass(frozen=True, eq=False)
class CircumventionSeries:
    """Monthly index values for one (product, exporter, importer) route.

    ``values`` is NaN where no network data exists for the month; an observed
    zero (network present, no complete path) is stored as 0.
    """

    product: str
    exporter: str
    importer: str
    periods: tuple
    values: np.ndarray
    statistic: PathStatistic = PathStatistic.VALUE_SUM

    def __post_init__(self) -> None:
        if len(self.periods) != len(self.values):
            raise ValueError("periods and values differ in length")
        check_monthly_grid(self.periods)
        present = self.values[~np.isnan(self.values)]
        if np.any(present < 0):
            raise ValueError("index values must be nonnegative")
        self.values.flags.writeable = False

    def __len__(self) -> int:
        return len(self.periods)

    @property
    def route(self) -> tuple:
        return (self.exporter, self.importer)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def with_values(self, values) -> "CircumventionSeries":
        return CircumventionSeries(
            self.product, self.exporter, self.importer, self.periods, np.array(values, dtype=float), self.statistic
        )


def index_series(
    networks: Sequence[TradeNetwork],
    exporter: str,
    importer: str,
    stat=PathStatistic.VALUE_SUM,
    periods: Optional[Sequence[YearMonth]] = None,
) -> CircumventionSeries:
    """Index per network; months of ``periods`` without a network are missing.

    ``periods`` defaults to the monthly range spanned by the networks.
    """
    networks = list(networks)
    if not networks:
        raise InsufficientDataError("no periods: empty network list")
    products = {n.product for n in networks}
    if len(products) > 1:
        raise PreconditionError(f"networks mix products: {sorted(products)}")
    for a, b in zip(networks, networks[1:]):
        if not a.period < b.period:
            raise PreconditionError(f"network periods not strictly increasing: {a.period} -> {b.period}")
    if periods is None:
        periods = month_range(networks[0].period, networks[-1].period)
    periods = tuple(periods)
    pos = {p: n for n, p in enumerate(periods)}
    values = np.full(len(periods), np.nan)
    for net in networks:
        if net.period not in pos:
            raise PreconditionError(f"network period {net.period} outside the period grid")
        values[pos[net.period]] = circumvention_index(net, exporter, importer, stat)
    return CircumventionSeries(products.pop(), exporter, importer, periods, values, PathStatistic(stat))


def route_series(
    table: FlowTable,
    exporter: str,
    importer: str,
    stat=PathStatistic.VALUE_SUM,
    periods: Optional[Sequence[YearMonth]] = None,
    products: Optional[Iterable[str]] = None,
) -> dict:
    """Index series of one route for many products at once.

    Equivalent to ``index_series`` over every monthly network of each product,
    computed in one kernel pass over the table.  Returns ``{hs6: series}``.
    """
    if exporter == importer:
        raise PreconditionError(f"exporter and importer must differ ({exporter})")
    stat = PathStatistic(stat)
    if periods is None:
        periods = month_range(*table.period_span())
    periods = tuple(periods)
    check_monthly_grid(periods)
    t0, n_t = periods[0].ordinal, len(periods)
    if products is None:
        pcodes = list(table.products)
    else:
        pcodes = sorted(set(products))
    p_local = np.full(len(table.products) + 1, -1, dtype=np.int64)
    for n, code in enumerate(pcodes):
        idx = table.product_index(code)
        if idx is not None:
            p_local[idx] = n

    lp = p_local[table.product]
    tt = table.period - t0
    keep = (lp >= 0) & (tt >= 0) & (tt < n_t)
    group = lp[keep] * n_t + tt[keep]
    n_groups = len(pcodes) * n_t

    present = np.zeros(n_groups, dtype=bool)
    present[group] = True
    j, i = table.country_index(exporter), table.country_index(importer)
    if j is None or i is None:
        values = np.zeros(n_groups)
    else:
        out_amt, in_amt = _leg_amounts(stat, table.value[keep], table.quantity[keep])
        values = kernels.route_index(
            group, table.origin[keep], table.destination[keep], out_amt, in_amt, n_groups, len(table.countries), j, i
        )
    values[~present] = np.nan
    values = values.reshape(len(pcodes), n_t)
    return {
        code: CircumventionSeries(code, exporter, importer, periods, values[n].copy(), stat)
        for n, code in enumerate(pcodes)
    }


def standardize_series(values) -> np.ndarray:
    """Z-score over the non-missing entries using the sample standard deviation."""
    x = np.asarray(values, dtype=np.float64)
    ok = ~np.isnan(x)
    n = int(ok.sum())
    if n < 2:
        raise InsufficientDataError(f"need at least 2 non-missing values to standardize, got {n}")
    mean = x[ok].mean()
    sd = x[ok].std(ddof=1)
    if not sd > 0 or not np.isfinite(sd):
        raise DegenerateSeriesError("series has zero variance")
    out = np.full_like(x, np.nan)
    out[ok] = (x[ok] - mean) / sd
    return out
