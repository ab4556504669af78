"""Per-product, per-month directed trade networks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional, Union

import numpy as np

from .ingest import FlowObservation
from .periods import YearMonth, as_period
from .table import FlowTable

Flows = Union[FlowTable, Iterable[FlowObservation]]

NETWORK_COLUMNS = ("origin", "destination", "value_usd", "quantity_kg")


@dataclass(frozen=True, slots=True)
class EdgeWeight:
    value: Optional[float]
    quantity: Optional[float] = None


class NetworkStats(NamedTuple):
    node_count: int
    edge_count: int
    total_value: float


class TradeNetwork:
    """Simple directed graph of one product in one month.

    Nodes are the sorted country codes that appear as an endpoint of some
    edge.  Edges are stored as parallel arrays sorted by (origin, destination)
    index; missing amounts are NaN.  Instances are immutable.
    """

    __slots__ = ("product", "period", "nodes", "_src", "_dst", "_value", "_quantity", "_index")

    def __init__(self, product: str, period: YearMonth, nodes, src, dst, value, quantity):
        self.product = product
        self.period = period
        self.nodes = tuple(nodes)
        self._src = np.asarray(src, dtype=np.int32)
        self._dst = np.asarray(dst, dtype=np.int32)
        self._value = np.asarray(value, dtype=np.float64)
        self._quantity = np.asarray(quantity, dtype=np.float64)
        for a in (self._src, self._dst, self._value, self._quantity):
            a.flags.writeable = False
        self._index = {c: i for i, c in enumerate(self.nodes)}

    def __repr__(self) -> str:
        return f"TradeNetwork({self.product}, {self.period}, nodes={len(self.nodes)}, edges={len(self._src)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, TradeNetwork):
            return NotImplemented
        return (
            self.product == other.product
            and self.period == other.period
            and self.nodes == other.nodes
            and np.array_equal(self._src, other._src)
            and np.array_equal(self._dst, other._dst)
            and np.array_equal(self._value, other._value, equal_nan=True)
            and np.array_equal(self._quantity, other._quantity, equal_nan=True)
        )

    __hash__ = None

    @property
    def edge_count(self) -> int:
        return len(self._src)

    @property
    def edges(self) -> dict:
        return {
            (self.nodes[o], self.nodes[d]): EdgeWeight(_opt(v), _opt(q))
            for o, d, v, q in zip(self._src.tolist(), self._dst.tolist(), self._value.tolist(), self._quantity.tolist())
        }

    def arrays(self):
        """``(src, dst, value, quantity)`` index arrays into ``nodes``."""
        return self._src, self._dst, self._value, self._quantity

    def node_index(self, code: str) -> Optional[int]:
        return self._index.get(code)

    def edge(self, origin: str, destination: str) -> Optional[EdgeWeight]:
        o, d = self._index.get(origin), self._index.get(destination)
        if o is None or d is None:
            return None
        hit = np.flatnonzero((self._src == o) & (self._dst == d))
        if not len(hit):
            return None
        r = hit[0]
        return EdgeWeight(_opt(float(self._value[r])), _opt(float(self._quantity[r])))


def _opt(x: float) -> Optional[float]:
    return None if x != x else x


def _as_table(flows: Flows) -> FlowTable:
    return flows if isinstance(flows, FlowTable) else FlowTable.from_observations(flows)


def _network_from_rows(table: FlowTable, rows: slice | np.ndarray, product: str, period: YearMonth) -> TradeNetwork:
    o = table.origin[rows]
    d = table.destination[rows]
    used = np.union1d(o, d)
    remap = np.full(len(table.countries), -1, dtype=np.int32)
    remap[used] = np.arange(len(used), dtype=np.int32)
    src, dst = remap[o], remap[d]
    # codebook is sorted, so the table's (origin, destination) order survives remapping
    return TradeNetwork(
        product,
        period,
        [table.countries[i] for i in used.tolist()],
        src,
        dst,
        table.value[rows],
        table.quantity[rows],
    )


def build_network(flows: Flows, product: str, period: "YearMonth | str") -> TradeNetwork:
    """Network of all flows of ``product`` in ``period``; empty if none match."""
    period = as_period(period)
    table = _as_table(flows)
    sl = table.product_slice(product)
    rows = np.flatnonzero(table.period[sl] == period.ordinal) + sl.start
    return _network_from_rows(table, rows, product, period)


def iter_networks(flows: Flows, product: Optional[str] = None) -> Iterator[TradeNetwork]:
    """Every non-empty network in the table, ordered by (product, period)."""
    table = _as_table(flows)
    sl = table.product_slice(product) if product is not None else slice(0, len(table))
    prod = table.product[sl]
    per = table.period[sl]
    if not len(prod):
        return
    breaks = np.flatnonzero((np.diff(prod) != 0) | (np.diff(per) != 0)) + 1
    starts = np.concatenate(([0], breaks)) + sl.start
    ends = np.concatenate((breaks, [len(prod)])) + sl.start
    for a, b in zip(starts.tolist(), ends.tolist()):
        yield _network_from_rows(
            table, slice(a, b), table.products[table.product[a]], YearMonth.from_ordinal(int(table.period[a]))
        )


def out_neighbors(net: TradeNetwork, origin: str) -> set:
    """Set of ``(destination, EdgeWeight)`` for edges leaving ``origin``."""
    o = net.node_index(origin)
    if o is None:
        return set()
    src, dst, value, qty = net.arrays()
    rows = np.flatnonzero(src == o)
    return {(net.nodes[dst[r]], EdgeWeight(_opt(float(value[r])), _opt(float(qty[r])))) for r in rows.tolist()}


def network_stats(net: TradeNetwork) -> NetworkStats:
    _, _, value, _ = net.arrays()
    total = math.fsum(v for v in value.tolist() if v == v)
    return NetworkStats(len(net.nodes), net.edge_count, total)


def write_network(net: TradeNetwork, stream, delimiter: str = ",") -> None:
    w = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    w.writerow(NETWORK_COLUMNS)
    for (o, d), e in net.edges.items():
        w.writerow((o, d, "" if e.value is None else repr(e.value), "" if e.quantity is None else repr(e.quantity)))
