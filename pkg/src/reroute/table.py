"""Columnar storage for harmonized flows.

A ``FlowTable`` holds the same information as a list of ``FlowObservation``
objects but as parallel numpy arrays, which is what the network and index
kernels consume.  Country and product codes are stored as indices into sorted
codebooks, so integer order agrees with lexicographic code order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import FormatError
from .ingest import COUNTRY_RE, HS6_RE, FlowObservation, Provenance, _text
from .periods import YearMonth

FLOW_COLUMNS = ("period", "origin", "destination", "hs6", "value_usd", "quantity_kg", "provenance")

_PROVENANCE = list(Provenance)
_PROV_CODE = {p: i for i, p in enumerate(_PROVENANCE)}


@dataclass(frozen=True, eq=False)
class FlowTable:
    countries: tuple
    products: tuple
    period: np.ndarray  # int64 month ordinals
    origin: np.ndarray  # int32 into countries
    destination: np.ndarray
    product: np.ndarray  # int32 into products
    value: np.ndarray  # float64, NaN = missing
    quantity: np.ndarray
    provenance: np.ndarray  # uint8 into Provenance

    def __post_init__(self) -> None:
        for arr in (self.period, self.origin, self.destination, self.product, self.value, self.quantity, self.provenance):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.period)

    @classmethod
    def from_arrays(
        cls,
        countries: Iterable[str],
        products: Iterable[str],
        period,
        origin,
        destination,
        product,
        value,
        quantity=None,
        provenance=None,
    ) -> "FlowTable":
        """Build from index arrays, sorting rows to canonical (product, period, origin, destination) order.

        ``countries`` and ``products`` must already be sorted; duplicate keys and
        self loops are rejected.
        """
        countries, products = tuple(countries), tuple(products)
        if list(countries) != sorted(set(countries)) or list(products) != sorted(set(products)):
            raise ValueError("codebooks must be sorted and unique")
        period = np.asarray(period, dtype=np.int64)
        origin = np.asarray(origin, dtype=np.int32)
        destination = np.asarray(destination, dtype=np.int32)
        product = np.asarray(product, dtype=np.int32)
        value = np.asarray(value, dtype=np.float64)
        n = len(period)
        quantity = np.full(n, np.nan) if quantity is None else np.asarray(quantity, dtype=np.float64)
        provenance = (
            np.full(n, _PROV_CODE[Provenance.DESTINATION_REPORTED], dtype=np.uint8)
            if provenance is None
            else np.asarray(provenance, dtype=np.uint8)
        )
        if np.any(origin == destination):
            raise ValueError("self-loop flow (origin == destination)")
        if np.any(value < 0) or np.any(quantity < 0):
            raise ValueError("negative value or quantity")
        order = np.lexsort((destination, origin, period, product))
        cols = [a[order] for a in (period, origin, destination, product, value, quantity, provenance)]
        if n > 1:
            same = (
                (np.diff(cols[3]) == 0) & (np.diff(cols[0]) == 0) & (np.diff(cols[1]) == 0) & (np.diff(cols[2]) == 0)
            )
            if same.any():
                raise ValueError("duplicate (period, origin, destination, hs6) flow")
        return cls(countries, products, *cols)

    @classmethod
    def from_observations(cls, observations: Iterable[FlowObservation]) -> "FlowTable":
        obs = list(observations)
        countries = tuple(sorted({o.origin for o in obs} | {o.destination for o in obs}))
        products = tuple(sorted({o.hs6 for o in obs}))
        cidx = {c: i for i, c in enumerate(countries)}
        pidx = {p: i for i, p in enumerate(products)}
        return cls.from_arrays(
            countries,
            products,
            [o.period.ordinal for o in obs],
            [cidx[o.origin] for o in obs],
            [cidx[o.destination] for o in obs],
            [pidx[o.hs6] for o in obs],
            [np.nan if o.value is None else o.value for o in obs],
            [np.nan if o.quantity is None else o.quantity for o in obs],
            [_PROV_CODE[o.provenance] for o in obs],
        )

    @classmethod
    def from_rows(cls, rows: Iterable[tuple]) -> "FlowTable":
        """Build from ``(ordinal, origin, destination, hs6, value, quantity, provenance)`` tuples."""
        rows = list(rows)
        if not rows:
            return cls.from_arrays((), (), [], [], [], [], [])
        t, o, d, h, v, q, prov = zip(*rows)
        countries = tuple(sorted(set(o) | set(d)))
        products = tuple(sorted(set(h)))
        cidx = {c: i for i, c in enumerate(countries)}
        pidx = {p: i for i, p in enumerate(products)}
        return cls.from_arrays(
            countries,
            products,
            t,
            [cidx[c] for c in o],
            [cidx[c] for c in d],
            [pidx[p] for p in h],
            [np.nan if x is None else x for x in v],
            [np.nan if x is None else x for x in q],
            [_PROV_CODE[p] for p in prov],
        )

    def observations(self) -> list[FlowObservation]:
        out = []
        for t, o, d, p, v, q, s in zip(
            self.period.tolist(),
            self.origin.tolist(),
            self.destination.tolist(),
            self.product.tolist(),
            self.value.tolist(),
            self.quantity.tolist(),
            self.provenance.tolist(),
        ):
            out.append(
                FlowObservation(
                    YearMonth.from_ordinal(t),
                    self.countries[o],
                    self.countries[d],
                    self.products[p],
                    None if v != v else v,
                    None if q != q else q,
                    _PROVENANCE[s],
                )
            )
        return out

    def country_index(self, code: str) -> Optional[int]:
        i = np.searchsorted(self.countries, code)
        return int(i) if i < len(self.countries) and self.countries[i] == code else None

    def product_index(self, code: str) -> Optional[int]:
        i = np.searchsorted(self.products, code)
        return int(i) if i < len(self.products) and self.products[i] == code else None

    def period_span(self) -> tuple[YearMonth, YearMonth]:
        if not len(self):
            raise ValueError("empty flow table has no periods")
        return YearMonth.from_ordinal(int(self.period.min())), YearMonth.from_ordinal(int(self.period.max()))

    def product_slice(self, code: str) -> slice:
        """Row range of one product (rows are sorted by product first)."""
        p = self.product_index(code)
        if p is None:
            return slice(0, 0)
        lo, hi = np.searchsorted(self.product, [p, p + 1])
        return slice(int(lo), int(hi))

    def write_csv(self, stream, delimiter: str = ",") -> None:
        w = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
        w.writerow(FLOW_COLUMNS)
        periods = {t: str(YearMonth.from_ordinal(t)) for t in np.unique(self.period).tolist()}
        for t, o, d, p, v, q, s in zip(
            self.period.tolist(),
            self.origin.tolist(),
            self.destination.tolist(),
            self.product.tolist(),
            self.value.tolist(),
            self.quantity.tolist(),
            self.provenance.tolist(),
        ):
            w.writerow(
                (
                    periods[t],
                    self.countries[o],
                    self.countries[d],
                    self.products[p],
                    "" if v != v else repr(v),
                    "" if q != q else repr(q),
                    _PROVENANCE[s].value,
                )
            )


def _codes(column: list, pattern, what: str, lines: list):
    """Unique codes and inverse indices; each distinct code is validated once."""
    uniq, inv = np.unique(np.asarray(column, dtype=str), return_inverse=True)
    for k, code in enumerate(uniq.tolist()):
        if not pattern.match(code):
            line = lines[int(np.flatnonzero(inv == k)[0])]
            raise FormatError(f"flows line {line}: malformed {what} {code!r}")
    return uniq.tolist(), inv


def _floats(column: list, what: str, lines: list) -> np.ndarray:
    try:
        return np.array([float(x) if x else np.nan for x in column], dtype=np.float64)
    except ValueError:
        for line, x in zip(lines, column):
            try:
                float(x) if x else None
            except ValueError:
                raise FormatError(f"flows line {line}: {what} is not a number: {x!r}") from None
        raise


def read_flow_table(stream, delimiter: str = ",") -> FlowTable:
    """Read a harmonized flows file as written by ``FlowTable.write_csv``."""
    reader = csv.reader(_text(stream), delimiter=delimiter)
    header = [h.strip().lower() for h in next(reader, [])]
    missing = [c for c in FLOW_COLUMNS[:5] if c not in header]
    if missing:
        raise FormatError(f"flows header lacks columns: {', '.join(missing)}")
    pos = {c: header.index(c) for c in FLOW_COLUMNS if c in header}
    width = max(pos.values()) + 1
    lines, rows = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) < width:
            raise FormatError(f"flows line {lineno}: expected at least {width} fields, got {len(row)}")
        lines.append(lineno)
        rows.append(row)
    cols = {c: [r[k] for r in rows] for c, k in pos.items()}

    period_codes, period_inv = np.unique(np.asarray(cols["period"], dtype=str), return_inverse=True)
    ordinals = []
    for k, text in enumerate(period_codes.tolist()):
        try:
            ordinals.append(YearMonth.parse(text).ordinal)
        except ValueError as exc:
            line = lines[int(np.flatnonzero(period_inv == k)[0])]
            raise FormatError(f"flows line {line}: {exc}") from exc
    period = np.asarray(ordinals, dtype=np.int64)[period_inv]

    countries, inv = _codes(cols["origin"] + cols["destination"], COUNTRY_RE, "country code", lines + lines)
    origin, destination = inv[: len(rows)], inv[len(rows) :]
    products, product = _codes(cols["hs6"], HS6_RE, "hs6 code", lines)
    value = _floats(cols["value_usd"], "value_usd", lines)
    quantity = _floats(cols["quantity_kg"], "quantity_kg", lines) if "quantity_kg" in cols else None
    provenance = None
    if "provenance" in cols:
        try:
            provenance = [_PROV_CODE[Provenance(x)] for x in cols["provenance"]]
        except ValueError as exc:
            raise FormatError(f"flows: {exc}") from exc
    try:
        return FlowTable.from_arrays(countries, products, period, origin, destination, product, value, quantity, provenance)
    except ValueError as exc:
        raise FormatError(f"flows: {exc}") from exc
