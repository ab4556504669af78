"""Parsing and harmonization of bilateral trade records.

The pipeline order is fixed: ``harmonize_flow_types`` -> ``aggregate_eu`` ->
``mirror_average``.  Each step is a pure function of the input multiset; the
output is sorted by key so that results never depend on input order.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

from .errors import FormatError
from .periods import YearMonth

HS6_RE = re.compile(r"^\d{6}$")
COUNTRY_RE = re.compile(r"^[A-Z][A-Z0-9]{1,3}$")

TRADE_COLUMNS = ("period", "reporter", "partner", "flow_type", "hs6", "value_usd", "quantity_kg")


class FlowType(str, enum.Enum):
    IMPORT = "import"
    EXPORT = "export"
    RE_IMPORT = "re_import"
    RE_EXPORT = "re_export"


class Provenance(str, enum.Enum):
    ORIGIN_REPORTED = "origin_reported"
    DESTINATION_REPORTED = "destination_reported"
    MIRROR_AVERAGED = "mirror_averaged"


@dataclass(frozen=True, slots=True)
class TradeRecord:
    """One reported row: ``reporter`` declares a flow of ``flow_type`` with ``partner``."""

    period: YearMonth
    reporter: str
    partner: str
    flow_type: FlowType
    hs6: str
    value: Optional[float] = None
    quantity: Optional[float] = None

    def __post_init__(self) -> None:
        if self.reporter == self.partner:
            raise ValueError(f"reporter equals partner ({self.reporter})")
        if not HS6_RE.match(self.hs6):
            raise ValueError(f"hs6 must be exactly 6 digits: {self.hs6!r}")
        for name in ("value", "quantity"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite nonnegative number, got {v!r}")


@dataclass(frozen=True, slots=True)
class FlowObservation:
    """A harmonized directed flow ``origin -> destination``.

    ``value`` or ``quantity`` is ``None`` only when no source report carried it.
    """

    period: YearMonth
    origin: str
    destination: str
    hs6: str
    value: Optional[float]
    quantity: Optional[float]
    provenance: Provenance

    def __post_init__(self) -> None:
        if self.origin == self.destination:
            raise ValueError(f"origin equals destination ({self.origin})")

    @property
    def key(self) -> tuple:
        return (self.period, self.origin, self.destination, self.hs6)


# -- EU membership ----------------------------------------------------------

EU28 = frozenset(
    "AUT BEL BGR HRV CYP CZE DNK EST FIN FRA DEU GRC HUN IRL ITA LVA LTU LUX "
    "MLT NLD POL PRT ROU SVK SVN ESP SWE GBR".split()
)


@dataclass(frozen=True)
class EuMembership:
    """Set of member codes collapsed into a single ``label`` partner.

    ``spans`` optionally dates each membership as ``(country, from, to)`` with
    ``None`` for an open end.  Without spans every member counts in every period.
    """

    members: frozenset
    label: str = "EU"
    spans: tuple = ()

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("EU membership must be nonempty")
        if self.label in self.members:
            raise ValueError(f"aggregate label {self.label!r} collides with a member code")

    @classmethod
    def default(cls) -> "EuMembership":
        return cls(EU28)

    def members_at(self, period: YearMonth) -> frozenset:
        if not self.spans:
            return self.members
        return frozenset(
            c
            for c, start, end in self.spans
            if (start is None or start <= period) and (end is None or period <= end)
        )


def load_eu_membership(stream, label: str = "EU") -> EuMembership:
    """Read a ``country,member_from,member_to`` file; blank dates are open-ended."""
    spans = []
    for lineno, row in enumerate(csv.DictReader(_text(stream)), start=2):
        try:
            country = row["country"].strip()
            start = _opt_period(row.get("member_from"))
            end = _opt_period(row.get("member_to"))
        except (KeyError, ValueError) as exc:
            raise FormatError(f"EU membership line {lineno}: {exc}") from exc
        if start is not None and end is not None and end < start:
            raise FormatError(f"EU membership line {lineno}: member_to before member_from")
        spans.append((country, start, end))
    return EuMembership(frozenset(c for c, _, _ in spans), label=label, spans=tuple(spans))


# -- parsing ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RowDiagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class ParseResult:
    records: list = field(default_factory=list)
    errors: list = field(default_factory=list)


_FLOW_BY_NAME = {f.value: f for f in FlowType}


def _remember(known: set, code: str) -> bool:
    if COUNTRY_RE.match(code):
        known.add(code)
        return True
    return False


def parse_trade_records(stream, delimiter: str = ",", max_bad_fraction: float = 0.5) -> ParseResult:
    """Parse a trade-flow file into ``TradeRecord`` objects.

    Malformed rows are skipped and reported in ``ParseResult.errors`` with
    their 1-based line numbers.  If more than ``max_bad_fraction`` of the data
    rows are malformed the whole file is rejected with ``FormatError``.
    """
    reader = csv.reader(_text(stream), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("trade-flow file is empty (no header row)") from None
    header = [h.strip().lower() for h in header]
    missing = [c for c in TRADE_COLUMNS if c not in header]
    if missing:
        raise FormatError(f"trade-flow header lacks columns: {', '.join(missing)}")
    pos = [header.index(c) for c in TRADE_COLUMNS]

    result = ParseResult()
    known: set = set()  # country codes already validated
    n_rows = 0
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        n_rows += 1
        try:
            if len(row) < len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(row)}")
            period, reporter, partner, flow, hs6, value, qty = (row[i].strip() for i in pos)
            for code in (reporter, partner):
                if code not in known and not _remember(known, code):
                    raise ValueError(f"malformed country code {code!r}")
            ft = _FLOW_BY_NAME.get(flow) or FlowType(flow.lower())
            result.records.append(
                TradeRecord(
                    period=YearMonth.parse(period),
                    reporter=reporter,
                    partner=partner,
                    flow_type=ft,
                    hs6=hs6,
                    value=_opt_float(value),
                    quantity=_opt_float(qty),
                )
            )
        except ValueError as exc:
            result.errors.append(RowDiagnostic(lineno, str(exc)))

    if n_rows and len(result.errors) > max_bad_fraction * n_rows:
        shown = "; ".join(str(e) for e in result.errors[:5])
        raise FormatError(
            f"{len(result.errors)} of {n_rows} rows malformed ({shown}{'; ...' if len(result.errors) > 5 else ''})"
        )
    return result


# -- harmonization ----------------------------------------------------------

_FLOW_MAP = {
    FlowType.IMPORT: FlowType.IMPORT,
    FlowType.RE_IMPORT: FlowType.IMPORT,
    FlowType.EXPORT: FlowType.EXPORT,
    FlowType.RE_EXPORT: FlowType.EXPORT,
}

# Internally the stages work on plain tuples
# ``(ordinal, reporter, partner, is_export, hs6, value, quantity)`` so keys hash
# at C speed; the public functions convert at their boundaries.


def _rows(records: Iterable[TradeRecord]) -> list:
    out = []
    for r in records:
        ft = r.flow_type
        is_export = ft is FlowType.EXPORT or ft is FlowType.RE_EXPORT
        out.append((r.period.ordinal, r.reporter, r.partner, is_export, r.hs6, r.value, r.quantity))
    return out


def _fold(rows: Iterable[tuple]) -> list:
    acc = _sum_by_key(((t, rep, par, exp, hs6), v, q) for t, rep, par, exp, hs6, v, q in rows)
    return [k + vq for k, vq in acc.items()]


def _eu_rows(rows: Iterable[tuple], eu: EuMembership) -> list:
    members: dict = {}
    label = eu.label

    def relabeled():
        for t, rep, par, exp, hs6, v, q in rows:
            m = members.get(t)
            if m is None:
                m = members[t] = eu.members_at(YearMonth.from_ordinal(t))
            if rep in m:
                rep = label
            if par in m:
                par = label
            if rep != par:
                yield (t, rep, par, exp, hs6), v, q

    return [k + vq for k, vq in _sum_by_key(relabeled()).items()]


def _mirror(rows: Iterable[tuple]) -> list:
    """Rows -> sorted ``(ordinal, origin, destination, hs6, value, quantity, provenance)``."""
    acc = _sum_by_key(
        (((t, rep, par, hs6), 0) if exp else ((t, par, rep, hs6), 1), v, q) for t, rep, par, exp, hs6, v, q in rows
    )
    sides: dict = {}
    for (key, side), vq in acc.items():
        sides.setdefault(key, [None, None])[side] = vq
    out = []
    for key in sorted(sides):
        exp, imp = sides[key]
        if exp is not None and imp is not None:
            value, qty = _mean(exp[0], imp[0]), _mean(exp[1], imp[1])
            prov = Provenance.MIRROR_AVERAGED
        elif exp is not None:
            (value, qty), prov = exp, Provenance.ORIGIN_REPORTED
        else:
            (value, qty), prov = imp, Provenance.DESTINATION_REPORTED
        out.append(key + (value, qty, prov))
    return out


def _records_from_rows(rows: list) -> list[TradeRecord]:
    # "export" sorts before "import", matching the flow-type string order
    periods: dict = {}
    out = []
    for t, rep, par, exp, hs6, v, q in sorted(rows, key=lambda r: (r[0], r[1], r[2], not r[3], r[4])):
        ym = periods.get(t) or periods.setdefault(t, YearMonth.from_ordinal(t))
        out.append(TradeRecord(ym, rep, par, FlowType.EXPORT if exp else FlowType.IMPORT, hs6, v, q))
    return out


def harmonize_flow_types(records: Iterable[TradeRecord]) -> list[TradeRecord]:
    """Fold re-imports into imports and re-exports into exports, summing collisions."""
    return _records_from_rows(_fold(_rows(records)))


def aggregate_eu(records: Iterable[TradeRecord], eu: EuMembership) -> list[TradeRecord]:
    """Drop intra-EU rows and relabel members to ``eu.label``, summing collisions.

    Re-import and re-export rows are folded into imports and exports on the way.
    """
    return _records_from_rows(_eu_rows(_rows(records), eu))


def mirror_average(records: Iterable[TradeRecord]) -> list[FlowObservation]:
    """Reconcile import and export reports of the same economic flow.

    An import reported by ``R`` from ``P`` describes ``P -> R``; an export
    reported by ``R`` to ``P`` describes ``R -> P``.  When both sides report,
    value and quantity are each the mean of the present fields.
    """
    return _observations(_mirror(_rows(records)))


def _observations(rows: list) -> list[FlowObservation]:
    periods: dict = {}
    out = []
    for t, o, d, hs6, v, q, prov in rows:
        ym = periods.get(t) or periods.setdefault(t, YearMonth.from_ordinal(t))
        out.append(FlowObservation(ym, o, d, hs6, v, q, prov))
    return out


def harmonized_rows(records: Iterable[TradeRecord], eu: Optional[EuMembership] = None) -> list[tuple]:
    """``harmonize`` as sorted ``(ordinal, origin, destination, hs6, value, quantity, provenance)`` tuples."""
    staged = _fold(_rows(records))
    if eu is not None:
        staged = _eu_rows(staged, eu)
    return _mirror(staged)


def harmonize(records: Iterable[TradeRecord], eu: Optional[EuMembership] = None) -> list[FlowObservation]:
    """Full harmonization chain; ``eu=None`` skips EU aggregation."""
    return _observations(harmonized_rows(records, eu))


# -- helpers ----------------------------------------------------------------


def _text(stream) -> IO[str]:
    if isinstance(stream, (str, bytes)):
        raise TypeError("expected a file object, not a path or literal")
    if isinstance(stream, io.TextIOBase):
        return stream
    mode = getattr(stream, "mode", "")
    if isinstance(mode, str) and "b" not in mode and not isinstance(stream, (io.BufferedIOBase, io.RawIOBase)):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def _opt_float(text: str) -> Optional[float]:
    if text == "":
        return None
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite number {text!r}")
    if v < 0:
        raise ValueError(f"negative amount {text!r}")
    return v


def _opt_period(text) -> Optional[YearMonth]:
    text = (text or "").strip()
    return YearMonth.parse(text) if text else None


def _mean(a: Optional[float], b: Optional[float]) -> Optional[float]:
    if a is None:
        return b
    if b is None:
        return a
    return (a + b) / 2.0


def _sum_by_key(items: Iterable[tuple]) -> dict:
    """Sum ``(key, value, quantity)`` items per key, ignoring ``None`` fields.

    Only colliding keys are summed; fsum is exactly rounded, so the result does
    not depend on input order.
    """
    acc: dict = {}
    clash: dict = {}
    for key, v, q in items:
        if key in acc:
            clash.setdefault(key, [acc[key]]).append((v, q))
        else:
            acc[key] = (v, q)
    for key, pairs in clash.items():
        acc[key] = (_fsum_present(p[0] for p in pairs), _fsum_present(p[1] for p in pairs))
    return acc


def _fsum_present(xs) -> Optional[float]:
    present = [x for x in xs if x is not None]
    return math.fsum(present) if present else None
