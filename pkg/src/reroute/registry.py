"""Anti-dumping duty windows and circumvention-investigation labels."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import FormatError, RegistryError
from .ingest import COUNTRY_RE, HS6_RE, RowDiagnostic, _text
from .periods import YearMonth

DUTY_COLUMNS = ("hs6", "exporter", "importer", "announced", "imposed", "withdrawn")
LABEL_COLUMNS = ("hs_code", "exporter", "published")


@dataclass(frozen=True)
class DutyWindow:
    product: str
    exporter: str
    importer: str
    imposed: YearMonth
    withdrawn: YearMonth
    announced: Optional[YearMonth] = None

    def __post_init__(self) -> None:
        if self.withdrawn < self.imposed:
            raise ValueError(f"withdrawn {self.withdrawn} precedes imposed {self.imposed}")
        if self.announced is not None and self.imposed < self.announced:
            raise ValueError(f"imposed {self.imposed} precedes announced {self.announced}")

    @property
    def key(self) -> tuple:
        return (self.product, self.exporter, self.importer)

    def contains(self, period: YearMonth) -> bool:
        return self.imposed <= period <= self.withdrawn


@dataclass(frozen=True)
class InvestigationLabel:
    product: str
    exporter: str
    under_investigation: bool = True
    published: Optional[YearMonth] = None

    @property
    def key(self) -> tuple:
        return (self.product, self.exporter)


@dataclass(frozen=True)
class AdEvent:
    """Any dated anti-dumping action on a flow; rows lacking a full window still mark the flow."""

    product: str
    exporter: str
    importer: str
    dates: tuple

    @property
    def key(self) -> tuple:
        return (self.product, self.exporter, self.importer)


@dataclass
class AdRegistry:
    windows: dict = field(default_factory=dict)  # (hs6, exporter, importer) -> DutyWindow
    labels: dict = field(default_factory=dict)  # (hs6, exporter) -> InvestigationLabel
    ad_touched: frozenset = frozenset()
    diagnostics: list = field(default_factory=list)

    def __post_init__(self) -> None:
        stray = set(self.windows) - set(self.ad_touched)
        if stray:
            raise RegistryError(f"duty windows missing from ad_touched: {sorted(stray)}")

    @classmethod
    def build(
        cls,
        windows: Iterable[DutyWindow] = (),
        labels: Iterable[InvestigationLabel] = (),
        events: Iterable[AdEvent] = (),
        sample: Optional[tuple] = None,
    ) -> "AdRegistry":
        """Assemble a registry; a flow is AD-touched if any of its dates falls inside ``sample``.

        With ``sample=None`` every listed flow counts as touched.
        """
        wmap: dict = {}
        for w in windows:
            if w.key in wmap and wmap[w.key] != w:
                raise RegistryError(f"conflicting duty windows for {w.key}: {wmap[w.key]} vs {w}")
            wmap[w.key] = w
        touched = set()
        all_events = list(events) + [
            AdEvent(*w.key, tuple(d for d in (w.announced, w.imposed, w.withdrawn) if d is not None))
            for w in wmap.values()
        ]
        for ev in all_events:
            if sample is None or any(sample[0] <= d <= sample[1] for d in ev.dates):
                touched.add(ev.key)
        # a window used for detection always marks its flow
        touched.update(wmap)
        lmap: dict = {}
        for lab in labels:
            prev = lmap.get(lab.key)
            if prev is None or _earlier(lab.published, prev.published):
                lmap[lab.key] = lab
        return cls(wmap, lmap, frozenset(touched))

    def window(self, product: str, exporter: str, importer: str) -> Optional[DutyWindow]:
        return self.windows.get((product, exporter, importer))

    def label(self, product: str, exporter: str, level: str = "flow") -> InvestigationLabel:
        """Investigation label at ``flow`` (hs6, exporter) or ``product`` (hs6 only) level.

        The label file lists opened investigations only; anything absent is
        returned as a negative label.
        """
        if level == "flow":
            hit = self.labels.get((product, exporter))
        elif level == "product":
            hit = next((lab for (p, _), lab in sorted(self.labels.items()) if p == product and lab.under_investigation), None)
        else:
            raise ValueError(f"unknown label level {level!r}")
        if hit is None:
            return InvestigationLabel(product, exporter, under_investigation=False)
        return InvestigationLabel(product, exporter, hit.under_investigation, hit.published)


def _earlier(a: Optional[YearMonth], b: Optional[YearMonth]) -> bool:
    if a is None:
        return False
    return b is None or a < b


def _opt_period(text: str) -> Optional[YearMonth]:
    text = (text or "").strip()
    return YearMonth.parse(text) if text else None


def load_registry(duty_file=None, label_file=None, sample: Optional[tuple] = None) -> AdRegistry:
    """Load duty and label files.

    Rows whose window is inverted are rejected into ``diagnostics``.  Label
    codes with 8 digits are truncated to HS6 and de-duplicated, keeping the
    earliest publication date.
    """
    windows, events, diagnostics = [], [], []
    reader = csv.DictReader(_text(duty_file)) if duty_file is not None else None
    missing = [c for c in DUTY_COLUMNS if reader is not None and c not in (reader.fieldnames or [])]
    if missing:
        raise FormatError(f"duty header lacks columns: {', '.join(missing)}")
    for lineno, row in enumerate(reader or (), start=2):
        try:
            product, exporter, importer = row["hs6"].strip(), row["exporter"].strip(), row["importer"].strip()
            if not HS6_RE.match(product):
                raise ValueError(f"hs6 must be 6 digits: {product!r}")
            if not (COUNTRY_RE.match(exporter) and COUNTRY_RE.match(importer)):
                raise ValueError("malformed country code")
            announced, imposed, withdrawn = (_opt_period(row[c]) for c in ("announced", "imposed", "withdrawn"))
            dates = tuple(d for d in (announced, imposed, withdrawn) if d is not None)
            if not dates:
                raise ValueError("row carries no date")
            if imposed is not None and withdrawn is not None:
                windows.append(DutyWindow(product, exporter, importer, imposed, withdrawn, announced))
            else:
                if imposed is not None and announced is not None and imposed < announced:
                    raise ValueError(f"imposed {imposed} precedes announced {announced}")
                events.append(AdEvent(product, exporter, importer, dates))
        except ValueError as exc:
            diagnostics.append(RowDiagnostic(lineno, str(exc)))

    labels = []
    if label_file is not None:
        reader = csv.DictReader(_text(label_file))
        missing = [c for c in LABEL_COLUMNS[:2] if c not in (reader.fieldnames or [])]
        if missing:
            raise FormatError(f"label header lacks columns: {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            code = row["hs_code"].strip()
            exporter = row["exporter"].strip()
            if not (code.isdigit() and len(code) in (6, 8)) or not COUNTRY_RE.match(exporter):
                raise FormatError(f"label line {lineno}: malformed hs_code or exporter")
            flag = (row.get("under_investigation") or "yes").strip().lower()
            labels.append(
                InvestigationLabel(code[:6], exporter, flag in ("yes", "true", "1"), _opt_period(row.get("published")))
            )

    reg = AdRegistry.build(windows, labels, events, sample)
    reg.diagnostics = diagnostics
    return reg


def duty_dummy(window: DutyWindow, periods: Sequence[YearMonth]) -> np.ndarray:
    """0/1 indicator of ``imposed <= t <= withdrawn`` for each period."""
    ords = np.fromiter((p.ordinal for p in periods), dtype=np.int64, count=len(periods))
    if len(ords) > 1 and np.any(np.diff(ords) <= 0):
        raise ValueError("periods must be strictly increasing")
    return ((ords >= window.imposed.ordinal) & (ords <= window.withdrawn.ordinal)).astype(np.int8)


def is_ad_free(registry: AdRegistry, product: str, exporter: str, importer: str) -> bool:
    return (product, exporter, importer) not in registry.ad_touched


def write_duties(windows: Iterable[DutyWindow], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(DUTY_COLUMNS)
    for win in sorted(windows, key=lambda x: x.key):
        w.writerow((win.product, win.exporter, win.importer, win.announced or "", win.imposed, win.withdrawn))


def write_labels(labels: Iterable[InvestigationLabel], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(LABEL_COLUMNS + ("under_investigation",))
    for lab in sorted(labels, key=lambda x: x.key):
        w.writerow((lab.product, lab.exporter, lab.published or "", "yes" if lab.under_investigation else "no"))
