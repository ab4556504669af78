"""Synthetic trade networks with injectable re-routing episodes.

Every (product, month) network draws from its own generator seeded by
``(seed, hs6, month)``, so a network never depends on how many other products
or months are generated, or in which order.  Injections are applied after the
baseline draw and only rescale existing edges.
"""

from __future__ import annotations

import configparser
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ingest import COUNTRY_RE, HS6_RE
from .periods import YearMonth, as_period
from .registry import DutyWindow, InvestigationLabel, write_duties, write_labels
from .table import FlowTable


@dataclass(frozen=True)
class Injection:
    """Re-routing of ``product`` from ``exporter`` to ``importer`` through ``via`` during [start, end]."""

    product: str
    exporter: str
    importer: str
    via: tuple
    start: YearMonth
    end: YearMonth
    magnitude: float = 4.0
    direct_suppression: float = 1.0

    def __post_init__(self) -> None:
        if set(self.via) & {self.exporter, self.importer}:
            raise ValueError("via countries must differ from exporter and importer")
        if self.exporter == self.importer:
            raise ValueError("exporter equals importer")
        if self.magnitude < 1:
            raise ValueError(f"magnitude must be >= 1, got {self.magnitude}")
        if not 0 <= self.direct_suppression <= 1:
            raise ValueError(f"direct_suppression must lie in [0, 1], got {self.direct_suppression}")
        if self.end < self.start:
            raise ValueError("injection window ends before it starts")

    @property
    def window(self) -> DutyWindow:
        return DutyWindow(self.product, self.exporter, self.importer, self.start, self.end)


@dataclass(frozen=True)
class Decoy:
    """A duty with no re-routing response: emits a window and a negative label only."""

    product: str
    exporter: str
    importer: str
    start: YearMonth
    end: YearMonth

    @property
    def window(self) -> DutyWindow:
        return DutyWindow(self.product, self.exporter, self.importer, self.start, self.end)


@dataclass(frozen=True)
class ScenarioConfig:
    n_countries: int = 20
    n_products: int = 130
    n_periods: int = 72
    start: YearMonth = YearMonth(2010, 1)
    location: float = 10.0
    scale: float = 0.5
    edge_density: float = 0.3
    seed: int = 0
    injections: tuple = ()
    decoys: tuple = ()
    countries: Optional[tuple] = None

    def __post_init__(self) -> None:
        if self.n_countries < 3 or self.n_products < 0 or self.n_periods < 12:
            raise ValueError("need n_countries >= 3, n_products >= 0 and n_periods >= 12")
        if not 0 < self.edge_density <= 1:
            raise ValueError(f"edge_density must lie in (0, 1], got {self.edge_density}")
        if self.scale < 0:
            raise ValueError("log-normal scale must be nonnegative")
        codes = self.country_codes
        if len(codes) != self.n_countries or len(set(codes)) != len(codes):
            raise ValueError("countries must be n_countries distinct codes")
        for c in codes:
            if not COUNTRY_RE.match(c):
                raise ValueError(f"malformed country code {c!r}")
        end = self.end
        for ev in tuple(self.injections) + tuple(self.decoys):
            if not HS6_RE.match(ev.product):
                raise ValueError(f"malformed product code {ev.product!r}")
            used = {ev.exporter, ev.importer} | set(getattr(ev, "via", ()))
            if used - set(codes):
                raise ValueError(f"unknown countries {sorted(used - set(codes))} in {ev.product}")
            if ev.start < self.start or end < ev.end:
                raise ValueError(f"window of {ev.product} lies outside the sample")

    @property
    def end(self) -> YearMonth:
        return self.start + (self.n_periods - 1)

    @property
    def country_codes(self) -> tuple:
        if self.countries is not None:
            return tuple(sorted(self.countries))
        return tuple(f"C{k:02d}" for k in range(self.n_countries))

    @property
    def product_codes(self) -> tuple:
        # background products spread over chapters 10-59
        base = {f"{10 + k % 50:02d}{k // 50:04d}" for k in range(self.n_products)}
        extra = {ev.product for ev in tuple(self.injections) + tuple(self.decoys)}
        return tuple(sorted(base | extra))


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    flows: FlowTable
    injections: tuple
    windows: tuple
    labels: tuple

    @property
    def focal_keys(self) -> list:
        return sorted(w.key for w in self.windows)

    def write(self, out_dir: str) -> dict:
        """Write ``flows.csv`` (importer-reported records), ``duties.csv``, ``labels.csv`` and ``focal.csv``."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {name: os.path.join(out_dir, f"{name}.csv") for name in ("flows", "duties", "labels", "focal")}
        write_trade_records(self.flows, paths["flows"])
        with open(paths["duties"], "w", newline="") as fh:
            write_duties(self.windows, fh)
        with open(paths["labels"], "w", newline="") as fh:
            write_labels(self.labels, fh)
        with open(paths["focal"], "w", newline="") as fh:
            fh.write("product,exporter,importer\n")
            for key in self.focal_keys:
                fh.write(",".join(key) + "\n")
        return paths


def write_trade_records(table: FlowTable, path: str) -> None:
    """Write flows as destination-side import records in the raw trade-flow format."""
    periods = {t: str(YearMonth.from_ordinal(t)) for t in np.unique(table.period).tolist()}
    with open(path, "w", newline="") as fh:
        fh.write("period,reporter,partner,flow_type,hs6,value_usd,quantity_kg\n")
        for t, o, d, p, v, q in zip(
            table.period.tolist(),
            table.origin.tolist(),
            table.destination.tolist(),
            table.product.tolist(),
            table.value.tolist(),
            table.quantity.tolist(),
        ):
            fh.write(
                f"{periods[t]},{table.countries[d]},{table.countries[o]},import,{table.products[p]},{v!r},{q!r}\n"
            )


def _network_draw(config: ScenarioConfig, hs6: str, ordinal: int, n: int, pair_src, pair_dst):
    rng = np.random.default_rng([config.seed, int(hs6), ordinal])
    u = rng.random(len(pair_src))
    value = rng.lognormal(config.location, config.scale, len(pair_src))
    unit_price = rng.lognormal(1.0, 0.25, len(pair_src))
    keep = u < config.edge_density
    return keep, value, value / unit_price


def generate(config: ScenarioConfig, workers: int = 1) -> Scenario:
    """Draw the scenario.  ``workers > 1`` generates products in parallel with identical output."""
    codes = config.country_codes
    cidx = {c: k for k, c in enumerate(codes)}
    n = len(codes)
    src, dst = np.nonzero(~np.eye(n, dtype=bool))  # row-major: sorted (origin, destination)
    src = src.astype(np.int32)
    dst = dst.astype(np.int32)
    products = config.product_codes
    ordinals = range(config.start.ordinal, config.start.ordinal + config.n_periods)

    by_product: dict = {}
    for inj in config.injections:
        by_product.setdefault(inj.product, []).append(inj)

    def one_product(pi: int):
        hs6 = products[pi]
        parts = []
        for t in ordinals:
            keep, value, qty = _network_draw(config, hs6, t, n, src, dst)
            for inj in by_product.get(hs6, ()):
                if inj.start.ordinal <= t <= inj.end.ordinal:
                    j, i = cidx[inj.exporter], cidx[inj.importer]
                    via = [cidx[k] for k in inj.via]
                    legs = ((src == j) & np.isin(dst, via)) | (np.isin(src, via) & (dst == i))
                    value = np.where(legs, value * inj.magnitude, value)
                    qty = np.where(legs, qty * inj.magnitude, qty)
                    direct = (src == j) & (dst == i)
                    value = np.where(direct, value * inj.direct_suppression, value)
                    qty = np.where(direct, qty * inj.direct_suppression, qty)
            rows = np.flatnonzero(keep)
            parts.append((np.full(len(rows), t), src[rows], dst[rows], np.full(len(rows), pi), value[rows], qty[rows]))
        return parts

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(one_product, range(len(products))))
    else:
        chunks = [one_product(pi) for pi in range(len(products))]
    parts = [p for chunk in chunks for p in chunk]
    cols = [np.concatenate([p[c] for p in parts]) if parts else np.empty(0) for c in range(6)]
    flows = FlowTable.from_arrays(codes, products, *cols)

    windows = [inj.window for inj in config.injections] + [d.window for d in config.decoys]
    labels = [InvestigationLabel(inj.product, inj.exporter, True, inj.start) for inj in config.injections] + [
        InvestigationLabel(d.product, d.exporter, False) for d in config.decoys
    ]
    return Scenario(config, flows, tuple(config.injections), tuple(windows), tuple(labels))


# -- config files -------------------------------------------------------------

_SCALARS = {
    "n_countries": int,
    "n_products": int,
    "n_periods": int,
    "start": YearMonth.parse,
    "location": float,
    "scale": float,
    "edge_density": float,
    "seed": int,
}


def load_scenario_config(path: str) -> ScenarioConfig:
    """Read an INI-style scenario file.

    ``[scenario]`` holds scalar keys; each ``[injection.NAME]`` section has
    ``product, exporter, importer, via`` (space or comma separated),
    ``start, end, magnitude, direct_suppression``; each ``[decoy.NAME]``
    section has ``product, exporter, importer, start, end``.
    """
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    kwargs: dict = {}
    if cp.has_section("scenario"):
        sec = cp["scenario"]
        for key, value in sec.items():
            if key == "countries":
                kwargs["countries"] = tuple(value.replace(",", " ").split())
            elif key in _SCALARS:
                kwargs[key] = _SCALARS[key](value)
            else:
                raise ValueError(f"unknown scenario key {key!r}")
    injections, decoys = [], []
    for name in cp.sections():
        sec = cp[name]
        if name.startswith("injection"):
            injections.append(
                Injection(
                    sec["product"],
                    sec["exporter"],
                    sec["importer"],
                    tuple(sec["via"].replace(",", " ").split()),
                    as_period(sec["start"]),
                    as_period(sec["end"]),
                    float(sec.get("magnitude", "4")),
                    float(sec.get("direct_suppression", "1")),
                )
            )
        elif name.startswith("decoy"):
            decoys.append(
                Decoy(sec["product"], sec["exporter"], sec["importer"], as_period(sec["start"]), as_period(sec["end"]))
            )
        elif name != "scenario":
            raise ValueError(f"unknown section [{name}]")
    return ScenarioConfig(injections=tuple(injections), decoys=tuple(decoys), **kwargs)
