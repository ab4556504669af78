"""End-to-end composition: flows -> index series -> controls -> fits -> scores."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

from . import __version__, kernels
from .controls import DEFAULT_MISSING_THRESHOLD, ControlPanel, select_controls
from .detect import ALPHAS, DetectionFlag, FEFit, Spec, build_panel, detect, fit_fixed_effects
from .errors import FlowError, FormatError, PreconditionError, RerouteError
from .evaluate import ConfusionMatrix, confusion_matrix, labels_for, write_confusion
from .index import PathStatistic, route_series
from .ingest import EuMembership, harmonized_rows, load_eu_membership, parse_trade_records
from .periods import YearMonth, month_range
from .registry import AdRegistry, load_registry
from .table import FlowTable, read_flow_table

DETECTION_COLUMNS = ("product", "exporter", "importer", "beta", "se", "t", "p", "detected")


@dataclass(frozen=True)
class FlowResult:
    key: tuple
    fit: FEFit
    n_controls: int

    def flag(self, alpha: float) -> DetectionFlag:
        return detect(self.fit, alpha, self.key)


def detect_flows(
    table: FlowTable,
    registry: AdRegistry,
    focal_keys: Iterable[tuple],
    *,
    statistic=PathStatistic.VALUE_SUM,
    spec=Spec.STANDARDIZED,
    periods: Optional[Sequence[YearMonth]] = None,
    missing_threshold: float = DEFAULT_MISSING_THRESHOLD,
    one_sided: bool = False,
    standardize_log: bool = True,
    zero_policy: str = "error",
    threads: int = 1,
) -> list[FlowResult]:
    """Fit every focal flow against its control panel; results are sorted by key.

    Any per-flow failure is raised as ``FlowError`` naming the flow.
    """
    keys = sorted(set(tuple(k) for k in focal_keys))
    if periods is None:
        periods = month_range(*table.period_span())
    periods = tuple(periods)
    routes = {}
    for _, exporter, importer in keys:
        if (exporter, importer) not in routes:
            routes[(exporter, importer)] = route_series(table, exporter, importer, statistic, periods)

    def one(key):
        product, exporter, importer = key
        try:
            window = registry.window(*key)
            if window is None:
                raise PreconditionError("no duty window in the registry")
            series = routes[(exporter, importer)]
            focal = series.get(product)
            if focal is None:
                raise PreconditionError("product absent from the flow data")
            universe = [s for code, s in series.items() if code != product]
            panel: ControlPanel = select_controls(focal, universe, registry, missing_threshold)
            data = build_panel(panel, window, spec, standardize_log=standardize_log, zero_policy=zero_policy)
            return FlowResult(key, fit_fixed_effects(data, one_sided=one_sided), panel.n_controls)
        except RerouteError as exc:
            raise FlowError(key, exc) from exc
        except ValueError as exc:
            raise FlowError(key, exc) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, keys))
    return [one(k) for k in keys]


# -- file helpers ---------------------------------------------------------------


def load_flows(path: str, eu_path: Optional[str] = None, delimiter: str = ",") -> FlowTable:
    """Load either a raw trade-flow file or a harmonized flows file (sniffed from the header)."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = fh.readline()
        fh.seek(0)
        cols = [c.strip().lower() for c in header.split(delimiter)]
        if "origin" in cols and "destination" in cols:
            return read_flow_table(fh, delimiter)
        parsed = parse_trade_records(fh, delimiter)
    eu = EuMembership.default()
    if eu_path:
        with open(eu_path, newline="", encoding="utf-8") as fh:
            eu = load_eu_membership(fh)
    return FlowTable.from_rows(harmonized_rows(parsed.records, eu))


def load_focal(path: str) -> list[tuple]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        try:
            return [(r["product"].strip(), r["exporter"].strip(), r["importer"].strip()) for r in reader]
        except KeyError as exc:
            raise FormatError(f"{path}: focal file needs product,exporter,importer columns") from exc


def _g(x: float) -> str:
    return f"{x:.17g}"


def write_detections(results: Sequence[FlowResult], stream, alphas: Sequence[float]) -> None:
    """One row per flow; a single alpha gives a ``detected`` column, several give ``detected_<alpha>``."""
    w = csv.writer(stream, lineterminator="\n")
    if len(alphas) == 1:
        det_cols = ["detected"]
    else:
        det_cols = [f"detected_{a:g}" for a in alphas]
    w.writerow(list(DETECTION_COLUMNS[:-1]) + ["dof", "n_controls"] + det_cols)
    for r in results:
        f = r.fit
        w.writerow(
            list(r.key)
            + [_g(f.beta_hat), _g(f.se), _g(f.t_stat), _g(f.p_value), f.dof, r.n_controls]
            + [int(f.p_value < a) for a in alphas]
        )


def read_detections(stream) -> list[DetectionFlag]:
    """Rebuild flags (with p-values) from a detection table."""
    flags = []
    for row in csv.DictReader(stream):
        p = float(row["p"])
        fit = FEFit(
            float(row["beta"]), float(row["se"]), float(row["t"]), p,
            int(row.get("dof") or 1), 0, 0, Spec.STANDARDIZED,
        )
        key = (row["product"], row["exporter"], row["importer"])
        flags.append(DetectionFlag(*key, alpha=1.0, detected=p < 1.0, fit=fit))
    return flags


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- full run -------------------------------------------------------------------


@dataclass
class RunConfig:
    flows: str
    duties: str
    labels: str
    focal: str
    out_dir: str
    eu: Optional[str] = None
    start: Optional[YearMonth] = None
    end: Optional[YearMonth] = None
    statistic: PathStatistic = PathStatistic.VALUE_SUM
    spec: Spec = Spec.STANDARDIZED
    alphas: tuple = ALPHAS
    missing_threshold: float = DEFAULT_MISSING_THRESHOLD
    one_sided: bool = False
    zero_policy: str = "error"
    label_level: str = "flow"
    threads: int = 1

    def __post_init__(self) -> None:
        if self.start is not None and self.end is not None and self.end < self.start:
            raise ValueError("sample end precedes start")
        for a in self.alphas:
            if not 0 < a < 0.5:
                raise ValueError(f"alpha must lie in (0, 0.5), got {a}")

    def echo(self) -> dict:
        d = asdict(self)
        d["start"] = str(self.start) if self.start else None
        d["end"] = str(self.end) if self.end else None
        d["statistic"] = PathStatistic(self.statistic).value
        d["spec"] = Spec.parse(self.spec).value
        d["alphas"] = list(self.alphas)
        return d


@dataclass
class RunOutput:
    results: list
    matrices: list
    paths: dict = field(default_factory=dict)


def run_pipeline(config: RunConfig) -> RunOutput:
    for name in ("flows", "duties", "labels", "focal") + (("eu",) if config.eu else ()):
        path = getattr(config, name)
        if not os.path.isfile(path):
            raise FileNotFoundError(f"{name} file not found: {path}")
    table = load_flows(config.flows, config.eu)
    start, end = table.period_span()
    start = config.start or start
    end = config.end or end
    with open(config.duties, newline="", encoding="utf-8") as d, open(config.labels, newline="", encoding="utf-8") as lf:
        registry = load_registry(d, lf, sample=(start, end))
    keys = load_focal(config.focal)
    results = detect_flows(
        table,
        registry,
        keys,
        statistic=config.statistic,
        spec=config.spec,
        periods=month_range(start, end),
        missing_threshold=config.missing_threshold,
        one_sided=config.one_sided,
        zero_policy=config.zero_policy,
        threads=config.threads,
    )
    flags = [r.flag(1.0) for r in results]
    labels = labels_for(flags, registry, config.label_level)
    matrices = [confusion_matrix(flags, labels, a) for a in config.alphas]

    os.makedirs(config.out_dir, exist_ok=True)
    paths = {
        "detections": os.path.join(config.out_dir, "detections.csv"),
        "confusion": os.path.join(config.out_dir, "confusion.csv"),
        "confusion_text": os.path.join(config.out_dir, "confusion.txt"),
        "manifest": os.path.join(config.out_dir, "manifest.json"),
    }
    with open(paths["detections"], "w", newline="") as fh:
        write_detections(results, fh, config.alphas)
    with open(paths["confusion"], "w", newline="") as fh:
        write_confusion(matrices, fh)
    with open(paths["confusion_text"], "w") as fh:
        fh.write("\n\n".join(cm.format() for cm in matrices) + "\n")
    inputs = {n: getattr(config, n) for n in ("flows", "duties", "labels", "focal", "eu") if getattr(config, n)}
    manifest = {
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "config": config.echo(),
        "inputs": {n: {"path": p, "sha256": _sha256(p)} for n, p in inputs.items()},
        "sample": [str(start), str(end)],
        "n_flows": len(results),
    }
    with open(paths["manifest"], "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunOutput(results, matrices, paths)
