"""Command-line entry point: ``reroute <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from .controls import DEFAULT_MISSING_THRESHOLD, select_controls
from .detect import ALPHAS, Spec
from .errors import RerouteError
from .evaluate import confusion_matrix, write_confusion
from .graph import build_network, network_stats, write_network
from .index import PathStatistic, route_series, standardize_series
from .ingest import EuMembership, harmonized_rows, load_eu_membership, parse_trade_records
from .periods import YearMonth, month_range
from .pipeline import (
    RunConfig,
    detect_flows,
    load_flows,
    load_focal,
    read_detections,
    run_pipeline,
    write_detections,
)
from .registry import load_registry
from .synth import generate, load_scenario_config
from .table import FlowTable

log = logging.getLogger("reroute")


def _open_out(path: Optional[str]):
    if path in (None, "-"):
        return _Stdout()
    return open(path, "w", newline="", encoding="utf-8")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()


def _periods(args, table: FlowTable):
    start, end = table.period_span()
    return month_range(args.start or start, args.end or end)


def _registry(args, periods):
    with open(args.duties, newline="", encoding="utf-8") as fh:
        return load_registry(fh, sample=(periods[0], periods[-1]))


def cmd_ingest(args) -> int:
    with open(args.flows, "rb") as fh:
        parsed = parse_trade_records(fh, args.delimiter)
    for diag in parsed.errors:
        log.warning("%s: %s", args.flows, diag)
    eu = EuMembership.default()
    if args.eu:
        with open(args.eu, newline="", encoding="utf-8") as fh:
            eu = load_eu_membership(fh)
    table = FlowTable.from_rows(harmonized_rows(parsed.records, eu))
    with _open_out(args.output) as out:
        table.write_csv(out)
    log.info("%d records -> %d flows (%d rejected rows)", len(parsed.records), len(table), len(parsed.errors))
    return 0


def cmd_export_network(args) -> int:
    table = load_flows(args.flows, args.eu)
    net = build_network(table, args.product, args.period)
    with _open_out(args.output) as out:
        write_network(net, out)
    stats = network_stats(net)
    log.info("%s %s: %d nodes, %d edges", args.product, args.period, stats.node_count, stats.edge_count)
    return 0


def cmd_index(args) -> int:
    table = load_flows(args.flows, args.eu)
    periods = _periods(args, table)
    series = route_series(table, args.exporter, args.importer, args.statistic, periods, [args.product])[args.product]
    values = standardize_series(series.values) if args.standardize else np.asarray(series.values)
    with _open_out(args.output) as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("period", "index_value"))
        for p, v in zip(series.periods, values.tolist()):
            w.writerow((p, "" if v != v else f"{v:.17g}"))
    return 0


def cmd_controls(args) -> int:
    table = load_flows(args.flows, args.eu)
    periods = _periods(args, table)
    registry = _registry(args, periods)
    series = route_series(table, args.exporter, args.importer, args.statistic, periods)
    focal = series.get(args.product)
    if focal is None:
        raise RerouteError(f"product {args.product} absent from the flow data")
    panel = select_controls(focal, [s for c, s in series.items() if c != args.product], registry, args.missing_threshold)
    with _open_out(args.output) as out:
        out.write(f"C_p={panel.n_controls}\n")
        for code in panel.control_products:
            out.write(code + "\n")
    return 0


def cmd_detect(args) -> int:
    table = load_flows(args.flows, args.eu)
    periods = _periods(args, table)
    registry = _registry(args, periods)
    results = detect_flows(
        table,
        registry,
        load_focal(args.focal),
        statistic=args.statistic,
        spec=args.spec,
        periods=periods,
        missing_threshold=args.missing_threshold,
        one_sided=args.one_sided,
        zero_policy=args.zeros,
        threads=args.threads,
    )
    with _open_out(args.output) as out:
        write_detections(results, out, [args.alpha])
    return 0


def cmd_evaluate(args) -> int:
    with open(args.detections, newline="", encoding="utf-8") as fh:
        flags = read_detections(fh)
    with open(args.labels, newline="", encoding="utf-8") as lf:
        registry = load_registry(None, lf)
    labels = {(f.product, f.exporter): registry.label(f.product, f.exporter, args.level) for f in flags}
    matrices = [confusion_matrix(flags, labels, a) for a in args.alpha]
    for cm in matrices:
        print(cm.format())
        print()
    if args.output:
        with _open_out(args.output) as out:
            write_confusion(matrices, out)
    return 0


def cmd_simulate(args) -> int:
    config = load_scenario_config(args.config)
    scenario = generate(config, workers=args.threads)
    paths = scenario.write(args.out_dir)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


def cmd_run(args) -> int:
    config = RunConfig(
        flows=args.flows,
        duties=args.duties,
        labels=args.labels,
        focal=args.focal,
        out_dir=args.out_dir,
        eu=args.eu,
        start=args.start,
        end=args.end,
        statistic=args.statistic,
        spec=args.spec,
        alphas=tuple(args.alpha),
        missing_threshold=args.missing_threshold,
        one_sided=args.one_sided,
        zero_policy=args.zeros,
        label_level=args.level,
        threads=args.threads,
    )
    output = run_pipeline(config)
    for cm in output.matrices:
        print(cm.format())
        print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reroute", description=__doc__)
    parser.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def flows_arg(p):
        p.add_argument("flows", help="trade-flow file (raw or harmonized)")
        p.add_argument("--eu", help="EU membership file (country,member_from,member_to)")

    def window_args(p):
        p.add_argument("--start", type=YearMonth.parse, help="first month of the sample (YYYY-MM)")
        p.add_argument("--end", type=YearMonth.parse, help="last month of the sample (YYYY-MM)")

    def stat_arg(p):
        p.add_argument("--statistic", type=PathStatistic, default=PathStatistic.VALUE_SUM,
                       choices=list(PathStatistic), metavar="{value,quantity,last-leg}")

    def model_args(p):
        p.add_argument("--spec", type=Spec.parse, default=Spec.STANDARDIZED, metavar="{log,standardized}")
        p.add_argument("--missing-threshold", type=float, default=DEFAULT_MISSING_THRESHOLD)
        p.add_argument("--one-sided", action="store_true", help="test beta > 0 instead of beta != 0")
        p.add_argument("--zeros", choices=("error", "drop"), default="error",
                       help="zero index values under a log transform: fail, or treat as missing")

    p = sub.add_parser("ingest", help="harmonize a raw trade-flow file")
    p.add_argument("flows")
    p.add_argument("--eu")
    p.add_argument("--delimiter", default=",")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("export-network", help="write one product-month network as an edge list")
    flows_arg(p)
    p.add_argument("--product", required=True)
    p.add_argument("--period", required=True, type=YearMonth.parse)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_network)

    p = sub.add_parser("index", help="monthly circumvention index of one route")
    flows_arg(p)
    window_args(p)
    stat_arg(p)
    p.add_argument("--product", required=True)
    p.add_argument("--exporter", required=True)
    p.add_argument("--importer", required=True)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("controls", help="list the control products of a focal flow")
    flows_arg(p)
    window_args(p)
    stat_arg(p)
    p.add_argument("--duties", required=True)
    p.add_argument("--product", required=True)
    p.add_argument("--exporter", required=True)
    p.add_argument("--importer", required=True)
    p.add_argument("--missing-threshold", type=float, default=DEFAULT_MISSING_THRESHOLD)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_controls)

    p = sub.add_parser("detect", help="fit the panel test for each focal flow")
    flows_arg(p)
    window_args(p)
    stat_arg(p)
    model_args(p)
    p.add_argument("--duties", required=True)
    p.add_argument("--focal", required=True, help="file with product,exporter,importer rows")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="confusion matrices of a detection table against labels")
    p.add_argument("detections")
    p.add_argument("--labels", required=True)
    p.add_argument("--alpha", type=float, nargs="+", default=list(ALPHAS))
    p.add_argument("--level", choices=("flow", "product"), default="flow")
    p.add_argument("-o", "--output", help="write alpha,tp,fp,fn,tn,recall rows here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("config", help="INI scenario file")
    p.add_argument("-o", "--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="full pipeline with confusion matrices and a run manifest")
    p.add_argument("--flows", required=True)
    p.add_argument("--eu")
    p.add_argument("--duties", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--focal", required=True)
    p.add_argument("-o", "--out-dir", required=True)
    window_args(p)
    stat_arg(p)
    model_args(p)
    p.add_argument("--alpha", type=float, nargs="+", default=list(ALPHAS))
    p.add_argument("--level", choices=("flow", "product"), default="flow")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (RerouteError, OSError, ValueError) as exc:
        print(f"reroute {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
