"""Command-line entry point: ``scpolicy <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from scpolicy.errors import ScPolicyError
from scpolicy.metrics import METRIC_LABELS, MetricReport, PathMode, metric_report
from scpolicy.policies import SelectionStrategy


def _path_mode(text: str) -> PathMode:
    try:
        return PathMode.parse(text)
    except ScPolicyError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _selection(text: str) -> SelectionStrategy:
    try:
        return SelectionStrategy.parse(text)
    except ScPolicyError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _add_network_args(p: argparse.ArgumentParser):
    p.add_argument("network", nargs="?", help="directory holding firms.csv, products.csv, edges.csv")
    p.add_argument("--firms")
    p.add_argument("--products")
    p.add_argument("--edges")


def _network_files(args) -> tuple[str, str, str]:
    if args.network:
        d = Path(args.network)
        return str(d / "firms.csv"), str(d / "products.csv"), str(d / "edges.csv")
    if args.firms and args.products and args.edges:
        return args.firms, args.products, args.edges
    raise ScPolicyError("give a network directory or all of --firms, --products, --edges")


def _print_table(columns: list[tuple[str, MetricReport]], out=None):
    from scpolicy.dataio import fmt

    out = out or sys.stdout

    width = max(len(v) for v in METRIC_LABELS.values())
    print(f"{'metric':<{width}}  " + "  ".join(label for label, _ in columns), file=out)
    for name in MetricReport.field_names():
        cells = "  ".join(fmt(getattr(r, name)) for _, r in columns)
        print(f"{METRIC_LABELS[name]:<{width}}  {cells}", file=out)


# -- subcommands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    from scpolicy.dataio import export_tables
    from scpolicy.synth import GeneratorConfig, calibrate_check, generate

    cfg = GeneratorConfig.load(args.config) if args.config else GeneratorConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    net = generate(cfg)
    out = Path(args.out)
    export_tables(net, out)
    (out / "generator.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {net.firm_count} firms, {len(net.products)} products, {net.edge_count} edges to {out}")
    if args.calibrate:
        cal = calibrate_check(net, seed=cfg.seed, path_mode=args.path_mode)
        for name, row in cal.rows.items():
            mark = "ok" if row.within_tolerance else "MISS"
            print(f"  {name:<30} target {row.target:<8} achieved {row.achieved!r:<22} {mark}")
        return 0 if cal.ok else 1
    return 0


def cmd_metrics(args) -> int:
    from scpolicy.dataio import load_tables, write_metric_table

    net, report = load_tables(*_network_files(args))
    if report.rows_rejected:
        print(f"warning: {report.rows_rejected} row(s) rejected; run `validate` for details", file=sys.stderr)
    mr = metric_report(net, seed=args.seed, path_mode=args.path_mode)
    _print_table([("network", mr)])
    if args.out:
        path = write_metric_table([("network", mr)], Path(args.out) / "metric_table.csv")
        print(f"wrote {path}")
    return 0


def cmd_simulate(args) -> int:
    from scpolicy.orchestrator import (
        NetworkSource,
        load_scenarios,
        run_suite,
        standard_suite,
        write_results,
    )
    from scpolicy.synth import GeneratorConfig

    if args.scenario:
        scenarios = load_scenarios(args.scenario)
    elif args.suite == "standard":
        if args.network:
            d = Path(args.network)
            source = NetworkSource(files=tuple(str(d / f"{t}.csv") for t in ("firms", "products", "edges")))
        elif args.config:
            source = NetworkSource(generator=GeneratorConfig.load(args.config))
        else:
            source = NetworkSource(generator=GeneratorConfig())
        scenarios = standard_suite(source)
    else:
        raise ScPolicyError("give a scenario file or --suite standard")

    overrides = {}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.selection is not None:
        overrides["selection"] = args.selection
    if args.path_mode is not None:
        overrides["path_mode"] = args.path_mode
    scenarios = [dataclasses.replace(sc, **overrides) for sc in scenarios]

    results = run_suite(scenarios, workers=args.workers)
    write_results(results, args.out)
    failed = 0
    for r in results:
        if hasattr(r, "error"):
            failed += 1
            print(f"FAILED {r.name}: {r.error}", file=sys.stderr)
        else:
            print(f"{r.name}: NS products {r.mean_ns_products:g}, NS companies {r.mean_ns_companies:g}")
    print(f"reports written to {args.out}")
    return 1 if failed else 0


def cmd_scopes(args) -> int:
    from scpolicy.scopes import builtin_scopes, load_scopes

    scopes = load_scopes(args.validate or args.file) if (args.validate or args.file) else builtin_scopes()
    if args.validate:
        print(f"{args.validate}: ok ({scopes.kind}, {len(scopes.clusters)} clusters)")
    if args.list or not args.validate:
        for name, cluster in scopes.clusters.items():
            print(f"{name}\t{len(cluster)}")
    return 0


def cmd_validate(args) -> int:
    from scpolicy.dataio import load_tables

    net, report = load_tables(*_network_files(args))
    for table, stats in report.tables.items():
        print(f"{table}: read {stats.rows_read}, accepted {stats.rows_accepted}, rejected {stats.rows_rejected}")
    for table, line, reason in report.reject_reasons:
        print(f"  {table}:{line}: {reason}")
    print(f"network: {net.firm_count} firms, {len(net.products)} products, {net.edge_count} edges, "
          f"{report.duplicate_edges} duplicate edge row(s) merged")
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 1 if args.strict and report.rows_rejected else 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scpolicy", description="Supply-chain reshoring/friendshoring simulator")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", help="generate a synthetic network and write its tables")
    p.add_argument("--config", help="generator YAML")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--calibrate", action="store_true", help="check the result against the reference targets")
    p.add_argument("--path-mode", type=_path_mode, default=PathMode(200))
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("metrics", help="compute the metric table of a network")
    _add_network_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--path-mode", type=_path_mode, default=PathMode())
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="run policy scenarios and write all reports")
    p.add_argument("scenario", nargs="?", help="scenario YAML")
    p.add_argument("--suite", choices=["standard"], help="the 5 clusters x 3 policies grid")
    p.add_argument("--network", help="network directory for --suite")
    p.add_argument("--config", help="generator YAML for --suite")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--iterations", type=_positive)
    p.add_argument("--selection", type=_selection)
    p.add_argument("--path-mode", type=_path_mode)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scopes", help="list or validate country clusters")
    p.add_argument("--list", action="store_true")
    p.add_argument("--file", help="scope document to list instead of the builtin set")
    p.add_argument("--validate", metavar="FILE")
    p.set_defaults(func=cmd_scopes)

    p = sub.add_parser("validate", help="ingest tables and report rejected rows")
    _add_network_args(p)
    p.add_argument("--json", help="also write the ingest report as JSON")
    p.add_argument("--strict", action="store_true", help="exit 1 when any row is rejected")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScPolicyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
