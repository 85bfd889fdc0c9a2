"""Command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

from . import __version__
from .config import Config, apply_values, load_config
from .errors import DataError
from .evalreport import (DEFAULT_GRID, emit_plot_data, evaluate, split, sweep, write_report,
                         write_sweep)
from .features import label_key_columns, write_label_sidecar, write_table
from .ingest import write_pcap, write_records
from .pipeline import (balance_table, extract, load_packets, load_table, predict_table,
                       train_model, write_balanced)
from .samme import Model
from .synthgen import gen_dns, gen_tcp

log = logging.getLogger("c2traffic")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="configuration file (default: $C2TRAFFIC_CONFIG)")
    p.add_argument("--seed", type=int, help="seed for every random choice")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_boost(p: argparse.ArgumentParser) -> None:
    p.add_argument("--T", type=int, dest="T", help="boosting rounds per subset")
    p.add_argument("--eta", type=float, help="learning rate")
    p.add_argument("--max-depth", type=int, help="tree depth")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="c2traffic", description="C2 traffic feature extraction, "
                     "balancing and boosting.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate labelled synthetic traffic")
    _add_common(p)
    p.add_argument("--kind", choices=["dns", "tcp"], required=True)
    p.add_argument("--n", type=int, required=True, help="DNS groups or TCP windows")
    p.add_argument("--out", required=True, help="line-record output")
    p.add_argument("--labels", required=True, help="label sidecar output")
    p.add_argument("--pcap-out", help="also write the records as pcap")

    p = sub.add_parser("extract", help="build a feature table from packets")
    _add_common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pcap", help="pcap input")
    src.add_argument("--records", help="line-record input")
    src.add_argument("--input", help="pcap or line-record input (auto-detected)")
    p.add_argument("--kind", choices=["dns", "tcp"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="label sidecar keyed by provenance columns")
    p.add_argument("--default-label", help="label for rows the sidecar does not match")

    p = sub.add_parser("balance", help="balance a labelled feature table")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit a model")
    _add_common(p)
    _add_boost(p)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--balance", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--test-ratio", type=float, help="hold out this share for evaluation")
    p.add_argument("--test-out", help="write the held-out rows here")
    p.add_argument("--drop-feature", action="append", default=[], metavar="NAME")
    p.add_argument("--report", help="JSON report of the held-out evaluation")

    p = sub.add_parser("predict", help="label a feature table")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score a model on a labelled table")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--report", help="JSON report")
    p.add_argument("--metric", help="auto, macro or binary:<class>")

    p = sub.add_parser("sweep", help="F1 across learning rates")
    _add_common(p)
    _add_boost(p)
    p.add_argument("--features", required=True)
    p.add_argument("--test", help="held-out table (default: split --features)")
    p.add_argument("--grid", help="comma-separated learning rates")
    p.add_argument("--out", required=True)
    p.add_argument("--balance", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--drop-feature", action="append", default=[], metavar="NAME")

    p = sub.add_parser("plot-data", help="chronological series of one feature")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--feature", required=True)
    p.add_argument("--out", required=True)
    return parser


def _config(args) -> Config:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = apply_values(cfg, "run", {"seed": args.seed})
    boost = {k: getattr(args, k) for k in ("T", "eta", "max_depth")
             if getattr(args, k, None) is not None}
    if boost:
        cfg = apply_values(cfg, "boost", boost)
    if getattr(args, "test_ratio", None) is not None:
        cfg = apply_values(cfg, "run", {"test_ratio": args.test_ratio})
    if getattr(args, "metric", None):
        cfg = apply_values(cfg, "run", {"metric": args.metric})
    return cfg


def _held_out_ratio(cfg: Config) -> float:
    r = cfg.run.test_ratio
    if not 0.0 < r < 1.0:
        raise UsageError("test ratio must lie strictly between 0 and 1")
    return r


def cmd_gen(args, cfg: Config) -> None:
    if args.n < 0:
        raise UsageError("--n must be non-negative")
    if args.kind == "dns":
        gen = gen_dns(args.n, cfg.features.window, seed=cfg.run.seed)
    else:
        gen = gen_tcp(args.n, seed=cfg.run.seed, idle_timeout=cfg.features.idle_timeout)
    n = write_records(gen.records, args.out)
    write_label_sidecar(args.labels, gen.label_columns, gen.labels)
    if args.pcap_out:
        write_pcap(gen.records, args.pcap_out)
    print(f"wrote {n} records, {len(gen.labels)} labels")


def cmd_extract(args, cfg: Config) -> None:
    records = load_packets(args.pcap or args.records or args.input)
    if args.labels:
        label_key_columns(args.labels)          # fail early on a malformed sidecar
    table = extract(records, args.kind, cfg, labels_path=args.labels,
                    default_label=args.default_label)
    write_table(table, args.out)
    print(f"{len(table)} {args.kind} feature rows")


def cmd_balance(args, cfg: Config) -> None:
    table = load_table(args.features)
    subsets = balance_table(table, cfg)
    write_balanced(subsets, table.columns, args.out)
    rows = sum(len(s.y) for s in subsets)
    print(f"{len(subsets)} balanced subsets, {rows} rows")


def _print_summary(report: dict) -> None:
    print(f"F1 ({report['f1_mode']}): {report['f1']:.6f}")
    print(f"accuracy: {report['accuracy']:.6f}")
    for c, v in report["precision"].items():
        print(f"precision[{c}]: {v:.6f}")


def cmd_train(args, cfg: Config) -> None:
    table = load_table(args.features)
    if args.drop_feature:
        table = table.drop(args.drop_feature)
    test = None
    if args.test_ratio is not None:
        tr, te = split(table.y(), 1.0 - _held_out_ratio(cfg), cfg.run.seed)
        table, test = table.subset(tr), table.subset(te)
        if args.test_out:
            write_table(test, args.test_out)
    model = train_model(table, cfg, balance=args.balance)
    model.save(args.out)
    print(f"trained {len(model.ensembles)} ensemble(s), {len(model.classes)} classes")
    if test is not None and len(test):
        report = evaluate(test.labels, predict_table(model, test), model.classes, model.kind,
                          cfg.run.metric)
        report["seed"] = cfg.run.seed
        _print_summary(report)
        if args.report:
            write_report(report, args.report)


def cmd_predict(args, cfg: Config) -> None:
    model = Model.load(args.model)
    table = load_table(args.features)
    pred = predict_table(model, table)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "prediction"] + list(table.provenance_columns))
        for i, p in enumerate(pred):
            prov = list(table.provenance[i]) if table.provenance else []
            w.writerow([i, p] + prov)
    print(f"{len(pred)} predictions")


def cmd_eval(args, cfg: Config) -> None:
    model = Model.load(args.model)
    table = load_table(args.features)
    report = evaluate(table.y(), predict_table(model, table), model.classes, model.kind,
                      cfg.run.metric)
    report["seed"] = cfg.run.seed
    report["model"] = {"T": model.T, "eta": model.eta, "max_depth": model.max_depth,
                       "ensembles": len(model.ensembles)}
    _print_summary(report)
    if args.report:
        write_report(report, args.report)


def cmd_sweep(args, cfg: Config) -> None:
    table = load_table(args.features)
    if args.test:
        train, test = table, load_table(args.test)
    else:
        tr, te = split(table.y(), 1.0 - _held_out_ratio(cfg), cfg.run.seed)
        train, test = table.subset(tr), table.subset(te)
    if args.drop_feature:
        train, test = train.drop(args.drop_feature), test.drop(args.drop_feature)
    grid = DEFAULT_GRID
    if args.grid:
        try:
            grid = tuple(float(v) for v in args.grid.split(",") if v.strip())
        except ValueError:
            raise UsageError(f"bad --grid {args.grid!r}") from None
        if not grid:
            raise UsageError("empty --grid")
    rows = sweep(train, test, grid, cfg, balance=args.balance)
    write_sweep(rows, args.out)
    for eta, score in rows:
        print(f"eta={eta:g} f1={score:.6f}")


def cmd_plot_data(args, cfg: Config) -> None:
    n = emit_plot_data(load_table(args.features), args.feature, args.out)
    print(f"{n} points")


COMMANDS = {"gen": cmd_gen, "extract": cmd_extract, "balance": cmd_balance,
            "train": cmd_train, "predict": cmd_predict, "eval": cmd_eval,
            "sweep": cmd_sweep, "plot-data": cmd_plot_data}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"c2traffic: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"c2traffic: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
