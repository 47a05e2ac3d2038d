"""Command-line entry point.

Exit codes: 0 on success, 1 when the input or config is invalid, 2 when a
run fails (for example every grid cell diverges).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from . import harness
from .data import MEASURES, load_vector_set, pair_by_keys
from .errors import CrossmapError, ValidationError
from .evaluation import bonferroni_adjust, wilcoxon_rank_sum_p
from .neighbors import mean_nn_overlap

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _cmd_mnno(args) -> int:
    v = load_vector_set(args.v, args.format)
    z = load_vector_set(args.z, args.format)
    ds, diag = pair_by_keys(v, z)
    if diag.dropped_x or diag.dropped_y:
        print(diag.report(), file=sys.stderr)
    print(repr(mean_nn_overlap(ds.x, ds.y, args.k, args.measure)))
    return EXIT_OK


def _cmd_train(args) -> int:
    _require(args, "config", "out_dir")
    harness.run_train(args.config, args.out_dir, args.seed, args.k, args.measure)
    return EXIT_OK


def _cmd_exp1(args) -> int:
    _require(args, "config", "out_dir")
    harness.run_experiment1(args.config, args.out_dir, args.seed, args.k, args.measure, args.format)
    return EXIT_OK


def _cmd_exp2(args) -> int:
    _require(args, "config", "out_dir")
    harness.run_experiment2(args.config, args.out_dir, args.seed, args.format)
    return EXIT_OK


def _cmd_synth(args) -> int:
    _require(args, "config", "out_dir")
    print(harness.run_synth(args.config, args.out_dir, args.seed))
    return EXIT_OK


def _read_column(path, name) -> list[float]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or name not in reader.fieldnames:
            raise ValidationError(f"{path}: no column {name!r}")
        try:
            return [float(r[name]) for r in reader if r[name] != ""]
        except ValueError as exc:
            raise ValidationError(f"{path}: column {name!r}: {exc}") from None


def _cmd_stats(args) -> int:
    a = _read_column(args.csv, args.a)
    b = _read_column(args.csv, args.b)
    p = wilcoxon_rank_sum_p(a, b)
    print(f"p_value={p!r}")
    print(f"p_adjusted={bonferroni_adjust([p], args.m)[0]!r}")
    return EXIT_OK


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ValidationError("missing " + " and ".join("--" + n.replace("_", "-") for n in missing))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossmap", description="Neighborhood analysis of cross-modal mappings.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, report_format=False):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out-dir", dest="out_dir", help="output directory")
        if report_format:
            p.add_argument("--format", choices=("csv", "markdown"), default="csv",
                           help="also write report.md when 'markdown'")

    def neighborhood(p):
        p.add_argument("--k", type=int, help="neighborhood size")
        p.add_argument("--measure", choices=MEASURES, help="similarity measure")

    p = sub.add_parser("mnno", help="mean nearest neighbor overlap of two vector files")
    p.add_argument("v")
    p.add_argument("z")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--measure", choices=MEASURES, default="cosine")
    p.add_argument("--format", choices=("glove_text", "tsv"), default="glove_text")
    p.set_defaults(func=_cmd_mnno)

    p = sub.add_parser("train", help="train one mapping and write its history")
    common(p)
    neighborhood(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("exp1", help="learned-mapping neighborhood experiment")
    common(p, report_format=True)
    neighborhood(p)
    p.set_defaults(func=_cmd_exp1)

    p = sub.add_parser("exp2", help="untrained-network probe")
    common(p, report_format=True)
    p.set_defaults(func=_cmd_exp2)

    p = sub.add_parser("synth", help="write a synthetic paired dataset")
    common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("stats", help="rank-sum test between two CSV columns")
    p.add_argument("csv")
    p.add_argument("--a", required=True, help="first column")
    p.add_argument("--b", required=True, help="second column")
    p.add_argument("--m", type=int, help="number of comparisons for Bonferroni")
    p.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CrossmapError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
