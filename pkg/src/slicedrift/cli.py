"""Command-line interface.

    slicedrift slice DATA.csv --out slices.json
    slicedrift detect slices.json DEPLOY.csv [--goal mcr_degradation]
    slicedrift distort permute DATA.csv --setting E3 -r 0.5 -c 0.5 --out distorted.csv
    slicedrift distort rebalance DATA.csv -k 2 --out rebalanced.csv
    slicedrift experiment goal1 config.json --out grid.csv

``detect`` exits 0 when no drift is found, 2 when drift is found and 1 on error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .data_model import drop_low_variance, load_dataset, save_dataset
from .distortion import SETTINGS, PermutationConfig, RebalanceConfig, permute_distort, rebalance_mcr
from .drift import DISTRIBUTION_CHANGE, MCR_DEGRADATION, detect_drift
from .errors import SliceDriftError
from .harness import emit_report, load_config, run_goal1, run_goal2
from .slicing import SliceFinderConfig, SliceSet, find_weak_slices, slice_summary

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DRIFT = 2


def _load(args, schema=None, read_indicator=True):
    schema = args.schema or schema
    d = load_dataset(args.data, schema, read_indicator=read_indicator)
    if getattr(args, "drop_low_variance", None):
        d = drop_low_variance(d, args.drop_low_variance)
    return d


def cmd_slice(args):
    d = _load(args)
    cfg = SliceFinderConfig(
        min_support=args.min_support,
        filter_alpha=args.filter_alpha,
        max_order=args.max_order,
    )
    slices = find_weak_slices(d, cfg)
    slices.save(args.out)
    summary = slice_summary(slices, d)
    print(f"found {slices.K} weak slices on {d.N} rows (M={d.M}); "
          f"error coverage {summary.pct_error_coverage:.2f}%")
    return EXIT_OK


def cmd_detect(args):
    slices = SliceSet.load(args.slices)
    # deployment labels are never used, so the indicator column may be absent
    d2 = _load(args, schema=slices.schema, read_indicator=False)
    report = detect_drift(slices, d2, goal=args.goal, alpha=args.alpha, continuity=not args.no_continuity)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json(indent=1) + "\n")
    print(report.summary_line())
    return EXIT_DRIFT if report.drift_detected else EXIT_OK


def cmd_permute(args):
    d = _load(args)
    cfg = PermutationConfig.for_setting(
        args.setting, args.r, args.c, seed=args.seed, force_different=not args.allow_unchanged
    )
    save_dataset(permute_distort(d, cfg), args.out)
    return EXIT_OK


def cmd_rebalance(args):
    d = _load(args)
    out = rebalance_mcr(d, RebalanceConfig(args.k, seed=args.seed))
    save_dataset(out, args.out)
    print(f"misclassified {d.M}/{d.N} -> {out.M}/{out.N}")
    return EXIT_OK


def cmd_experiment(args):
    cfg = load_config(args.config, args.goal)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    grid = run_goal1(cfg) if args.goal == "goal1" else run_goal2(cfg)
    if args.out:
        emit_report(grid, args.out, args.format)
    else:
        json.dump(grid.to_dict(), sys.stdout, indent=1)
        sys.stdout.write("\n")
    return EXIT_OK


def _data_args(p):
    p.add_argument("data", help="CSV file")
    p.add_argument("--schema", help="schema sidecar (default: <stem>.schema.json)")
    p.add_argument("--drop-low-variance", type=int, metavar="MIN_MINORITY_COUNT",
                   help="drop features with fewer rows than this outside their modal value")


def build_parser():
    parser = argparse.ArgumentParser(prog="slicedrift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("slice", help="find weak slices and save them as JSON")
    _data_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--min-support", type=int)
    p.add_argument("--filter-alpha", type=float, default=0.05)
    p.add_argument("--max-order", type=int, default=2, choices=(1, 2))
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("detect", help="test a deployment dataset for drift")
    p.add_argument("slices", help="slice set JSON from 'slice'")
    _data_args(p)
    p.add_argument("--goal", choices=(DISTRIBUTION_CHANGE, MCR_DEGRADATION), default=DISTRIBUTION_CHANGE)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--no-continuity", action="store_true", help="use the uncorrected normal test")
    p.add_argument("--out", help="write the drift report JSON here")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("distort", help="inject drift into a dataset")
    dsub = p.add_subparsers(dest="method", required=True)
    q = dsub.add_parser("permute")
    _data_args(q)
    q.add_argument("--setting", choices=sorted(SETTINGS), required=True)
    q.add_argument("-r", type=float, required=True, help="row proportion in (0, 1]")
    q.add_argument("-c", type=float, required=True, help="column proportion in (0, 1]")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--allow-unchanged", action="store_true", help="do not force permutations to change values")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_permute)
    q = dsub.add_parser("rebalance")
    _data_args(q)
    q.add_argument("-k", type=float, required=True, help="odds multiplier")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_rebalance)

    p = sub.add_parser("experiment", help="run a drift-injection experiment")
    p.add_argument("goal", choices=("goal1", "goal2"))
    p.add_argument("config", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="report path (.csv or .json)")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SliceDriftError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"slicedrift: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
