"""Command line entry point.

Exit codes: 0 success, 2 manifest error, 3 capacity exceeded,
4 numerical failure budget exceeded.
"""

import argparse
import os
import sys

from . import experiments, manifest, plots
from .errors import CapacityError, ConditioningError, HorizonError, ManifestError

EXIT_OK = 0
EXIT_MANIFEST = 2
EXIT_CAPACITY = 3
EXIT_NUMERICAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arborwalk",
        description="random coined quantum walks on homogeneous trees")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment manifest")
    run_p.add_argument("manifest", help="path to a manifest JSON file")
    run_p.add_argument("--out", default=None,
                       help="output directory (default: <manifest stem>_out)")
    run_p.add_argument("--threads", type=int, default=1)
    run_p.add_argument("--resume", action="store_true",
                       help="reuse completed units from partial.jsonl")

    plot_p = sub.add_parser("plot", help="render plots for a result directory")
    plot_p.add_argument("resultdir")

    val_p = sub.add_parser("validate", help="validate a manifest without running")
    val_p.add_argument("manifest")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            manifest.load(args.manifest)
            print("manifest ok")
            return EXIT_OK
        if args.command == "run":
            doc = manifest.load(args.manifest)
            out = args.out
            if out is None:
                stem = os.path.splitext(os.path.basename(args.manifest))[0]
                out = f"{stem}_out"
            result = experiments.run(doc, out, threads=args.threads,
                                     resume=args.resume)
            if result.summary.get("partial"):
                print(f"partial run: {result.summary['units_done']} units done")
            else:
                print(f"wrote {result.csv_path} ({len(result.rows)} rows)")
            return EXIT_OK
        if args.command == "plot":
            files = plots.emit_plots(args.resultdir)
            for path in files:
                print(f"wrote {path}")
            return EXIT_OK
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return EXIT_MANIFEST
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConditioningError, HorizonError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
