"""Command line entry point.

    rlskit run CONFIG [--seed N] [--threads N] [--output PATH]
    rlskit convert INPUT OUTPUT --chunk-rows N [--format csv|sparse] [--label-col C]
    rlskit info PATH
    rlskit bench CONFIG --repeat K [--seed N] [--threads N] [--output PATH]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
"""
import argparse
import json
import logging
import statistics
import sys

from . import bigarray, datasets
from .errors import FormatError, RlsError
from .experiment import run_experiment

log = logging.getLogger("rlskit")


def _common(p):
    p.add_argument("--seed", type=int, help="override every seed in the config")
    p.add_argument("--threads", type=int, help="cap BLAS/LAPACK threads")
    p.add_argument("--output", help="report path (overrides the config's output)")


def build_parser():
    ap = argparse.ArgumentParser(prog="rlskit", description="Regularized least squares experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("convert", help="convert a text dataset to a bigarray file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--chunk-rows", type=int, default=None)
    p.add_argument("--format", choices=("csv", "sparse"), default="csv")
    p.add_argument("--label-col", type=int, default=-1)
    p.add_argument("--n-features", type=int, default=None)

    p = sub.add_parser("info", help="describe a bigarray file or a dataset")
    p.add_argument("path")
    p.add_argument("--format", choices=("csv", "sparse"), default=None)
    p.add_argument("--label-col", type=int, default=-1)

    p = sub.add_parser("bench", help="run an experiment several times and summarize timings")
    p.add_argument("config")
    p.add_argument("--repeat", type=int, default=3)
    _common(p)
    return ap


def _print_json(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_run(args):
    report = run_experiment(args.config, seed=args.seed, output=args.output,
                            threads=args.threads)
    d = report.to_dict()
    perf = d["performance"]
    log.info("%s: accuracy %s in %.3fs", report.name, perf.get("accuracy"),
             report.total_seconds)
    _print_json({"name": d["name"], "dataset": d["dataset"],
                 "hyperparameters": d["hyperparameters"],
                 "accuracy": perf.get("accuracy"), "timing": d["timing"]})


def cmd_convert(args):
    ba = datasets.convert_to_bigarray(args.input, args.output, args.chunk_rows,
                                      fmt=args.format, label_col=args.label_col,
                                      n_features=args.n_features)
    _print_json({"path": ba.path, "rows": ba.rows, "cols": ba.cols,
                 "chunk_rows": ba.chunk_rows, "n_chunks": ba.n_chunks})


def cmd_info(args):
    with open(args.path, "rb") as fh:
        magic = fh.read(4)
    if magic == bigarray.MAGIC:
        ba = bigarray.ba_open(args.path)
        _print_json({"kind": "bigarray", "rows": ba.rows, "cols": ba.cols,
                     "chunk_rows": ba.chunk_rows, "n_chunks": ba.n_chunks,
                     "bytes": ba.nbytes})
        return
    fmt = args.format or ("sparse" if args.path.endswith((".svm", ".libsvm", ".txt"))
                          else "csv")
    ds = datasets.load_dataset(args.path, fmt, args.label_col)
    _print_json({"kind": "dataset", "format": fmt, "n": int(ds.x.shape[0]),
                 "d": int(ds.x.shape[1]), "T": ds.n_classes,
                 "classes": ds.classes.tolist()})


def cmd_bench(args):
    if args.repeat < 1:
        raise FormatError("--repeat must be >= 1")
    runs = []
    for _ in range(args.repeat):
        runs.append(run_experiment(args.config, seed=args.seed, threads=args.threads))
    stages = runs[0].stage_seconds.keys()
    summary = {
        "name": runs[0].name,
        "repeat": args.repeat,
        "accuracy": runs[0].performance.get("accuracy"),
        "total_seconds": {"mean": statistics.fmean(r.total_seconds for r in runs),
                          "min": min(r.total_seconds for r in runs)},
        "stage_seconds": {s: {"mean": statistics.fmean(r.stage_seconds[s] for r in runs),
                              "min": min(r.stage_seconds[s] for r in runs)}
                          for s in stages},
        # one (time, accuracy) point per pipeline, as in an accuracy-vs-time plot
        "figure_point": {"pipeline": runs[0].name,
                         "time": min(r.total_seconds for r in runs),
                         "accuracy": runs[0].performance.get("accuracy")},
    }
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(summary, fh, indent=2)
    _print_json(summary)


COMMANDS = {"run": cmd_run, "convert": cmd_convert, "info": cmd_info, "bench": cmd_bench}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except RlsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
