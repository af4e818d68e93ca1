"""Command-line interface.

Subcommands
-----------
``fit``        solve a percentile problem from a CSV dataset, emit a JSON report
``oracle``     brute-force grid evaluation of the same problem (d <= 2)
``benchmark``  Monte-Carlo sweep comparing the percentile centroid with baselines

File formats
------------
Dataset CSV
    UTF-8, header row required, one point per row. ``--family linear`` reads
    columns ``x1..xp,y`` (the last column is the label); ``--family centroid``
    reads ``x1..xd``. Every cell must be a finite decimal number.
Report JSON
    ``theta``, ``objective``, ``winning_subset`` and ``inlier_indices``
    (1-based point indices), ``solver``, ``counts`` (``total``, ``solved``,
    ``skipped``), ``elapsed_s`` and a ``problem`` block (``M``, ``O``, ``d``,
    ``family``). Floats use the shortest repr that round-trips exactly.
Benchmark output (in ``--out-dir``)
    ``results.csv``  ratio,trial,method,error,elapsed_s (elapsed_s empty unless --timing)
    ``summary.csv``  ratio,method,mean_error,std_error,trials sorted by (ratio, method)
    ``failures.csv`` ratio,trial,method,message
    ``plot.gp``      gnuplot script reading summary.csv

Exit codes: 0 success, 1 I/O or parse error, 2 precondition violated,
3 subset budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import bench
from .core import BudgetExceededError, Dataset, PercentileFitError, PercentileProblem, PreconditionError
from .residuals import linear_abs, sq_distance
from .solvers import DEFAULT_BUDGET, FitReport, grid_oracle, solve_randomized, solve_theorem1, solve_theorem2

EXIT_OK = 0
EXIT_IO = 1
EXIT_PRECONDITION = 2
EXIT_BUDGET = 3

THREADS_ENV = "PERCENTILE_FIT_THREADS"


class InputError(Exception):
    """Unreadable or malformed input file."""


def read_dataset_csv(path, family: str) -> Dataset:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    header, body = rows[0], rows[1:]
    if all(_is_number(c) for c in header):
        raise InputError(f"{path}: first row looks numeric; a header row is required")
    width = len(header)
    values = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != width:
            raise InputError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"{path}:{lineno}: non-finite value")
        values.append(vals)
    if family == "linear":
        if width < 2:
            raise InputError(f"{path}: linear data needs feature columns and a label column")
        return Dataset([v[:-1] for v in values], [v[-1] for v in values])
    return Dataset(values)


def write_dataset_csv(dataset: Dataset, path) -> None:
    p = dataset.p
    header = [f"x{i + 1}" for i in range(p)] + (["y"] if dataset.has_labels else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for m in range(dataset.M):
            row = [repr(float(v)) for v in dataset.features[m]]
            if dataset.has_labels:
                row.append(repr(float(dataset.labels[m])))
            w.writerow(row)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def report_json(report: FitReport, problem: PercentileProblem, family: str) -> dict:
    d = report.to_dict(one_based=True)
    return {
        "theta": d["theta"],
        "objective": d["objective"],
        "winning_subset": d["winning_subset"],
        "inlier_indices": d["inlier_indices"],
        "solver": d["solver"],
        "counts": {
            "total": d["subsets_total"],
            "solved": d["subsets_solved"],
            "skipped": d["subsets_skipped"],
        },
        "elapsed_s": d["elapsed_s"],
        "problem": {"M": problem.M, "O": problem.outliers, "d": problem.d, "family": family},
    }


def _emit(doc: dict, output: Optional[str]) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _problem(args) -> PercentileProblem:
    data = read_dataset_csv(args.input, args.family)
    fam = linear_abs(data.p) if args.family == "linear" else sq_distance(data.p)
    return PercentileProblem(data, fam, args.outliers)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV)
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise PreconditionError(f"{THREADS_ENV}={env!r} is not an integer") from None


def cmd_fit(args) -> int:
    problem = _problem(args)
    threads = _threads(args)
    if args.solver == "theorem1":
        report = solve_theorem1(problem, budget=args.budget, threads=threads)
    elif args.solver == "theorem2":
        report = solve_theorem2(problem, budget=args.budget, threads=threads)
    else:
        report = solve_randomized(problem, args.samples, args.seed, subset_size=args.subset_size,
                                  budget=args.budget, threads=threads)
    _emit(report_json(report, problem, args.family), args.output)
    return EXIT_OK


def parse_box(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise PreconditionError(f"cannot parse box {text!r}") from None
    if len(vals) % 2 or not vals:
        raise PreconditionError("box needs lo,hi pairs: x0,x1[,y0,y1]")
    return [(vals[i], vals[i + 1]) for i in range(0, len(vals), 2)]


def cmd_oracle(args) -> int:
    problem = _problem(args)
    if problem.d > 2:
        raise PreconditionError(f"grid oracle needs d <= 2, data has d={problem.d}")
    if args.resolution < 2:
        raise PreconditionError("resolution must be at least 2")
    report = grid_oracle(problem, parse_box(args.box), args.resolution, threads=_threads(args))
    _emit(report_json(report, problem, args.family), args.output)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise InputError(f"{args.config}: expected a JSON object")
    else:
        raw = {}
    if args.timing:
        raw["record_timing"] = True
    try:
        config = bench.ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise PreconditionError(f"invalid config: {exc}") from exc
    failures = []
    results = bench.run_experiment(config, threads=_threads(args), on_failure=failures.append)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(bench.results_csv(results, timing=config.record_timing), encoding="utf-8")
    rows = bench.summarize(results) if results else []
    (out / "summary.csv").write_text(bench.summary_csv(rows), encoding="utf-8")
    (out / "failures.csv").write_text(bench.failures_csv(failures), encoding="utf-8")
    (out / "plot.gp").write_text(bench.plot_script(config), encoding="utf-8")
    if failures:
        print(f"{len(failures)} cell(s) failed; see {out / 'failures.csv'}", file=sys.stderr)
    return EXIT_OK


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="dataset CSV with a header row")
    p.add_argument("--family", required=True, choices=("linear", "centroid"))
    p.add_argument("--outliers", required=True, type=int, help="outlier count O")
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="percentile-fit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="solve the percentile problem")
    _add_problem_args(fit)
    fit.add_argument("--solver", default="theorem2", choices=("theorem1", "theorem2", "randomized"))
    fit.add_argument("--samples", type=int, default=1000, help="randomized: subsets to sample")
    fit.add_argument("--seed", type=int, default=0, help="randomized: RNG seed")
    fit.add_argument("--subset-size", default="theorem2", choices=("theorem1", "theorem2"),
                     help="randomized: sample (d+1)-subsets (theorem2) or (M-O)-subsets (theorem1)")
    fit.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="maximum subsets to enumerate")
    fit.set_defaults(func=cmd_fit)

    oracle = sub.add_parser("oracle", help="grid-search the percentile objective (d <= 2)")
    _add_problem_args(oracle)
    oracle.add_argument("--box", required=True, help='search box "x0,x1" or "x0,x1,y0,y1"; use --box=-1,1 for negative bounds')
    oracle.add_argument("--resolution", type=int, default=201, help="grid points per axis")
    oracle.set_defaults(func=cmd_oracle)

    b = sub.add_parser("benchmark", help="Monte-Carlo comparison against baselines")
    b.add_argument("--config", help="JSON ExperimentConfig (defaults used when omitted)")
    b.add_argument("--out-dir", required=True)
    b.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    b.add_argument("--timing", action="store_true", help="record wall-clock times in results.csv")
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PercentileFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
