"""Command-line front end.

Four subcommands: ``gen`` writes a synthetic dataset to CSV, ``importance``
ranks the features of any numeric CSV, ``select`` runs the full
rank-and-test pipeline, and ``benchmark`` scores the pipeline across
repetitions of the synthetic models. Every command is deterministic given
its flags (seed included); JSON reports omit wall-clock timings unless
--timings is passed so identical runs produce identical bytes.

Exit codes: 0 success, 2 usage or data error, 1 internal error.
"""

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict

import numpy as np

from ._seeding import spawn_rng
from .bcfi import compute_importance_report
from .fsd import SelectionConfig, select_features
from .rf_core import Dataset, RfParams
from .synth import (
    ModelSpec,
    benchmark_summary,
    gen_model,
    known_models,
    run_benchmark,
    write_rows_csv,
    write_summary_json,
)


class DataError(Exception):
    """Bad input data or infeasible request; maps to exit code 2."""


def load_csv(path, target):
    """Numeric CSV with a header row; returns (Dataset, feature names)."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from err
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty CSV")
        if target not in header:
            raise DataError(f"{path}: target column {target!r} not found")
        t_idx = header.index(target)
        names = [h for i, h in enumerate(header) if i != t_idx]
        if not names:
            raise DataError(f"{path}: no feature columns besides the target")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            parsed = []
            for col, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column {col!r}"
                    ) from None
            rows.append(parsed)
        if not rows:
            raise DataError(f"{path}: no data rows")
    matrix = np.asarray(rows, dtype=np.float64)
    features = np.delete(matrix, t_idx, axis=1)
    response = matrix[:, t_idx]
    try:
        return Dataset(features, response, names), names
    except ValueError as err:
        raise DataError(f"{path}: {err}") from err


def _write_csv(path, names, features, response):
    try:
        fh = open(path, "w", newline="", encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot write {path}: {err}") from err
    with fh:
        fh.write(",".join([*names, "target"]))
        fh.write("\n")
        for row, y in zip(features, response):
            cells = [repr(float(v)) for v in row]
            cells.append(repr(float(y)))
            fh.write(",".join(cells))
            fh.write("\n")


def _dump_json(path, payload):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, indent=2, sort_keys=True))
            fh.write("\n")
    except OSError as err:
        raise DataError(f"cannot write {path}: {err}") from err


def cmd_gen(args):
    if args.model not in known_models():
        raise DataError(f"unknown model: {args.model}")
    spec = ModelSpec(
        model_id=args.model, n=args.n, p=args.p, correlated=args.correlated, seed=args.seed
    )
    data, _ = gen_model(spec)
    _write_csv(args.out, data.names, data.features, data.response)
    print(f"wrote {data.n_rows} rows x {data.n_features + 1} columns to {args.out}")
    return 0


def _importance_section(report, names):
    return {
        "metric": report.metric,
        "values": [float(v) for v in report.values],
        "order": [int(i) for i in report.order],
        "ranked_names": [names[i] for i in report.order],
    }


def cmd_importance(args):
    began = time.perf_counter()
    data, names = load_csv(args.csv, args.target)
    if args.m0 > data.n_rows:
        raise DataError(f"m0 = {args.m0} exceeds the {data.n_rows} available rows")
    subset = spawn_rng(args.seed, "importance-subset").permutation(data.n_rows)[: args.m0]
    params = RfParams(n_trees=args.B)
    report = compute_importance_report(
        data, subset, args.R, params, seed=args.seed, metric=args.metric
    )
    elapsed = time.perf_counter() - began

    print(f"# importance metric={report.metric} m0={args.m0} R={args.R} B={args.B}")
    for rank, idx in enumerate(report.order, start=1):
        print(f"{rank:4d}  {names[idx]:<24s} {report.values[idx]: .6g}")
    print(f"# done in {elapsed:.2f}s")

    if args.json_out:
        payload = {
            "command": "importance",
            "config": {
                "csv": args.csv,
                "target": args.target,
                "m0": args.m0,
                "R": args.R,
                "B": args.B,
                "metric": args.metric,
                "seed": args.seed,
            },
            "importance": _importance_section(report, names),
        }
        if args.timings:
            payload["timings_seconds"] = {"total": elapsed}
        _dump_json(args.json_out, payload)
    return 0


def _test_records(result, names):
    records = []
    for k, test in enumerate(result.tests, start=1):
        records.append(
            {
                "K": k,
                "feature_added": names[int(result.order[k - 1])],
                "statistic": test.statistic,
                "threshold": test.threshold,
                "p_value": test.p_value,
                "reject": test.reject,
            }
        )
    return records


def cmd_select(args):
    began = time.perf_counter()
    data, names = load_csv(args.csv, args.target)
    config = SelectionConfig(
        m0=args.m0,
        m1=args.m1,
        m2=args.m2,
        alpha=args.alpha,
        R=args.R,
        rf=RfParams(n_trees=args.B),
        n_perm=args.n_perm,
        metric=args.metric,
        seed=args.seed,
    )
    t_load = time.perf_counter() - began
    try:
        _, report, result = select_features(data, config)
    except ValueError as err:
        raise DataError(str(err)) from err
    total = time.perf_counter() - began

    selected_names = [names[i] for i in result.selected]
    print(f"# select alpha={args.alpha} metric={args.metric} seed={args.seed}")
    for record in _test_records(result, names):
        verdict = "reject" if record["reject"] else "accept"
        print(
            f"K={record['K']:3d} +{record['feature_added']:<20s} "
            f"stat={record['statistic']: .6g} thr={record['threshold']: .6g} "
            f"p={record['p_value']:.4f} {verdict}"
        )
    if result.exhausted:
        print("# every prefix rejected; returning all features")
    print(f"# selected ({result.k_hat}): {', '.join(selected_names)}")
    print(f"# done in {total:.2f}s")

    if args.json_out:
        payload = {
            "command": "select",
            "config": asdict(config),
            "dataset": {"csv": args.csv, "target": args.target, "n": data.n_rows, "p": data.n_features},
            "importance": _importance_section(report, names),
            "tests": _test_records(result, names),
            "k_hat": result.k_hat,
            "selected": selected_names,
            "exhausted": result.exhausted,
        }
        if args.timings:
            payload["timings_seconds"] = {"load": t_load, "total": total}
        _dump_json(args.json_out, payload)
    return 0


def cmd_benchmark(args):
    if args.reps < 1:
        raise DataError("reps must be >= 1")
    try:
        model_ids = [int(tok) for tok in args.models.split(",") if tok.strip()]
    except ValueError as err:
        raise DataError(f"bad --models list: {args.models!r}") from err
    if not model_ids:
        raise DataError("no models given")
    for mid in model_ids:
        if mid not in known_models():
            raise DataError(f"unknown model: {mid}")
    config = SelectionConfig(
        m0=args.sizes,
        m1=args.sizes,
        m2=args.sizes,
        alpha=args.alpha,
        R=args.R,
        rf=RfParams(n_trees=args.B),
        n_perm=args.n_perm,
        seed=args.seed,
    )
    n = config.m0 + 2 * config.m1 + 2 * config.m2
    specs = [
        ModelSpec(model_id=mid, n=n, p=args.p, correlated=args.correlated, seed=args.seed)
        for mid in model_ids
    ]
    rows, summaries = run_benchmark(specs, config, args.reps)

    print(f"# benchmark p={args.p} sizes={args.sizes} reps={args.reps} R={args.R}")
    print(f"{'model':>5s} {'mu_c':>6s} {'n_w':>6s} {'sec/rep':>8s}")
    for s in summaries:
        print(f"{s['model_id']:5d} {s['mu_c']:6.2f} {s['n_w']:6.2f} {s['mean_seconds']:8.1f}")

    if args.out:
        try:
            write_rows_csv(rows, f"{args.out}.rows.csv")
            write_summary_json(
                benchmark_summary(summaries, config, include_timings=args.timings),
                f"{args.out}.summary.json",
            )
        except OSError as err:
            raise DataError(f"cannot write benchmark output: {err}") from err
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nfselect",
        description="Forest-ranked feature selection with deep-kernel residual tests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="write a synthetic dataset to CSV")
    p_gen.add_argument("--model", type=int, required=True)
    p_gen.add_argument("--n", type=int, default=2000)
    p_gen.add_argument("--p", type=int, default=50)
    p_gen.add_argument("--correlated", action="store_true")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_imp = sub.add_parser("importance", help="rank features of a CSV dataset")
    p_imp.add_argument("csv")
    p_imp.add_argument("--target", default="target")
    p_imp.add_argument("--m0", type=int, default=400)
    p_imp.add_argument("--R", type=int, default=100)
    p_imp.add_argument("--B", type=int, default=100)
    p_imp.add_argument("--seed", type=int, default=0)
    p_imp.add_argument("--metric", choices=("bcfi", "min_depth"), default="bcfi")
    p_imp.add_argument("--json-out")
    p_imp.add_argument("--timings", action="store_true")
    p_imp.set_defaults(func=cmd_importance)

    p_sel = sub.add_parser("select", help="run the full selection pipeline")
    p_sel.add_argument("csv")
    p_sel.add_argument("--target", default="target")
    p_sel.add_argument("--alpha", type=float, default=0.05)
    p_sel.add_argument("--m0", type=int, default=400)
    p_sel.add_argument("--m1", type=int, default=400)
    p_sel.add_argument("--m2", type=int, default=400)
    p_sel.add_argument("--R", type=int, default=100)
    p_sel.add_argument("--B", type=int, default=100)
    p_sel.add_argument("--n-perm", type=int, default=100)
    p_sel.add_argument("--seed", type=int, default=0)
    p_sel.add_argument("--metric", choices=("bcfi", "min_depth"), default="bcfi")
    p_sel.add_argument("--json-out")
    p_sel.add_argument("--timings", action="store_true")
    p_sel.set_defaults(func=cmd_select)

    p_bench = sub.add_parser("benchmark", help="score the pipeline on synthetic models")
    p_bench.add_argument("--models", default="2,5")
    p_bench.add_argument("--p", type=int, default=50)
    p_bench.add_argument("--sizes", type=int, default=400)
    p_bench.add_argument("--reps", type=int, default=20)
    p_bench.add_argument("--alpha", type=float, default=0.05)
    p_bench.add_argument("--R", type=int, default=20)
    p_bench.add_argument("--B", type=int, default=100)
    p_bench.add_argument("--n-perm", type=int, default=100)
    p_bench.add_argument("--correlated", action="store_true")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", help="output prefix for <out>.rows.csv and <out>.summary.json")
    p_bench.add_argument("--timings", action="store_true")
    p_bench.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # internal failure
        print(f"internal error: {err!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
