"""Command-line surface: fit, predict, cluster, select, simulate, benchmark.

Every command is seeded (--seed wins over the STMOE_SEED environment
variable) and writes plain CSV/JSON, so repeated runs with the same
arguments produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import __version__
from .criteria import select_k
from .dataio import DatasetSchema, load_model, read_dataset, save_model, write_csv
from .ecm import FitConfig, FitError, multi_start_fit
from .estep import posterior_tau
from .model import Dataset
from .predict import UndefinedMomentError, map_partition, mixture_mean, predict_band
from .simulate import (
    SimConfig,
    benchmark_truth,
    consistency_experiment,
    generate,
    inject_outliers,
    robustness_experiment,
)


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("STMOE_SEED")
    return int(env) if env else 0


def _schema_from_args(args) -> DatasetSchema:
    covariates = tuple(args.covariates.split(","))
    gating = tuple(args.gating.split(",")) if args.gating else None
    return DatasetSchema(
        response=args.response,
        covariates=covariates,
        gating=gating,
        add_intercept=not args.no_intercept,
    )


def _add_schema_flags(sub):
    sub.add_argument("--response", default="y", help="response column name")
    sub.add_argument("--covariates", default="x", help="comma-separated expert covariate columns")
    sub.add_argument("--gating", default=None, help="gating covariate columns (default: same as --covariates)")
    sub.add_argument("--no-intercept", action="store_true", help="do not prepend an intercept column")


def _fit_config(args, seed: int) -> FitConfig:
    return FitConfig(
        tol=args.tol,
        max_iter=args.max_iter,
        n_starts=args.starts,
        seed=seed,
        fix_skew_zero=getattr(args, "fix_skew_zero", False),
        fix_dof=getattr(args, "fix_dof", None),
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stmoe",
        description="Fit, evaluate and benchmark normal and skew-t mixtures of experts.",
    )
    parser.add_argument("--version", action="version", version=f"stmoe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a mixture of experts to a CSV dataset")
    p_fit.add_argument("--data", required=True)
    _add_schema_flags(p_fit)
    p_fit.add_argument("--family", choices=["nmoe", "stmoe"], default="stmoe")
    p_fit.add_argument("--k", type=int, required=True, help="number of experts")
    p_fit.add_argument("--starts", type=int, default=10)
    p_fit.add_argument("--tol", type=float, default=1e-6)
    p_fit.add_argument("--max-iter", type=int, default=1500)
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--fix-skew-zero", action="store_true", help="pin all skewness parameters at 0")
    p_fit.add_argument("--fix-dof", type=float, default=None, help="pin all degrees of freedom")
    p_fit.add_argument("--out-model", required=True)
    p_fit.add_argument("--out-tau", default=None,
                       help="CSV of posterior memberships (default: <out-model>.tau.csv)")
    p_fit.add_argument("--out-trace", default=None,
                       help="CSV of the log-likelihood trace (default: <out-model>.trace.csv)")

    p_pred = sub.add_parser("predict", help="predictive mean and band over a grid CSV")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--grid", required=True, help="CSV with the covariate columns")
    _add_schema_flags(p_pred)
    p_pred.add_argument("--band-width", type=float, default=2.0)
    p_pred.add_argument("--mean-only", action="store_true", help="skip the variance band")
    p_pred.add_argument("--out", required=True)

    p_clus = sub.add_parser("cluster", help="MAP hard labels for a dataset under a model")
    p_clus.add_argument("--model", required=True)
    p_clus.add_argument("--data", required=True)
    _add_schema_flags(p_clus)
    p_clus.add_argument("--out", required=True)

    p_sel = sub.add_parser("select", help="information-criterion choice of the number of experts")
    p_sel.add_argument("--data", required=True)
    _add_schema_flags(p_sel)
    p_sel.add_argument("--family", choices=["nmoe", "stmoe"], default="stmoe")
    p_sel.add_argument("--kmin", type=int, default=1)
    p_sel.add_argument("--kmax", type=int, default=5)
    p_sel.add_argument("--starts", type=int, default=10)
    p_sel.add_argument("--tol", type=float, default=1e-6)
    p_sel.add_argument("--max-iter", type=int, default=1500)
    p_sel.add_argument("--seed", type=int, default=None)
    p_sel.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="draw a dataset from a generating model")
    p_sim.add_argument("--family", choices=["nmoe", "stmoe"], default="stmoe")
    p_sim.add_argument("--truth", default=None, help="model JSON to sample from (default: built-in benchmark truth)")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--outliers", type=float, default=0.0, help="contamination probability in [0, 1]")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--out-labels", default=None,
                       help="labels CSV (default: <out>.labels.csv); outlier rows get label 0")

    p_bench = sub.add_parser("benchmark", help="run a simulation study and write its MSE table")
    p_bench.add_argument("--experiment", choices=["consistency", "robustness"], required=True)
    p_bench.add_argument("--family", choices=["nmoe", "stmoe"], default=None,
                         help="generating family (default: stmoe for consistency, nmoe for robustness)")
    p_bench.add_argument("--trials", type=int, default=20)
    p_bench.add_argument("--replications", type=int, default=10)
    p_bench.add_argument("--n", type=int, default=500)
    p_bench.add_argument("--starts", type=int, default=5)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--out", required=True)
    return parser


def _cmd_fit(args) -> int:
    seed = _resolve_seed(args.seed)
    data = read_dataset(args.data, _schema_from_args(args))
    fm = multi_start_fit(data, args.k, args.family, _fit_config(args, seed))
    save_model(
        args.out_model,
        fm.params,
        fit_meta={
            "loglik": fm.loglik,
            "n_iter": fm.n_iter,
            "converged": fm.converged,
            "start_index": fm.start_index,
            "seed": seed,
        },
    )
    stem = args.out_model.rsplit(".json", 1)[0]
    tau_path = args.out_tau or f"{stem}.tau.csv"
    trace_path = args.out_trace or f"{stem}.trace.csv"
    header = [f"tau{k + 1}" for k in range(fm.params.n_components)]
    write_csv(tau_path, header, fm.tau.tolist())
    write_csv(trace_path, ["iteration", "loglik"], list(enumerate(fm.loglik_trace)))
    print(f"fit: loglik={fm.loglik!r} iterations={fm.n_iter} converged={fm.converged}")
    return 0


def _grid_dataset(args) -> Dataset:
    schema = _schema_from_args(args)
    covariates = schema.covariates
    gating = schema.gating if schema.gating is not None else covariates

    with open(args.grid, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{args.grid}: empty file")
        missing = [c for c in dict.fromkeys([*covariates, *gating]) if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{args.grid}: missing column(s) {missing}")
        xs, rs = [], []
        for row_num, record in enumerate(reader, start=1):
            xs.append([float(record[c]) for c in covariates])
            rs.append([float(record[c]) for c in gating])
    if not xs:
        raise ValueError(f"{args.grid}: no data rows")
    X = np.asarray(xs)
    R = np.asarray(rs)
    if schema.add_intercept:
        ones = np.ones((len(xs), 1))
        X = np.hstack([ones, X])
        R = np.hstack([ones, R])
    return Dataset(y=np.zeros(len(xs)), X=X, R=R)


def _cmd_predict(args) -> int:
    psi = load_model(args.model)
    grid = _grid_dataset(args)
    if args.mean_only:
        mean = mixture_mean(grid.X, grid.R, psi)
        write_csv(args.out, ["mean"], [[m] for m in mean])
    else:
        mean, lower, upper = predict_band(grid, psi, width=args.band_width)
        write_csv(args.out, ["mean", "lower", "upper"], zip(mean, lower, upper))
    return 0


def _cmd_cluster(args) -> int:
    psi = load_model(args.model)
    data = read_dataset(args.data, _schema_from_args(args))
    labels = map_partition(posterior_tau(data, psi))
    write_csv(args.out, ["label"], [[int(l)] for l in labels])
    return 0


def _cmd_select(args) -> int:
    seed = _resolve_seed(args.seed)
    data = read_dataset(args.data, _schema_from_args(args))
    if args.kmin < 1 or args.kmax < args.kmin:
        raise ValueError(f"invalid K range [{args.kmin}, {args.kmax}]")
    result = select_k(data, args.family, range(args.kmin, args.kmax + 1), _fit_config(args, seed))
    header = ["K", "loglik", "complete_loglik", "eta", "aic", "bic", "icl",
              "chosen_aic", "chosen_bic", "chosen_icl"]
    rows = [
        [
            row.K, row.loglik, row.complete_loglik, row.eta, row.aic, row.bic, row.icl,
            result.chosen["aic"] == row.K,
            result.chosen["bic"] == row.K,
            result.chosen["icl"] == row.K,
        ]
        for row in result.rows
    ]
    write_csv(args.out, header, rows)
    for crit in ("aic", "bic", "icl"):
        print(f"{crit}: K={result.chosen[crit]}")
    if result.failures:
        print(f"failed K values: {sorted(result.failures)}", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args.seed)
    truth = load_model(args.truth) if args.truth else benchmark_truth(args.family)
    data, labels = generate(SimConfig(truth=truth, n=args.n, seed=seed))
    if args.outliers > 0.0:
        data = inject_outliers(data, args.outliers, seed + 1)
        # same draw order as inject_outliers, so the mask is reproducible
        mask = np.random.default_rng(seed + 1).random(data.n) < args.outliers
        labels = np.where(mask, 0, labels)
    write_csv(args.out, ["y", "x"], zip(data.y, data.X[:, 1]))
    labels_path = args.out_labels or f"{args.out.rsplit('.csv', 1)[0]}.labels.csv"
    write_csv(labels_path, ["label"], [[int(l)] for l in labels])
    return 0


def _cmd_benchmark(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.experiment == "consistency":
        family = args.family or "stmoe"
        rows = consistency_experiment(
            family=family,
            trials=args.trials,
            seed=seed,
            cfg=FitConfig(n_starts=args.starts, max_iter=400, seed=seed),
        )
        if not rows:
            raise FitError("consistency study produced no rows")
        header = list(rows[0].keys())
        write_csv(args.out, header, [[row.get(h, "") for h in header] for row in rows])
    else:
        family = args.family or "nmoe"
        rows = robustness_experiment(
            gen_family=family,
            replications=args.replications,
            n=args.n,
            seed=seed,
            cfg=FitConfig(n_starts=args.starts, max_iter=400, seed=seed),
        )
        header = ["c", "fit_family", "median_mse", "mean_mse", "replications", "dropped"]
        write_csv(args.out, header, [[row[h] for h in header] for row in rows])
    print(f"benchmark: wrote {len(rows)} rows to {args.out}")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "cluster": _cmd_cluster,
    "select": _cmd_select,
    "simulate": _cmd_simulate,
    "benchmark": _cmd_benchmark,
}


def run_cli(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, FitError, UndefinedMomentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
