"""Command line entry point: ``rpls fit | predict | simulate | operator``.

Exit codes: 0 success, 2 invalid input or configuration, 3 fit failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import errors as E
from .io import (
    load_model,
    load_operator,
    read_labels,
    read_matrix,
    read_positions,
    save_model,
    save_operator,
    write_csv,
)
from .linalg import standardize
from .operators import epanechnikov_laplacian, operator_bandwidth_search
from .penalties import PenaltySpec, groups_from_boundaries
from .pipeline import fit, transform
from .prediction import (
    compose_regression,
    confusion,
    encode_classes,
    fit_regression,
    lda_fit,
    lda_predict,
    misclassification,
    mspe,
    predict,
)
from .selection import BicSelector, select_k_sparse
from .simbench import SCENARIOS, run_scenario, scenario
from .solver import SolverOptions

log = logging.getLogger("rpls")

EXIT_OK, EXIT_INPUT, EXIT_FIT = 0, 2, 3

# Errors that mean "the inputs are wrong" rather than "the numerics failed".
INPUT_ERRORS = (
    E.CsvFormatError,
    E.ModelFormatError,
    E.DimensionMismatch,
    E.BadShape,
    E.EmptyInput,
    E.BadGroups,
    E.BadRange,
    E.BadBandwidth,
    E.NotSymmetric,
    E.ClassCodingError,
    E.TooFewSamples,
    FileNotFoundError,
    KeyError,
    ValueError,
)


class UsageError(Exception):
    pass


def _threads(args):
    if getattr(args, "threads", None):
        return int(args.threads)
    env = os.environ.get("RPLS_THREADS")
    return int(env) if env else 1


def _load_config(args):
    """Merge a JSON config file under explicitly given command line flags."""
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, attr) in (None, False):
            setattr(args, attr, value)
    return args


# Defaults applied after a --config file has filled in unset flags.
FIT_DEFAULTS = {"K": 2, "penalty": "none", "select": "fixed", "grid_size": 25, "seed": 0, "out": "rpls_out"}


def _apply_defaults(args, defaults):
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _settings(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config", "out")}


def _penalty(args, p):
    groups = None
    if args.penalty == "group":
        if not args.groups:
            raise UsageError("--groups is required with --penalty group")
        groups = groups_from_boundaries([int(b) for b in str(args.groups).split(",")], p)
    return PenaltySpec(args.penalty, float(args.lam or 0.0), bool(args.nonneg), groups)


def cmd_fit(args):
    _apply_defaults(args, FIT_DEFAULTS)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X, xnames = read_matrix(args.x)
    if (args.y is None) == (args.labels is None):
        raise UsageError("give exactly one of --y or --labels")
    coding = None
    if args.labels is not None:
        labels = read_labels(args.labels)
        coding = encode_classes(labels)
        Y = coding.Y
    else:
        Y, _ = read_matrix(args.y)
    if Y.shape[0] != X.shape[0]:
        raise E.DimensionMismatch(f"X has {X.shape[0]} rows, responses have {Y.shape[0]}")
    data = standardize(X, Y, scale_x=not args.center_only, scale_y=bool(args.scale_y))
    Q = load_operator(args.operator) if args.operator else None
    base = _penalty(args, data.p)
    penalty = BicSelector(base, count=args.grid_size) if args.select == "bic" else base
    opts = SolverOptions(seed=args.seed)
    K = min(int(args.K), data.n - 1, data.p)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = fit(data, K, penalty, Q, opts)
    for w in caught:
        log.warning("%s", w.message)

    settings = _settings(args)
    regression = lda = None
    if coding is not None:
        lda = lda_fit(model.Z, labels)
    elif args.select_k:
        ks = select_k_sparse(model.Z, data.Y, count=args.grid_size, strict=False)
        regression = compose_regression(model, ks.B)
        write_csv(out / "gamma_path.csv", ["gamma", "bic", "K"], ks.rows(), settings, args.seed)
    else:
        regression = fit_regression(model, Y)
    save_model(out / "model.json", model, regression, lda, meta={"settings": settings})

    rows = []
    for k, res in enumerate(model.diagnostics):
        rows.append(
            [k + 1, model.lambdas[k], int(np.count_nonzero(model.V[:, k])), res.iterations,
             int(res.converged), res.objective[0], res.objective[-1]]
        )
    write_csv(
        out / "fit_report.csv",
        ["factor", "lambda", "support", "iterations", "converged", "objective_start", "objective_final"],
        rows, settings, args.seed,
    )
    write_csv(
        out / "loadings.csv",
        ["variable"] + [f"v{k + 1}" for k in range(model.K)],
        [[xnames[j]] + model.V[j].tolist() for j in range(model.p)],
        settings, args.seed,
    )
    bic_rows = []
    for k, rep in enumerate(model.selections):
        if rep is not None:
            bic_rows += [[k + 1, *r] for r in rep.rows()]
    if bic_rows:
        write_csv(out / "bic_path.csv", ["factor", "lambda", "bic", "df", "degenerate"], bic_rows, settings, args.seed)
    print(f"fitted {model.K} factor(s); support sizes {[int(r[2]) for r in rows]}")
    for r in rows:
        print(f"  factor {r[0]}: lambda={r[1]:.4g} df={r[2]} iterations={r[3]}")
    if model.stop_reason:
        print(f"  stopped early: {model.stop_reason}")
    return EXIT_OK


def cmd_predict(args):
    model, regression, lda = load_model(args.model)
    X, _ = read_matrix(args.x)
    settings = _settings(args)
    out = Path(args.out)
    if lda is not None:
        Z = transform(model, X)
        scores = lda.scores(Z)
        pred = lda_predict(lda, Z)
        header = ["label"] + [f"score_{c}" for c in lda.classes]
        write_csv(out, header, [[p_] + s.tolist() for p_, s in zip(pred, scores)], settings, None)
        if args.truth:
            truth = read_labels(args.truth)
            err = misclassification(pred, truth)
            classes, C = confusion(pred, truth)
            print(f"misclassification {err:.4f}")
            print("confusion (rows true, cols predicted): " + " ".join(map(str, classes)))
            for c, row in zip(classes, C):
                print(f"  {c}: {' '.join(map(str, row))}")
        return EXIT_OK
    if regression is None:
        raise E.ModelFormatError("model file holds neither a regression nor a classifier")
    Yhat = predict(regression, model, X)
    write_csv(out, [f"y{j + 1}" for j in range(Yhat.shape[1])], Yhat.tolist(), settings, None)
    if args.truth:
        truth, _ = read_matrix(args.truth)
        print(f"mspe {mspe(Yhat, truth):.6g}")
    return EXIT_OK


def cmd_simulate(args):
    if args.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario!r}; choose from {', '.join(sorted(SCENARIOS))}")
    cfg = scenario(args.scenario, replicates=args.replicates, seed=args.seed, threads=_threads(args))
    metrics = run_scenario(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    settings = _settings(args)
    fields = ("mspe", "tpr", "fpr", "K", "lam", "gamma")
    rows = []
    for i, rep in enumerate(metrics.per_replicate):
        if rep is None:
            continue
        for method in cfg.methods:
            r = rep[method]
            rows.append([i, method] + [getattr(r, f) for f in fields])
    write_csv(out / f"{cfg.scenario}_replicates.csv", ["replicate", "method", *fields], rows, settings, cfg.seed)
    table = []
    for method, row in metrics.summary().items():
        cells = [method]
        for metric in ("mspe", "tpr", "fpr", "K"):
            mean, sd = row.get(metric, (float("nan"), float("nan")))
            cells += [mean, sd]
        table.append(cells)
    header = ["method", "mspe", "mspe_sd", "tpr", "tpr_sd", "fpr", "fpr_sd", "K", "K_sd"]
    write_csv(out / f"{cfg.scenario}_table.csv", header, table, settings, cfg.seed)
    print(f"scenario {cfg.scenario}: n={cfg.n} p={cfg.p} q={cfg.q} snr={cfg.snr} replicates={cfg.replicates}")
    print(f"{'method':<8}{'MSPE (SD)':>20}{'TPR':>8}{'FPR':>8}")
    for cells in table:
        print(f"{cells[0]:<8}{cells[1]:>12.2f} ({cells[2]:6.2f}){cells[3]:>8.2f}{cells[5]:>8.2f}")
    print(f"failures: {len(metrics.failures)}")
    for f in metrics.failures:
        print(f"  {f}")
    return EXIT_OK


def cmd_operator(args):
    positions = read_positions(args.positions)
    settings = _settings(args)
    if args.bandwidths:
        if not args.x:
            raise UsageError("--bandwidths needs --x for the explained-variance search")
        X, _ = read_matrix(args.x)
        candidates = [float(h) for h in str(args.bandwidths).split(",")]
        Q, scores = operator_bandwidth_search(X, positions, candidates)
        rows = [[h, scores[h]] for h in sorted(scores)]
        write_csv(Path(args.out).with_suffix(".search.csv"), ["bandwidth", "explained_variance"], rows, settings, None)
        print(f"chosen bandwidth {Q.bandwidth}")
        for h, s in rows:
            print(f"  h={h:g}: explained variance {s:.6g}")
    elif args.bandwidth is not None:
        Q = epanechnikov_laplacian(positions, float(args.bandwidth))
    else:
        raise UsageError("give --bandwidth or --bandwidths")
    save_operator(args.out, Q, extra={"settings": settings})
    print(f"operator {Q.kind} p={Q.p} bandwidth={Q.bandwidth} min eigenvalue={Q.min_eigenvalue:.3g}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="rpls", description="Regularized and generalized PLS.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a model from CSV data")
    f.add_argument("--x", required=True, help="predictor CSV (header row, one row per sample)")
    f.add_argument("--y", help="response CSV")
    f.add_argument("--labels", "--classes", dest="labels", help="class label CSV (one column); enables discriminant coding + LDA")
    f.add_argument("--K", type=int, help="number of factors (default 2)")
    f.add_argument("--penalty", choices=("none", "lasso", "group"), help="default none")
    f.add_argument("--lam", type=float, default=None)
    f.add_argument("--select", choices=("fixed", "bic"), help="per-factor lambda rule (default fixed)")
    f.add_argument("--grid-size", type=int, help="lambda / gamma grid points (default 25)")
    f.add_argument("--groups", help="comma-separated group start offsets for the group lasso")
    f.add_argument("--nonneg", action="store_true")
    f.add_argument("--operator", help="operator JSON written by `rpls operator`")
    f.add_argument("--select-k", action="store_true", help="pick factors by the sparse gamma rule")
    f.add_argument("--center-only", action="store_true", help="do not scale X columns")
    f.add_argument("--scale-y", action="store_true")
    f.add_argument("--out", help="output directory (default rpls_out)")
    f.add_argument("--seed", type=int, help="default 0")
    f.add_argument("--config", help="JSON file with any of the options above")
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="apply a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--truth", help="responses or labels for scoring")
    p.add_argument("--out", default="predictions.csv")
    p.add_argument("--config")
    p.set_defaults(func=cmd_predict)

    s = sub.add_parser("simulate", help="run a simulation scenario")
    s.add_argument("scenario", help=", ".join(sorted(SCENARIOS)))
    s.add_argument("--replicates", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--threads", type=int, default=None, help="replicate workers (default $RPLS_THREADS or 1)")
    s.add_argument("--out", default="sim_out")
    s.add_argument("--config")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("operator", help="build an Epanechnikov-weighted Laplacian")
    o.add_argument("--positions", required=True, help="CSV: one numeric column, or a numeric header row")
    o.add_argument("--bandwidth", type=float)
    o.add_argument("--bandwidths", help="comma-separated candidates; requires --x")
    o.add_argument("--x")
    o.add_argument("--out", default="operator.json")
    o.add_argument("--config")
    o.set_defaults(func=cmd_operator)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = _load_config(args)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (E.DegenerateFactor, E.AllDegenerate, E.NotPSD, E.DegenerateOperator, E.SingularFactors,
            E.SingularCovariance, E.NegativeQuadraticForm, E.ZeroMatrix, E.NonOrthogonalFactors) as exc:
        print(f"fit failed ({type(exc).__module__}.{type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_FIT
    except INPUT_ERRORS as exc:
        print(f"invalid input ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
