"""Command line entry point: ``logitcde {simulate,fit,predict,evaluate,cv,curves}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .dataset import load_table, write_table
from .experiment import (
    METHOD_LABELS,
    ExperimentConfig,
    FittedCDE,
    MethodConfig,
    cv_table,
    emit_quantile_curves,
    fit_method,
    run_cv,
    run_simulation_study,
)
from .predict import cdf_at
from .scoring import ScoreReport, TrueConditional, crps, crps_divergence, true_cdf
from .simgen import ScenarioConfig, generate

log = logging.getLogger("logitcde")


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _write_json(obj, path):
    text = json.dumps(obj, indent=1)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _parse_filter(items):
    out = {}
    for item in items or []:
        col, _, value = item.partition("=")
        if not _:
            raise SystemExit(f"--filter expects column=value, got {item!r}")
        out[col] = value
    return out


def _load(args):
    return load_table(args.data, args.response, args.group, args.delimiter,
                      row_filter=_parse_filter(args.filter))


def _data_args(p, response_required=True):
    p.add_argument("--data", required=True, help="delimited input file with a header row")
    p.add_argument("--response", required=response_required, default="y", help="response column")
    p.add_argument("--group", default=None, help="group column (e.g. storm id)")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--filter", action="append", metavar="COL=VALUE",
                   help="keep rows whose COL equals VALUE (repeatable)")


def _method_config(args) -> MethodConfig:
    d = _read_json(args.config) if getattr(args, "config", None) else {}
    return MethodConfig.from_dict(d)


# ------------------------------------------------------------------ commands


def cmd_simulate(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.export_only:
        for s in args.scenarios:
            for n in args.n:
                for r in range(args.replicates):
                    ss = np.random.SeedSequence([args.seed, s, n, r])
                    train, test, truth = generate(ScenarioConfig(s, n, ss))
                    stem = out / f"model{s}_n{n}_rep{r}"
                    write_table(train, f"{stem}_train.csv")
                    write_table(test, f"{stem}_test.csv")
                    _write_json(truth.to_dict(), f"{stem}_truth.json")
        return 0
    cfg = _read_json(args.config) if args.config else {}
    cfg.setdefault("scenarios", args.scenarios)
    cfg.setdefault("n_list", args.n)
    cfg.setdefault("replicates", args.replicates)
    cfg.setdefault("methods", args.methods)
    cfg.setdefault("master_seed", args.seed)
    cfg.setdefault("threads", args.threads)
    cfg["out_dir"] = str(out)
    config = ExperimentConfig.from_dict(cfg)
    scores, summary, timing = run_simulation_study(config)
    print(summary.to_string(index=False))
    return 0


def cmd_fit(args):
    data = _load(args)
    cfg = _method_config(args)
    fitted = fit_method(data, args.method, args.omega, cfg, args.seed)
    fitted.save(args.out)
    log.info("wrote %s", args.out)
    return 0


def cmd_predict(args):
    fitted = FittedCDE.load(args.model)
    data = _load(args)
    ests = fitted.predict(data.features, args.L, args.grid_mode)
    frames = [pd.DataFrame({"row": i, "grid_index": np.arange(len(e.y_grid)), "z": e.z_grid,
                            "y": e.y_grid, "probability": e.probabilities, "cdf": e.cdf})
              for i, e in enumerate(ests)]
    pd.concat(frames, ignore_index=True).to_csv(args.out, index=False)
    return 0


def cmd_evaluate(args):
    fitted = FittedCDE.load(args.model)
    data = _load(args)
    lo, hi = fitted.range_info.bounds
    ests = fitted.predict(data.features, args.L, "cutpoint")
    if args.truth:
        truth = TrueConditional.from_dict(_read_json(args.truth))
        scores = [crps_divergence(lambda y, e=e: cdf_at(e, y), lambda y, i=i: true_cdf(truth, i, y),
                                  lo, hi, args.grid_points) for i, e in enumerate(ests)]
        kind = "crps_divergence"
    else:
        scores = [crps(lambda y, e=e: cdf_at(e, y), y_obs, lo, hi, args.grid_points)
                  for e, y_obs in zip(ests, data.response)]
        kind = "crps"
    report = ScoreReport.from_scores(scores, lo, hi, args.grid_points, kind=kind)
    _write_json(report.to_dict(), args.out)
    return 0


def cmd_cv(args):
    data = _load(args)
    cfg = _read_json(args.config) if args.config else {}
    omega = {m: args.omega for m in args.methods}
    omega.update(cfg.get("omega", {}))
    results = run_cv(data, args.k, args.methods, omega, cfg.get("method_config", {}), args.seed,
                     args.L, args.grid_points)
    table = cv_table(results)
    print(table.to_string(index=False))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / "cv_table.csv", index=False)
        _write_json({m: r.to_dict() for m, r in results.items()}, out / "cv_report.json")
    return 0


def cmd_curves(args):
    fitted = FittedCDE.load(args.model)
    p = len(fitted.normalization.mean)
    if args.grid_file:
        cov = pd.read_csv(args.grid_file).to_numpy(dtype=float)
    else:
        values = [float(v) for v in args.values.split(",")]
        cov = np.tile(fitted.normalization.mean, (len(values), 1))
        cov[:, args.column] = values
    if cov.shape[1] != p:
        raise SystemExit(f"model expects {p} covariates, grid has {cov.shape[1]}")
    emit_quantile_curves(fitted, cov, args.L).to_csv(args.out, index=False)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logitcde", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="JSON config file")

    p = sub.add_parser("simulate", help="simulation study, or dataset export with --export-only")
    common(p)
    p.add_argument("--scenarios", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--n", type=int, nargs="+", default=[200, 1000, 4000])
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--methods", nargs="+", default=["poly-mcc", "mlp-mcc", "mlp-ipp"],
                   choices=sorted(METHOD_LABELS))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--export-only", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one method and write the model JSON")
    common(p)
    _data_args(p)
    p.add_argument("--method", default="poly-mcc", choices=sorted(METHOD_LABELS))
    p.add_argument("--omega", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="grid densities for every row of a data file")
    _data_args(p, response_required=False)
    p.add_argument("--model", required=True)
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--grid-mode", default="cutpoint", choices=["cutpoint", "quantile"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="CRPS (or CRPS divergence with --truth) of a fitted model")
    _data_args(p, response_required=False)
    p.add_argument("--model", required=True)
    p.add_argument("--truth", default=None, help="true-conditional JSON from simulate --export-only")
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--grid-points", type=int, default=1000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="grouped k-fold cross-validated CRPS")
    common(p)
    _data_args(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--methods", nargs="+", default=["poly-mcc", "ols-gaussian"],
                   choices=sorted(METHOD_LABELS))
    p.add_argument("--omega", type=float, default=1e-6)
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--grid-points", type=int, default=1000)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("curves", help="quantile-grid density curves over a covariate grid")
    p.add_argument("--model", required=True)
    p.add_argument("--values", default=None, help="comma-separated values for --column")
    p.add_argument("--column", type=int, default=0, help="covariate index varied by --values")
    p.add_argument("--grid-file", default=None, help="CSV of raw covariate rows instead of --values")
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curves)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "curves" and not (args.values or args.grid_file):
        raise SystemExit("curves needs --values or --grid-file")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
