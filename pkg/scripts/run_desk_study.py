#!/usr/bin/env python3
"""Desk-scale simulation study: all four scenarios, all methods, a few replicates.

    python3 scripts/run_desk_study.py --out-dir runs/desk --replicates 5 --threads 1

Writes scores.csv, summary.csv and timing.csv and prints the median table.
A JSON file passed with --config overrides any ExperimentConfig field.
"""

import argparse
import json
import logging

from logitcde.experiment import ExperimentConfig, run_simulation_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="runs/desk")
    ap.add_argument("--scenarios", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--n", type=int, nargs="+", default=[200])
    ap.add_argument("--replicates", type=int, default=5)
    ap.add_argument("--methods", nargs="+", default=["poly-mcc", "mlp-mcc", "mlp-ipp", "ols-gaussian"])
    ap.add_argument("--hidden", type=int, default=30, help="R = T for the network methods")
    ap.add_argument("--steps", type=int, default=600)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--config", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    net = {"R": args.hidden, "T": args.hidden, "sgd": {"total_steps": args.steps}}
    cfg = dict(scenarios=args.scenarios, n_list=args.n, replicates=args.replicates, methods=args.methods,
               method_config={"mlp-mcc": net, "mlp-ipp": net}, out_dir=args.out_dir,
               master_seed=args.seed, threads=args.threads)
    if args.config:
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    _, summary, timing = run_simulation_study(ExperimentConfig.from_dict(cfg))
    print(summary.to_string(index=False))
    print()
    print(timing.to_string(index=False))


if __name__ == "__main__":
    main()
