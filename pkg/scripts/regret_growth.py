"""Regret-growth experiment for the episodic learner on the seed-7 fixture.

Prints early/late per-episode regret, the log/linear fit of the mean
cumulative regret, and writes CSVs and an SVG to the output directory.

    python scripts/regret_growth.py --c 2 --episodes 10000 --out runs/growth
"""

import argparse
from pathlib import Path

import numpy as np

from nashlab.harness import ExperimentConfig, fit_log_curve, run_experiment
from nashlab.plot import plot_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", type=float, default=2.0)
    ap.add_argument("--episodes", type=int, default=10**4)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", default="runs/growth")
    args = ap.parse_args()

    game = dict(S=3, A1=2, A2=2, H=2, seed=7)
    cfg = ExperimentConfig("nashq-episodic", game, episodes=args.episodes, c=args.c,
                           seeds=list(range(1, args.seeds + 1)), output_dir=args.out)
    res = run_experiment(cfg)
    inst = np.mean([r.column("inst_regret") for r in res.records], axis=0)
    n = max(1, inst.size // 10)
    cum = np.mean([r.column("cum_regret") for r in res.records], axis=0)
    fit = fit_log_curve(cum, res.records[0].column("k"))
    print(f"c={args.c}  first-10% {inst[:n].mean():.4f}  last-10% {inst[-n:].mean():.4f}  "
          f"ratio {inst[-n:].mean() / max(inst[:n].mean(), 1e-300):.3f}")
    print(f"fit: {fit.a:.4g} + {fit.b:.4g} ln k  R2_log={fit.r2_log:.4f}  R2_linear={fit.r2_linear:.4f}")
    plot_csv(Path(args.out) / "nashq-episodic_aggregate.csv", Path(args.out) / "regret.svg")


if __name__ == "__main__":
    main()
