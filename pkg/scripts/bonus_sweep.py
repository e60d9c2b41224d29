"""Sweep the bonus constant c of the episodic learner on the seed-7 fixture.

For each c, reports the late/early per-episode regret ratio, the fit R² pair
and the concentration violation fraction, averaged over seeds.

    python scripts/bonus_sweep.py --cs 0.05 0.1 0.5 1 2
"""

import argparse

import numpy as np

from nashlab.harness import ExperimentConfig, fit_log_curve, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cs", type=float, nargs="+", default=[0.05, 0.1, 0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--episodes", type=int, default=10**4)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    game = dict(S=3, A1=2, A2=2, H=2, seed=7)
    print(f"{'c':>6} {'first10':>9} {'last10':>9} {'ratio':>7} {'R2_log':>7} {'R2_lin':>7} {'viol':>8}")
    for c in args.cs:
        cfg = ExperimentConfig("nashq-episodic", game, episodes=args.episodes, c=c,
                               seeds=list(range(1, args.seeds + 1)), duality_every=args.episodes)
        res = run_experiment(cfg)
        inst = np.mean([r.column("inst_regret") for r in res.records], axis=0)
        n = max(1, inst.size // 10)
        first, last = inst[:n].mean(), inst[-n:].mean()
        cum = np.mean([r.column("cum_regret") for r in res.records], axis=0)
        fit = fit_log_curve(cum, res.records[0].column("k"))
        viol = np.mean([r.violation_fraction for r in res.records])
        ratio = last / first if first > 0 else float("nan")
        print(f"{c:6.3g} {first:9.4f} {last:9.4f} {ratio:7.3f} {fit.r2_log:7.4f} {fit.r2_linear:7.4f} {viol:8.2%}")


if __name__ == "__main__":
    main()
