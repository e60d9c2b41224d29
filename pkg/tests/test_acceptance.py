"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary and when this file is run as a script.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nashlab.cli import main as cli_main  # noqa: E402
from nashlab.game import g_disc, g_one, generate_random_episodic, lift_tabular_to_linear  # noqa: E402
from nashlab.harness import ExperimentConfig, fit_log_curve, run_experiment  # noqa: E402
from nashlab.linear import FixedPure, lsvi_centralized_run, lsvi_independent_run, spd_solve  # noqa: E402
from nashlab.solver import (  # noqa: E402
    brute_force_minmax, brute_force_solve, duality_gap, evaluate_pair_episodic, exact_gap_sum,
    pure_policy_count, solve_discounted, solve_episodic,
)
from nashlab.tabular import nashq_discounted_run  # noqa: E402
from oracles import gauss_solve, local_perturbations, random_pair  # noqa: E402

RESULTS = []
FIXTURE = dict(S=3, A1=2, A2=2, H=2, seed=7)
SEEDS = list(range(1, 11))


def record(n, ok, detail):
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, detail


def random_games(count, seed, limit=10**6):
    """Seeded games with S<=4, A1,A2<=3, H<=2, redrawing sizes that exceed the enumeration limit."""
    rng = np.random.default_rng(seed)
    games = []
    while len(games) < count:
        S, A1, A2, H = (int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 3)))
        if (A1 * A2) ** (S * H) > limit:
            continue
        games.append(generate_random_episodic(S, A1, A2, H, int(rng.integers(2**32))))
    return games


def test_c1_oracle_equivalence():
    t0 = time.perf_counter()
    worst_v = worst_mm = 0.0
    for spec in random_games(200, 1):
        assert pure_policy_count(spec) <= 10**6
        v = solve_episodic(spec).Vstar[0, spec.initial_state]
        maxmin, minmax = brute_force_minmax(spec)
        worst_v = max(worst_v, abs(v - brute_force_solve(spec)))
        worst_mm = max(worst_mm, abs(maxmin - minmax))
    dt = time.perf_counter() - t0
    ok = worst_v <= 1e-10 and worst_mm <= 1e-10 and dt < 30
    record(1, ok, f"200 games, max |V1*-bruteforce|={worst_v:.2e}, max |maxmin-minmax|={worst_mm:.2e}, {dt:.1f}s (<30s)")


def test_c2_gap_sum_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for spec in random_games(100, 2):
        sol = solve_episodic(spec)
        pair = random_pair(spec, rng)
        direct = sol.Vstar[0, 0] - evaluate_pair_episodic(spec, pair)[0, 0]
        worst = max(worst, abs(exact_gap_sum(spec, sol, pair) - direct))
    dt = time.perf_counter() - t0
    record(2, worst <= 1e-10 and dt < 5, f"100 instances, max deviation {worst:.2e} (<=1e-10), {dt:.2f}s (<5s)")


def test_c3_small_deviation_implies_nash():
    bad_small = missing_counter = checked = games = 0
    for spec in random_games(50, 3):
        sol = solve_episodic(spec)
        g = sol.gap_plus_min
        if g is None:
            continue
        games += 1
        has_counter = False
        for pair in local_perturbations(spec, sol.policy):
            dev = float(np.max(np.abs(sol.Vstar - evaluate_pair_episodic(spec, pair))))
            dg = duality_gap(spec, pair)
            if dev < g / 2:
                checked += 1
                bad_small += abs(dg) > 1e-10
            elif dev >= g and dg > 1e-10:
                has_counter = True
        missing_counter += not has_counter
    ok = bad_small == 0 and missing_counter == 0 and games > 0
    record(3, ok, f"{games} games: {checked} pairs with deviation < gap_plus_min/2, {bad_small} of them with "
                  f"nonzero duality gap; games lacking a counterexample: {missing_counter}")


@pytest.fixture(scope="module")
def alg1_run():
    cfg = ExperimentConfig("nashq-episodic", dict(FIXTURE), episodes=10**4, c=2.0, seeds=SEEDS, duality_every=10**4)
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    return res, time.perf_counter() - t0


def test_c4_regret_growth(alg1_run):
    res, dt = alg1_run
    inst = np.mean([r.column("inst_regret") for r in res.records], axis=0)
    n = inst.size // 10
    first, last = inst[:n].mean(), inst[-n:].mean()
    cum = np.mean([r.column("cum_regret") for r in res.records], axis=0)
    fit = fit_log_curve(cum, res.records[0].column("k"))
    ok = last <= 0.25 * first and fit.r2_log > fit.r2_linear and dt < 60
    record(4, ok, f"c=2: last-10% mean {last:.4f} vs first-10% mean {first:.4f} (ratio {last / first:.3f}, need <=0.25); "
                  f"R2_log={fit.r2_log:.4f} R2_linear={fit.r2_linear:.4f}; {dt:.1f}s (<60s)")


def test_c5_concentration(alg1_run):
    res, _ = alg1_run
    fracs = [r.violation_fraction for r in res.records]
    mean = float(np.mean(fracs))
    record(5, mean <= 0.01, f"violation fraction mean {mean:.4%} (<=1%), per seed {[round(f, 6) for f in fracs]}")


def test_c6_discounted_envelopes():
    spec = g_disc()
    qstar = solve_discounted(spec, 1e-10).Qstar[0][0, 0]
    monotone_bad = 0
    good_seeds = 0
    for seed in SEEDS:
        prev = {}

        def hook(view):
            nonlocal monotone_bad
            st_ = view.state
            if prev:
                for i in range(2):
                    monotone_bad += int(np.sum(st_.Qhat[i] > prev["hat"][i]))
                    monotone_bad += int(np.sum(st_.Qcheck[i] < prev["check"][i]))
            prev["hat"] = [q.copy() for q in st_.Qhat]
            prev["check"] = [q.copy() for q in st_.Qcheck]

        st_ = nashq_discounted_run(spec, 10**4, 4 * math.sqrt(2), 1.0, seed, hooks=[hook])
        if st_.Qcheck[0][0, 0] <= qstar + 1e-9 and qstar <= st_.Qhat[0][0, 0] + 1e-9:
            good_seeds += 1
    ok = monotone_bad == 0 and good_seeds >= 9
    record(6, ok, f"monotonicity violations {monotone_bad}; envelope holds on {good_seeds}/10 seeds (need >=9)")


def test_c7_elliptical_potential():
    lin = lift_tabular_to_linear(generate_random_episodic(**FIXTURE))
    state = lsvi_centralized_run(lin, 2000, seed=7)
    viol = sum(
        int(np.sum(pot > 2 * lin.d * math.log(1 + k))) for k, pot in enumerate(state.history_potential, start=1)
    )
    final = state.history_potential[-1]
    record(7, viol == 0 and state.potential_violations == 0,
           f"K=2000, violations {viol}; final potentials {np.round(final, 2).tolist()} vs bound {2 * lin.d * math.log(2001):.1f}")


def test_c8_lsvi_desk_scale():
    lin = lift_tabular_to_linear(g_one())
    spec = lin.to_episodic()
    vstar = solve_episodic(spec).Vstar[0, 0]
    cen_ok = ind_ok = 0
    for seed in SEEDS:
        last = {}
        st_ = lsvi_centralized_run(lin, 500, c_beta=1.0, seed=seed,
                                   hooks=[lambda v: last.update(pair=v.pair)])
        regret = abs(vstar - evaluate_pair_episodic(spec, last["pair"])[0, 0])
        cen_ok += regret == 0.0 and last["pair"].steps == ((0,), (0,)) and int(np.argmax(st_.Qbar[0][0])) == 0
        lsvi_independent_run(lin, 500, FixedPure.constant(1, 1, 1), c_beta=1.0, seed=seed,
                             hooks=[lambda v: last.update(pair=v.pair)])
        exploit = 1.5 - evaluate_pair_episodic(spec, last["pair"])[0, 0]
        ind_ok += exploit <= 1e-9
    record(8, cen_ok >= 9 and ind_ok >= 9,
           f"c_beta=1: centralized reaches regret 0 with (a0,b0) on {cen_ok}/10; independent vs b1 exploitability<=1e-9 on {ind_ok}/10")


def test_c9_numerical_core():
    rng = np.random.default_rng(9)
    worst_res = worst_oracle = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 33))
        M = rng.standard_normal((d, d))
        L = M @ M.T + np.eye(d)
        b = rng.standard_normal(d)
        x = spd_solve(L, b)
        worst_res = max(worst_res, float(np.max(np.abs(L @ x - b))) / (1 + float(np.max(np.abs(b)))))
        worst_oracle = max(worst_oracle, float(np.max(np.abs(x - np.array(gauss_solve(L, b))))))
    record(9, worst_res <= 1e-8 and worst_oracle <= 1e-9,
           f"1000 systems d<=32: max scaled residual {worst_res:.2e} (<=1e-8), max oracle gap {worst_oracle:.2e} (<=1e-9)")


def test_c10_reproducibility(tmp_path):
    commands = [
        ["--alg", "nashq-episodic", "--game", "g-one", "--episodes", "300", "--seeds", "1-3"],
        ["--alg", "nashq-discounted", "--game", "g-disc", "--steps", "500", "--seeds", "2", "--gap-lower-bound", "1"],
        ["--alg", "lsvi-independent", "--game", "g-one", "--episodes", "60", "--seeds", "1,2", "--opponent", "random:5"],
    ]
    mismatched = []
    for i, flags in enumerate(commands):
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / f"{i}{rep}"
            assert cli_main(["train", *flags, "--out-dir", str(d)]) == 0
            summary = next(d.glob("*_summary.json"))
            assert cli_main(["plot", "--in", str(summary), "--out", str(d / "plot.svg")]) == 0
            outs.append({p.name: p.read_bytes() for p in d.iterdir() if p.suffix in (".csv", ".svg")})
        if outs[0] != outs[1]:
            mismatched.append(flags[1])
    record(10, not mismatched, f"{len(commands)} train+plot commands repeated, mismatches: {mismatched or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
