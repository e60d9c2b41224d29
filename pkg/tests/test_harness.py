import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nashlab.game import g_one, zero_reward_game
from nashlab.harness import (
    ConfigError, ExperimentConfig, RecordRow, RunRecord, aggregate_rows, check_concentration, clip,
    default_cadence, emit_aggregate_csv, emit_csv, fit_log_curve, load_game, peeling_histogram,
    read_csv, run_experiment,
)
from nashlab.solver import solve_episodic
from nashlab.tabular import EpisodicLearnerState


def test_clip():
    assert clip(0.3, 0.5) == 0.0
    assert clip(0.5, 0.5) == 0.5
    assert clip(4.0, 0.1) == 4.0
    with pytest.raises(ValueError):
        clip(1.0, 0.0)


def test_peeling_example():
    hist = peeling_histogram([0.6, 1.3, 0.1], 0.5, 2.0)
    assert hist.clipped == 1
    assert hist.counts == [1, 1]
    assert hist.edges == [0.5, 1.0, 2.0]


def test_peeling_empty_and_overflow():
    assert peeling_histogram([], 0.5, 2.0).counts == [0, 0]
    hist = peeling_histogram([2.0, 7.0, 1.0], 0.5, 2.0)
    assert hist.counts == [0, 3] and hist.overflow == 2


@given(st.lists(st.floats(0, 10, allow_nan=False), max_size=50), st.floats(0.01, 2))
def test_peeling_conserves_counts(samples, g):
    hist = peeling_histogram(samples, g, 4.0)
    assert sum(hist.counts) + hist.clipped == len(samples)
    assert hist.clipped == sum(1 for x in samples if x < g)


def test_log_fit_on_exact_log_series():
    k = np.arange(1, 1001)
    fit = fit_log_curve(3 + 2 * np.log(k))
    assert abs(fit.b - 2) <= 1e-6 and abs(fit.a - 3) <= 1e-6
    assert fit.r2_log == pytest.approx(1.0, abs=1e-12)
    assert fit.r2_log > fit.r2_linear


def test_log_fit_on_linear_series():
    fit = fit_log_curve(np.arange(1, 1001, dtype=float))
    assert fit.r2_linear == pytest.approx(1.0)
    assert fit.r2_linear > fit.r2_log


def test_log_fit_degenerate_and_short():
    fit = fit_log_curve(np.full(20, 4.0))
    assert (fit.b, fit.r2_log, fit.r2_linear) == (0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        fit_log_curve(np.arange(9))


def test_concentration_checks(g1):
    sol = solve_episodic(g1)
    fresh = EpisodicLearnerState.fresh(g1, 10, 2.0)
    assert check_concentration(fresh.Qbar, fresh.Qlow, sol.Qstar).violations == 0
    upper = [q.copy() for q in fresh.Qbar]
    upper[0][0, 0] = 0.5
    entry = check_concentration(upper, fresh.Qlow, sol.Qstar)
    assert entry.violations == 1 and entry.size == 4 and entry.fraction == 0.25
    with pytest.raises(ValueError):
        check_concentration([np.zeros((1, 3))], None, [np.zeros((1, 2))])


def test_csv_layout_and_round_trip(tmp_path):
    rows = [RecordRow(1, 0.1 + 0.2, 0.30000000000000004, 0, None), RecordRow(2, 1 / 3, 0.6333333333333333, 2, 0.75)]
    path = tmp_path / "r.csv"
    emit_csv(rows, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "k,inst_regret,cum_regret,conc_violations,duality_gap"
    assert len(lines) == 3
    assert lines[1].endswith(",")
    assert read_csv(path) == rows


def test_emit_csv_reports_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit_csv([], tmp_path / "missing" / "r.csv")


def test_aggregate_of_identical_seeds(tmp_path):
    rows = [RecordRow(k, 0.5 / k, sum(0.5 / i for i in range(1, k + 1)), 0) for k in range(1, 6)]
    recs = [RunRecord(1, rows), RunRecord(2, rows)]
    agg = aggregate_rows(recs)
    for (k, im, isd, cm, csd, _), r in zip(agg, rows):
        assert (k, im, cm) == (r.k, r.inst_regret, r.cum_regret)
        assert isd == 0.0 and csd == 0.0
    emit_aggregate_csv(recs, tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().count("\n") == 6


def test_default_cadence():
    assert default_cadence(10**4) == 1
    assert default_cadence(10**4 + 1) == 2
    assert default_cadence(10**6) == 100


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("nope", "g-one", episodes=5)
    with pytest.raises(ConfigError):
        ExperimentConfig("nashq-episodic", "g-one")
    with pytest.raises(ConfigError):
        ExperimentConfig("lsvi-independent", "g-one", episodes=5)
    with pytest.raises(ConfigError, match="unknown config fields"):
        ExperimentConfig.from_dict({"algorithm": "nashq-episodic", "game": "g-one", "episodes": 3, "colour": 1})


def test_load_game_sources(tmp_path):
    assert load_game("g-one") == g_one()
    spec = load_game({"S": 2, "A1": 2, "A2": 2, "H": 1, "seed": 7})
    assert spec.S == 2
    with pytest.raises(ConfigError):
        load_game(3.5)


def test_experiment_outputs(tmp_path):
    cfg = ExperimentConfig("nashq-episodic", "g-one", episodes=10, seeds=[1, 2], output_dir=str(tmp_path))
    res = run_experiment(cfg, workers=1)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "nashq-episodic_aggregate.csv", "nashq-episodic_seed1.csv",
        "nashq-episodic_seed2.csv", "nashq-episodic_summary.json",
    ]
    for rec in res.records:
        cum = rec.column("cum_regret")
        assert np.all(np.diff(cum) >= 0)
        assert cum[-1] == pytest.approx(rec.column("inst_regret").sum(), abs=0)
        assert math.isclose(rec.total_regret, cum[-1])


def test_experiment_is_byte_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        cfg = ExperimentConfig("nashq-episodic", {"S": 2, "A1": 2, "A2": 2, "H": 1, "seed": 3},
                               episodes=200, seeds=[4, 5], c=0.5, output_dir=str(tmp_path / name))
        run_experiment(cfg, workers=2)
        outs.append({p.name: p.read_bytes() for p in (tmp_path / name).iterdir()})
    assert outs[0] == outs[1]


def test_zero_reward_game_has_no_regret():
    cfg = ExperimentConfig("nashq-episodic", zero_reward_game(2, 2, 2, 2, 1), episodes=100, seeds=[0])
    rec = run_experiment(cfg, workers=1).records[0]
    assert not rec.column("inst_regret").any()


def test_cadence_uses_most_recent_pair():
    cfg = ExperimentConfig("nashq-episodic", "g-one", episodes=100, cadence=10, seeds=[0], duality_every=50)
    rec = run_experiment(cfg, workers=1).records[0]
    assert [r.k for r in rec.rows] == list(range(10, 101, 10))
    assert [r.duality_gap is None for r in rec.rows].count(False) == 2


def test_discounted_and_linear_experiments():
    d = run_experiment(ExperimentConfig("nashq-discounted", "g-disc", steps=300, seeds=[1], gap_lower_bound=1.0), workers=1)
    assert len(d.records[0].rows) == 300
    lin = run_experiment(ExperimentConfig("lsvi-centralized", "g-one", episodes=50, c_beta=1.0, seeds=[7]), workers=1)
    assert lin.records[0].rows[-1].inst_regret == 0.0
    ind = run_experiment(ExperimentConfig(
        "lsvi-independent", "g-one", episodes=50, c_beta=1.0, seeds=[7], opponent={"name": "fixed", "action": 1},
    ), workers=1)
    assert ind.records[0].rows[-1].inst_regret <= 1e-9
