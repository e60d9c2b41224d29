"""Experiment orchestration: regret accounting, concentration checks, diagnostics and CSV output."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import io as spec_io
from .game import (
    DiscountedGameSpec, EpisodicGameSpec, LinearGameSpec, g_disc, g_one,
    generate_random_discounted, generate_random_episodic, lift_tabular_to_linear, validate,
)
from .linear import C_BETA_DEFAULT, lsvi_centralized_run, lsvi_independent_run, make_opponent
from .solver import (
    duality_gap, evaluate_pair_discounted, evaluate_pair_episodic, exact_gap_sum,
    best_response_tables_max, solve_discounted, solve_episodic,
)
from .tabular import C2_DEFAULT, nashq_discounted_run, nashq_episodic_run

ALGORITHMS = ("nashq-episodic", "nashq-discounted", "lsvi-centralized", "lsvi-independent")
CSV_COLUMNS = ("k", "inst_regret", "cum_regret", "conc_violations", "duality_gap")
CONC_TOL = 1e-9


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- small pure helpers


def clip(x: float, g: float) -> float:
    """x if x >= g else 0."""
    if g <= 0:
        raise ValueError("clip threshold must be positive")
    return x if x >= g else 0.0


@dataclass
class PeelingHistogram:
    counts: list
    clipped: int
    g_min: float
    overflow: int = 0

    @property
    def edges(self):
        return [self.g_min * 2.0 ** n for n in range(len(self.counts) + 1)]


def peeling_histogram(samples, g_min: float, horizon: float) -> PeelingHistogram:
    """Counts per dyadic interval [2^{n-1} g, 2^n g), n = 1..ceil(log2(horizon/g)).

    ``horizon`` is the episode length 2H.  Samples below ``g_min`` are reported as
    clipped; samples at or above the top edge are folded into the last interval
    (and also tallied in ``overflow``), so the counts sum to the unclipped total.
    """
    if g_min <= 0:
        raise ValueError("g_min must be positive")
    N = max(1, math.ceil(math.log2(horizon / g_min)))
    counts = [0] * N
    clipped = overflow = 0
    for x in samples:
        if x < g_min:
            clipped += 1
            continue
        n = int(math.floor(math.log2(x / g_min))) + 1
        # guard log2 round-off at the interval edges
        while n > 1 and x < g_min * 2.0 ** (n - 1):
            n -= 1
        while x >= g_min * 2.0 ** n:
            n += 1
        if n > N:
            overflow += 1
            n = N
        counts[n - 1] += 1
    return PeelingHistogram(counts, clipped, g_min, overflow)


class LogFit(NamedTuple):
    a: float
    b: float
    r2_log: float
    r2_linear: float


def _r2(y, X):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    return coef, (1.0 - ss_res / ss_tot) if ss_tot > 0 else 1.0


def fit_log_curve(series, ks=None) -> LogFit:
    """Fit a + b ln k and a' + b' k to the back half of a cumulative-regret series."""
    y = np.asarray(series, dtype=float)
    if y.size < 10:
        raise ValueError("need at least 10 points")
    k = np.arange(1, y.size + 1, dtype=float) if ks is None else np.asarray(ks, dtype=float)
    half = y.size // 2
    y, k = y[half:], k[half:]
    if np.all(y == y[0]):
        return LogFit(float(y[0]), 0.0, 1.0, 1.0)
    ones = np.ones_like(k)
    (a, b), r2_log = _r2(y, np.column_stack([ones, np.log(k)]))
    _, r2_lin = _r2(y, np.column_stack([ones, k]))
    return LogFit(float(a), float(b), float(r2_log), float(r2_lin))


@dataclass
class ConcentrationEntry:
    violations: int
    size: int

    @property
    def fraction(self) -> float:
        return self.violations / self.size if self.size else 0.0


def check_concentration(upper, lower, qstar, tol: float = CONC_TOL) -> ConcentrationEntry:
    """Count entries where the lower table exceeds Q* + tol or the upper falls below Q* − tol.

    Tables are sequences of equally shaped arrays; ``lower`` may be None.
    """
    if len(upper) != len(qstar) or (lower is not None and len(lower) != len(qstar)):
        raise ValueError("table count mismatch")
    bad = size = 0
    for i, q in enumerate(qstar):
        u = np.asarray(upper[i])
        if u.shape != q.shape:
            raise ValueError(f"shape mismatch at table {i}: {u.shape} vs {q.shape}")
        viol = u < q - tol
        if lower is not None:
            lo = np.asarray(lower[i])
            if lo.shape != q.shape:
                raise ValueError(f"shape mismatch at table {i}: {lo.shape} vs {q.shape}")
            viol = viol | (lo > q + tol)
        bad += int(viol.sum())
        size += q.size
    return ConcentrationEntry(bad, size)


# ---------------------------------------------------------------- records and CSV


@dataclass
class RecordRow:
    k: int
    inst_regret: float
    cum_regret: float
    conc_violations: int
    duality_gap: float | None = None


@dataclass
class RunRecord:
    """Evaluation rows of one seeded run plus end-of-run summaries."""

    seed: int
    rows: list = field(default_factory=list)
    total_regret: float = 0.0
    conc_violations: int = 0
    conc_checked: int = 0
    peeling: PeelingHistogram | None = None
    potential_violations: int = 0
    wall_time: float = 0.0

    @property
    def violation_fraction(self) -> float:
        return self.conc_violations / self.conc_checked if self.conc_checked else 0.0

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def emit_csv(rows, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in rows:
                w.writerow([_fmt(r.k), _fmt(r.inst_regret), _fmt(r.cum_regret), _fmt(r.conc_violations), _fmt(r.duality_gap)])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list:
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:3]) != CSV_COLUMNS[:3]:
            raise ValueError(f"{path}: not a regret CSV (header {header!r})")
        for lineno, line in enumerate(reader, start=2):
            try:
                rows.append(RecordRow(
                    int(line[0]), float(line[1]), float(line[2]), int(line[3]),
                    float(line[4]) if len(line) > 4 and line[4] != "" else None,
                ))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from exc
    return rows


def aggregate_rows(records) -> list:
    """Per-k mean and standard deviation across seeds (rows must align)."""
    ks = [r.k for r in records[0].rows]
    for rec in records[1:]:
        if [r.k for r in rec.rows] != ks:
            raise ValueError("records do not share evaluation points")
    out = []
    for i, k in enumerate(ks):
        inst = np.array([rec.rows[i].inst_regret for rec in records])
        cum = np.array([rec.rows[i].cum_regret for rec in records])
        conc = np.array([rec.rows[i].conc_violations for rec in records], dtype=float)
        out.append((k, inst.mean(), inst.std(), cum.mean(), cum.std(), conc.mean()))
    return out


def emit_aggregate_csv(records, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("k", "inst_regret_mean", "inst_regret_std", "cum_regret_mean", "cum_regret_std", "conc_violations_mean"))
        for row in aggregate_rows(records):
            w.writerow([_fmt(row[0])] + [_fmt(float(x)) for x in row[1:]])


# ---------------------------------------------------------------- config


def default_cadence(n: int) -> int:
    return 1 if n <= 10**4 else math.ceil(n / 10**4)


@dataclass
class ExperimentConfig:
    algorithm: str
    game: object
    episodes: int | None = None
    steps: int | None = None
    c: float = 2.0
    c2: float = C2_DEFAULT
    c_beta: float = C_BETA_DEFAULT
    p: float | None = None
    gap_lower_bound: float | None = None
    seeds: list = field(default_factory=lambda: [0])
    cadence: int | None = None
    duality_every: int = 100
    opponent: dict | None = None
    output_dir: str | None = None
    fast: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.cadence is not None and self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if self.algorithm == "nashq-discounted":
            if not self.steps or self.steps < 1:
                raise ConfigError("nashq-discounted needs steps >= 1")
        elif not self.episodes or self.episodes < 1:
            raise ConfigError(f"{self.algorithm} needs episodes >= 1")
        if self.algorithm == "lsvi-independent" and not self.opponent:
            raise ConfigError("lsvi-independent needs an opponent")
        if self.duality_every < 1:
            raise ConfigError("duality_every must be >= 1")

    @property
    def length(self) -> int:
        return self.steps if self.algorithm == "nashq-discounted" else self.episodes

    @property
    def effective_cadence(self) -> int:
        return self.cadence or default_cadence(self.length)

    @classmethod
    def from_dict(cls, d: dict):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def load_game(source):
    """Game from a spec path, a fixture name, or a generator parameter dict."""
    if isinstance(source, (str, Path)):
        if source in ("g-one", "G-ONE"):
            return g_one()
        if source in ("g-disc", "G-DISC"):
            return g_disc()
        spec = spec_io.read_spec(source)
    elif isinstance(source, dict):
        params = dict(source)
        kind = params.pop("generator", "episodic")
        if kind == "episodic":
            spec = generate_random_episodic(params["S"], params["A1"], params["A2"], params["H"], params.get("seed", 0))
        elif kind == "discounted":
            spec = generate_random_discounted(params["S"], params["A1"], params["A2"], params["gamma"], params.get("seed", 0))
        else:
            raise ConfigError(f"unknown generator {kind!r}")
    elif isinstance(source, (EpisodicGameSpec, DiscountedGameSpec, LinearGameSpec)):
        spec = source
    else:
        raise ConfigError(f"cannot interpret game source {source!r}")
    report = validate(spec)
    if not report.ok:
        raise ConfigError(f"invalid game: {report}")
    return spec


# ---------------------------------------------------------------- per-algorithm accounting


class _EpisodicAccountant:
    """Turns per-episode views into evaluation rows against the exact solution."""

    def __init__(self, spec, solution, cadence, duality_every, concentration, independent=False):
        self.spec, self.sol = spec, solution
        self.cadence, self.duality_every = cadence, duality_every
        self.concentration, self.independent = concentration, independent
        self.values = {}       # policy fingerprint -> V₁^{π,μ} row
        self.gap_sums = {}
        self.br = {}           # min-player fingerprint -> (V^{†,μ} row, Q tables)
        self.rows, self.widths = [], []
        self.cum = 0.0
        self.last_pair = None
        self.conc_bad = self.conc_size = 0

    def _value(self, pair):
        v = self.values.get(pair)
        if v is None:
            v = evaluate_pair_episodic(self.spec, pair)[0]
            self.values[pair] = v
        return v

    def _best_response(self, mu):
        hit = self.br.get(mu)
        if hit is None:
            V, Q = best_response_tables_max(self.spec, mu)
            hit = (V[0], Q)
            self.br[mu] = hit
        return hit

    def _regret(self, pair, s1):
        if self.independent:
            return float(self._best_response(pair.mu)[0][s1] - self._value(pair)[s1])
        diff = float(self.sol.Vstar[0][s1] - self._value(pair)[s1])
        key = (pair, s1)
        if key not in self.gap_sums:
            self.gap_sums[key] = exact_gap_sum(self.spec, self.sol, pair, s1)
        if abs(abs(diff) - abs(self.gap_sums[key])) > 1e-10:
            raise AssertionError("regret and exact gap sum disagree")
        return abs(diff)

    def __call__(self, view):
        k = view.k
        self.widths.extend(view.widths)
        if k % self.cadence == 0 or self.last_pair is None:
            self.last_pair = view.pair
        inst = self._regret(self.last_pair, view.s1)
        self.cum += inst
        if k % self.cadence != 0:
            return
        bad = 0
        if self.concentration is not None:
            entry = self.concentration(view, self)
            bad = entry.violations
            self.conc_bad += entry.violations
            self.conc_size += entry.size
        dg = None
        if not self.independent and k % self.duality_every == 0:
            dg = duality_gap(self.spec, view.pair, view.s1)
        self.rows.append(RecordRow(k, inst, self.cum, bad, dg))


def _conc_tabular(view, acct):
    return check_concentration(view.state.Qbar, view.state.Qlow, acct.sol.Qstar)


def _conc_independent(view, acct):
    _, Q = acct._best_response(view.pair.mu)
    idx = range(0, len(Q), 2)
    return check_concentration([view.state.Qbar[h] for h in idx], None, [Q[h] for h in idx])


class _DiscountedAccountant:
    def __init__(self, spec, solution, cadence):
        self.spec, self.sol, self.cadence = spec, solution, cadence
        self.values = {}
        self.rows, self.widths = [], []
        self.cum = 0.0
        self.last_pair = None
        self.conc_bad = self.conc_size = 0

    def __call__(self, view):
        t = view.t
        self.widths.append(view.width)
        if view.pair is not None:
            self.last_pair = view.pair
        v = self.values.get(self.last_pair)
        if v is None:
            v = evaluate_pair_discounted(self.spec, self.last_pair)
            self.values[self.last_pair] = v
        inst = abs(float(self.sol.Vstar[view.parity, view.s] - v[view.parity, view.s]))
        self.cum += inst
        if t % self.cadence != 0:
            return
        entry = check_concentration(view.state.Qhat, view.state.Qcheck, self.sol.Qstar)
        self.conc_bad += entry.violations
        self.conc_size += entry.size
        self.rows.append(RecordRow(t, inst, self.cum, entry.violations, None))


def run_seed(config: ExperimentConfig, spec, solution, seed: int) -> RunRecord:
    """One seeded run of the configured learner with regret accounting."""
    start = time.perf_counter()
    cad = config.effective_cadence
    alg = config.algorithm
    potential_violations = 0
    if alg == "nashq-discounted":
        acct = _DiscountedAccountant(spec, solution, cad)
        g = config.gap_lower_bound if config.gap_lower_bound is not None else solution.gap_plus_min
        # the accountant carries the last evaluated pair between cadence points
        nashq_discounted_run(spec, config.steps, config.c2, g, seed, hooks=[acct], cadence=1)
        horizon = 1.0 / (1.0 - spec.gamma)
    else:
        tab = spec.to_episodic() if isinstance(spec, LinearGameSpec) else spec
        if alg == "nashq-episodic":
            acct = _EpisodicAccountant(tab, solution, cad, config.duality_every, _conc_tabular)
            nashq_episodic_run(tab, config.episodes, config.c, seed, hooks=[acct])
        else:
            lspec = spec if isinstance(spec, LinearGameSpec) else lift_tabular_to_linear(spec)
            if alg == "lsvi-centralized":
                acct = _EpisodicAccountant(tab, solution, cad, config.duality_every, _conc_tabular)
                st = lsvi_centralized_run(lspec, config.episodes, config.c_beta, config.p, seed, [acct], config.fast)
            else:
                opp = dict(config.opponent)
                opponent = make_opponent(opp.pop("name"), tab, **opp)
                acct = _EpisodicAccountant(tab, solution, cad, config.duality_every, _conc_independent, independent=True)
                st = lsvi_independent_run(lspec, config.episodes, opponent, config.c_beta, config.p, seed, [acct], config.fast)
            potential_violations = st.potential_violations
        horizon = float(tab.num_steps)
    peel = None
    if solution.gap_plus_min is not None:
        peel = peeling_histogram(acct.widths, solution.gap_plus_min, horizon)
    return RunRecord(
        seed, acct.rows, acct.cum, acct.conc_bad, acct.conc_size, peel,
        potential_violations, time.perf_counter() - start,
    )


def solve_for(config: ExperimentConfig, spec):
    if config.algorithm == "nashq-discounted":
        if not isinstance(spec, DiscountedGameSpec):
            raise ConfigError("nashq-discounted needs a discounted game")
        sol = solve_discounted(spec, 1e-10)
        if config.gap_lower_bound is None and sol.all_zero:
            raise ConfigError("all gaps are zero: the discounted learner needs a positive minimal gap")
        return sol
    if isinstance(spec, DiscountedGameSpec):
        raise ConfigError(f"{config.algorithm} needs an episodic or linear game")
    tab = spec.to_episodic() if isinstance(spec, LinearGameSpec) else spec
    return solve_episodic(tab)


def _worker_count(n_seeds: int, workers: int | None) -> int:
    if workers is not None:
        return max(1, min(workers, n_seeds))
    env = os.environ.get("NASHLAB_THREADS")
    if env:
        return max(1, min(int(env), n_seeds))
    return n_seeds


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    summary: dict
    files: list = field(default_factory=list)


def summarize(config: ExperimentConfig, records) -> dict:
    totals = np.array([r.total_regret for r in records])
    summary = {
        "algorithm": config.algorithm,
        "seeds": list(config.seeds),
        "length": config.length,
        "total_regret_mean": float(totals.mean()),
        "total_regret_std": float(totals.std()),
        "total_regret_per_seed": [float(x) for x in totals],
        "violation_fraction_per_seed": [r.violation_fraction for r in records],
        "violation_fraction_mean": float(np.mean([r.violation_fraction for r in records])),
        "potential_violations": int(sum(r.potential_violations for r in records)),
    }
    if all(len(r.rows) >= 10 for r in records):
        cum = np.mean([r.column("cum_regret") for r in records], axis=0)
        fit = fit_log_curve(cum, records[0].column("k"))
        summary["fit"] = fit._asdict()
    if records[0].peeling is not None:
        summary["peeling"] = [
            {"seed": r.seed, "counts": r.peeling.counts, "clipped": r.peeling.clipped, "overflow": r.peeling.overflow}
            for r in records
        ]
    return summary


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Solve the game once, run every seed, and write per-seed + aggregate outputs."""
    spec = load_game(config.game)
    solution = solve_for(config, spec)
    n = _worker_count(len(config.seeds), workers)
    if n == 1:
        records = [run_seed(config, spec, solution, s) for s in config.seeds]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            futures = [pool.submit(run_seed, config, spec, solution, s) for s in config.seeds]
            records = [f.result() for f in futures]
    summary = summarize(config, records)
    result = ExperimentResult(config, records, summary)
    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for rec in records:
            path = out / f"{config.algorithm}_seed{rec.seed}.csv"
            emit_csv(rec.rows, path)
            result.files.append(path)
        agg = out / f"{config.algorithm}_aggregate.csv"
        emit_aggregate_csv(records, agg)
        result.files.append(agg)
        summ = out / f"{config.algorithm}_summary.json"
        summ.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        result.files.append(summ)
    return result


def config_to_dict(config: ExperimentConfig) -> dict:
    return asdict(config)
