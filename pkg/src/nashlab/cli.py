"""Command-line entry point: ``nashlab {gen,solve,train,eval,report,plot}``.

Exit codes: 0 on success, 1 on validation errors (bad flags, invalid inputs),
2 on runtime failures.  Diagnostics go to standard error; data only to files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as spec_io
from .game import (
    DiscountedGameSpec, LinearGameSpec, generate_random_discounted, generate_random_episodic,
)
from .harness import ALGORITHMS, ConfigError, ExperimentConfig, load_game, run_experiment
from .plot import plot_csv
from .solver import (
    EnumerationLimitError, PolicyPair, brute_force_solve, duality_gap, evaluate_pair_episodic,
    solve_discounted, solve_episodic,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _seed_list(text: str):
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _opponent(text: str) -> dict:
    """``fixed[:ACTION]``, ``random[:SEED]`` or ``best-response``."""
    name, _, arg = text.partition(":")
    if name == "fixed":
        return {"name": "fixed", "action": int(arg or 0)}
    if name == "random":
        return {"name": "random", "seed": int(arg or 0)}
    if name == "best-response":
        return {"name": "best-response"}
    raise UsageError(f"unknown opponent {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nashlab", description="Turn-based stochastic game lab.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random game spec")
    g.add_argument("--states", type=int, required=True)
    g.add_argument("--a1", type=int, required=True)
    g.add_argument("--a2", type=int, required=True)
    g.add_argument("--horizon", type=int, help="half horizon H (episodic)")
    g.add_argument("--gamma", type=float, help="discount factor; makes a discounted game")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve a game exactly")
    s.add_argument("--game", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--verify", action="store_true", help="cross-check against brute-force enumeration")

    t = sub.add_parser("train", help="run a learner and record regret")
    t.add_argument("--config", help="JSON experiment config; flags override its fields")
    t.add_argument("--alg", choices=ALGORITHMS)
    t.add_argument("--game")
    t.add_argument("--episodes", type=int)
    t.add_argument("--steps", type=int)
    t.add_argument("--seeds", type=_seed_list)
    t.add_argument("--c", type=float)
    t.add_argument("--c2", type=float)
    t.add_argument("--cbeta", type=float)
    t.add_argument("--p", type=float)
    t.add_argument("--gap-lower-bound", type=float)
    t.add_argument("--cadence", type=int)
    t.add_argument("--duality-every", type=int)
    t.add_argument("--opponent")
    t.add_argument("--fast", action="store_true", default=None)
    t.add_argument("--out-dir")

    e = sub.add_parser("eval", help="evaluate a policy pair exactly")
    e.add_argument("--game", required=True)
    e.add_argument("--policy", required=True, help='JSON file {"pi": [...], "mu": [...]}')
    e.add_argument("--out", required=True)

    r = sub.add_parser("report", help="summarize a training output directory")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--out", required=True)

    pl = sub.add_parser("plot", help="SVG chart of cumulative regret")
    pl.add_argument("--in", dest="inp", required=True)
    pl.add_argument("--out", required=True)
    return p


def cmd_gen(args):
    for name in ("states", "a1", "a2"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name} must be >= 1")
    if args.gamma is not None:
        if not 0 < args.gamma < 1:
            raise UsageError("--gamma must lie in (0, 1)")
        spec = generate_random_discounted(args.states, args.a1, args.a2, args.gamma, args.seed)
    else:
        if args.horizon is None or args.horizon < 1:
            raise UsageError("--horizon must be >= 1")
        spec = generate_random_episodic(args.states, args.a1, args.a2, args.horizon, args.seed)
    spec_io.write_spec(spec, args.out)


def cmd_solve(args):
    spec = load_game(args.game)
    if isinstance(spec, DiscountedGameSpec):
        sol = solve_discounted(spec, args.tol)
        spec_io.write_solution(sol, args.out)
        return
    tab = spec.to_episodic() if isinstance(spec, LinearGameSpec) else spec
    sol = solve_episodic(tab)
    extra = {"V1": float(tab.initial_distribution() @ sol.Vstar[0])}
    if args.verify:
        bf = brute_force_solve(tab)
        extra["brute_force_V1"] = bf
        extra["verified"] = abs(bf - extra["V1"]) <= 1e-10
        if not extra["verified"]:
            spec_io.write_solution(sol, args.out, extra)
            raise RuntimeError(f"brute-force value {bf!r} disagrees with backward induction {extra['V1']!r}")
    spec_io.write_solution(sol, args.out, extra)


def _train_config(args) -> ExperimentConfig:
    fields = {}
    if args.config:
        fields.update(json.loads(Path(args.config).read_text()))
    flag_map = {
        "alg": "algorithm", "game": "game", "episodes": "episodes", "steps": "steps",
        "seeds": "seeds", "c": "c", "c2": "c2", "cbeta": "c_beta", "p": "p",
        "gap_lower_bound": "gap_lower_bound", "cadence": "cadence",
        "duality_every": "duality_every", "fast": "fast", "out_dir": "output_dir",
    }
    for flag, key in flag_map.items():
        v = getattr(args, flag)
        if v is not None:
            fields[key] = v
    if args.opponent is not None:
        fields["opponent"] = _opponent(args.opponent)
    for key in ("algorithm", "game"):
        if key not in fields:
            raise UsageError(f"train needs --{'alg' if key == 'algorithm' else key}")
    if fields["algorithm"] == "lsvi-independent" and not fields.get("opponent"):
        raise UsageError("lsvi-independent requires --opponent")
    if "output_dir" not in fields:
        raise UsageError("train needs --out-dir")
    return ExperimentConfig.from_dict(fields)


def cmd_train(args):
    run_experiment(_train_config(args))


def cmd_eval(args):
    spec = load_game(args.game)
    if isinstance(spec, DiscountedGameSpec):
        raise UsageError("eval supports episodic and linear games")
    tab = spec.to_episodic() if isinstance(spec, LinearGameSpec) else spec
    doc = json.loads(Path(args.policy).read_text())
    try:
        pair = PolicyPair.from_parts(doc["pi"], doc["mu"])
    except KeyError as exc:
        raise UsageError(f"policy file lacks field {exc}") from None
    if len(pair.steps) != tab.num_steps or any(len(t) != tab.S for t in pair.steps):
        raise UsageError("policy tables do not match the game shape")
    for h, t in enumerate(pair.steps):
        if any(not 0 <= a < tab.num_actions(h) for a in t):
            raise UsageError(f"action index out of range at step {h + 1}")
    sol = solve_episodic(tab)
    w = tab.initial_distribution()
    V = evaluate_pair_episodic(tab, pair)
    out = {
        "V": V, "V1": float(w @ V[0]), "Vstar1": float(w @ sol.Vstar[0]),
        "regret": float(abs(w @ (sol.Vstar[0] - V[0]))),
        "duality_gap": duality_gap(tab, pair),
    }
    Path(args.out).write_text(spec_io.dumps_document(out), newline="\n")


def cmd_report(args):
    inp = Path(args.inp)
    summaries = sorted(inp.glob("*_summary.json")) if inp.is_dir() else [inp]
    if not summaries:
        raise UsageError(f"no *_summary.json found in {inp}")
    lines = []
    for path in summaries:
        s = json.loads(path.read_text())
        lines.append(f"# {s['algorithm']} ({path.name})")
        lines.append(f"length: {s['length']}, seeds: {s['seeds']}")
        lines.append(f"total regret: {s['total_regret_mean']:.6g} ± {s['total_regret_std']:.6g}")
        lines.append(f"concentration violation fraction (mean): {s['violation_fraction_mean']:.6g}")
        if "fit" in s:
            f = s["fit"]
            lines.append(
                f"log fit: regret ≈ {f['a']:.4g} + {f['b']:.4g} ln k, "
                f"R²_log = {f['r2_log']:.4f}, R²_linear = {f['r2_linear']:.4f}"
            )
        lines.append("")
    Path(args.out).write_text("\n".join(lines), newline="\n")


def cmd_plot(args):
    inp = Path(args.inp)
    if inp.suffix == ".json":
        s = json.loads(inp.read_text())
        inp = inp.with_name(f"{s['algorithm']}_aggregate.csv")
    plot_csv(inp, args.out)


COMMANDS = {
    "gen": cmd_gen, "solve": cmd_solve, "train": cmd_train,
    "eval": cmd_eval, "report": cmd_report, "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args)
    except (UsageError, ConfigError, spec_io.SpecFormatError, EnumerationLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
