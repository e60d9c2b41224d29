"""Game specifications for two-player turn-based stochastic games.

Turn ownership is decided by step parity only.  Steps are stored 0-based, so
step index ``h`` (0-based) belongs to the max-player when ``h`` is even (the
1-based odd steps) and to the min-player otherwise.  States and actions are
0-based too; the labels ``s0``, ``a0``, ``b0`` in reports follow that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import Xoshiro256

ROW_TOL = 1e-9


def is_max_step(h: int) -> bool:
    """True when 0-based step ``h`` is a max-player step."""
    return h % 2 == 0


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _action_label(h: int, a: int) -> str:
    return f"a{a}" if is_max_step(h) else f"b{a}"


@dataclass(frozen=True, eq=False)
class EpisodicGameSpec:
    """Episodic game with ``2H`` steps.

    ``transitions[h]`` has shape ``(S, A_h, S)`` and ``rewards[h]`` shape
    ``(S, A_h)``, where ``A_h`` is ``A1`` on max steps and ``A2`` on min steps.
    ``initial_state`` is either a state index or a probability row over states.
    """

    H: int
    S: int
    A1: int
    A2: int
    transitions: tuple
    rewards: tuple
    initial_state: object = 0

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(_frozen(p) for p in self.transitions))
        object.__setattr__(self, "rewards", tuple(_frozen(r) for r in self.rewards))
        if not isinstance(self.initial_state, (int, np.integer)):
            object.__setattr__(self, "initial_state", _frozen(self.initial_state))
        else:
            object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def num_steps(self) -> int:
        return 2 * self.H

    def num_actions(self, h: int) -> int:
        return self.A1 if is_max_step(h) else self.A2

    @property
    def fixed_initial(self) -> bool:
        return isinstance(self.initial_state, int)

    def initial_distribution(self) -> np.ndarray:
        if self.fixed_initial:
            d = np.zeros(self.S)
            d[self.initial_state] = 1.0
            return d
        return np.asarray(self.initial_state, dtype=float)

    def sample_initial(self, rng: Xoshiro256) -> int:
        if self.fixed_initial:
            return self.initial_state
        return rng.choice(self.initial_state)

    def __eq__(self, other):
        if not isinstance(other, EpisodicGameSpec):
            return NotImplemented
        return (
            (self.H, self.S, self.A1, self.A2) == (other.H, other.S, other.A1, other.A2)
            and _arrays_equal(self.transitions, other.transitions)
            and _arrays_equal(self.rewards, other.rewards)
            and _initial_equal(self.initial_state, other.initial_state)
        )


@dataclass(frozen=True, eq=False)
class DiscountedGameSpec:
    """Infinite-horizon discounted game; turn alternates with global step parity.

    ``transitions = (P_max, P_min)`` with shapes ``(S, A1, S)`` and ``(S, A2, S)``;
    rewards likewise.  The first step (t = 1) belongs to the max-player.
    """

    S: int
    A1: int
    A2: int
    gamma: float
    transitions: tuple
    rewards: tuple
    initial_state: int = 0

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(_frozen(p) for p in self.transitions))
        object.__setattr__(self, "rewards", tuple(_frozen(r) for r in self.rewards))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "initial_state", int(self.initial_state))

    def num_actions(self, parity: int) -> int:
        return self.A1 if parity == 0 else self.A2

    def __eq__(self, other):
        if not isinstance(other, DiscountedGameSpec):
            return NotImplemented
        return (
            (self.S, self.A1, self.A2, self.gamma, self.initial_state)
            == (other.S, other.A1, other.A2, other.gamma, other.initial_state)
            and _arrays_equal(self.transitions, other.transitions)
            and _arrays_equal(self.rewards, other.rewards)
        )


@dataclass(frozen=True, eq=False)
class LinearGameSpec:
    """Episodic game given through features.

    ``phi[h]``: ``(S, A_h, d)``; ``theta[h]``: ``(S, d)`` so that
    ``P_h(s'|s,a) = phi[h][s, a] @ theta[h][s']``; ``mu[h]``: ``(d,)`` so that
    ``r_h(s,a) = phi[h][s, a] @ mu[h]``.
    """

    H: int
    S: int
    A1: int
    A2: int
    d: int
    phi: tuple
    theta: tuple
    mu: tuple
    initial_state: object = 0

    def __post_init__(self):
        for name in ("phi", "theta", "mu"):
            object.__setattr__(self, name, tuple(_frozen(x) for x in getattr(self, name)))
        if not isinstance(self.initial_state, (int, np.integer)):
            object.__setattr__(self, "initial_state", _frozen(self.initial_state))
        else:
            object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def num_steps(self) -> int:
        return 2 * self.H

    def num_actions(self, h: int) -> int:
        return self.A1 if is_max_step(h) else self.A2

    def reconstruct_transitions(self) -> tuple:
        return tuple(np.einsum("sad,td->sat", f, th) for f, th in zip(self.phi, self.theta))

    def reconstruct_rewards(self) -> tuple:
        return tuple(f @ m for f, m in zip(self.phi, self.mu))

    def to_episodic(self) -> EpisodicGameSpec:
        return EpisodicGameSpec(
            self.H, self.S, self.A1, self.A2,
            self.reconstruct_transitions(), self.reconstruct_rewards(), self.initial_state,
        )

    def __eq__(self, other):
        if not isinstance(other, LinearGameSpec):
            return NotImplemented
        return (
            (self.H, self.S, self.A1, self.A2, self.d) == (other.H, other.S, other.A1, other.A2, other.d)
            and _arrays_equal(self.phi, other.phi)
            and _arrays_equal(self.theta, other.theta)
            and _arrays_equal(self.mu, other.mu)
            and _initial_equal(self.initial_state, other.initial_state)
        )


def _arrays_equal(xs, ys) -> bool:
    return len(xs) == len(ys) and all(
        x.shape == y.shape and np.array_equal(x, y) for x, y in zip(xs, ys)
    )


def _initial_equal(a, b) -> bool:
    if isinstance(a, int) or isinstance(b, int):
        return isinstance(a, int) and isinstance(b, int) and a == b
    return np.array_equal(a, b)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "ok"
        return "\n".join(self.violations)


def _check_rows(report, P, where, S):
    if P.ndim != 3 or P.shape[2] != S:
        report.violations.append(f"transition table shape {P.shape} at {where()} does not end in S={S}")
        return
    for s in range(P.shape[0]):
        for a in range(P.shape[1]):
            row = P[s, a]
            if np.any(row < 0):
                report.violations.append(f"negative transition probability at {where(s, a)}")
            total = float(row.sum())
            if not math.isfinite(total) or abs(total - 1.0) > ROW_TOL:
                report.violations.append(f"row sum {total!r} ≠ 1 at {where(s, a)}")


def _check_rewards(report, r, where):
    for s in range(r.shape[0]):
        for a in range(r.shape[1]):
            v = float(r[s, a])
            if not (0.0 <= v <= 1.0):
                report.violations.append(f"reward out of [0,1] at {where(s, a)}: {v!r}")


def _check_initial(report, init, S):
    if isinstance(init, int):
        if not 0 <= init < S:
            report.violations.append(f"initial state {init} out of range 0..{S - 1}")
        return
    init = np.asarray(init)
    if init.shape != (S,) or np.any(init < 0) or abs(float(init.sum()) - 1.0) > ROW_TOL:
        report.violations.append("initial distribution is not a probability row over states")


def _check_counts(report, **counts):
    for name, v in counts.items():
        if int(v) < 1:
            report.violations.append(f"{name} must be a positive integer, got {v}")


def validate(spec) -> ValidationReport:
    """Collect every violated invariant of a game spec (never raises)."""
    report = ValidationReport()
    if isinstance(spec, EpisodicGameSpec):
        _check_counts(report, H=spec.H, S=spec.S, A1=spec.A1, A2=spec.A2)
        if not report.ok:
            return report
        if len(spec.transitions) != spec.num_steps or len(spec.rewards) != spec.num_steps:
            report.violations.append(f"expected {spec.num_steps} steps of transitions and rewards")
            return report
        for h in range(spec.num_steps):
            A = spec.num_actions(h)
            P, r = spec.transitions[h], spec.rewards[h]
            if P.shape[:2] != (spec.S, A) or r.shape != (spec.S, A):
                report.violations.append(
                    f"step {h + 1} tables have shape {P.shape}/{r.shape}, expected ({spec.S}, {A}, ...)"
                )
                continue

            def where(s=None, a=None, h=h):
                return f"({h + 1},s{s},{_action_label(h, a)})" if s is not None else f"step {h + 1}"

            _check_rows(report, P, where, spec.S)
            _check_rewards(report, r, where)
        _check_initial(report, spec.initial_state, spec.S)
    elif isinstance(spec, DiscountedGameSpec):
        _check_counts(report, S=spec.S, A1=spec.A1, A2=spec.A2)
        if not report.ok:
            return report
        if not 0.0 < spec.gamma < 1.0:
            report.violations.append(f"discount {spec.gamma} not in (0,1)")
        for parity, side in ((0, "max"), (1, "min")):
            A = spec.num_actions(parity)
            P, r = spec.transitions[parity], spec.rewards[parity]
            if P.shape[:2] != (spec.S, A) or r.shape != (spec.S, A):
                report.violations.append(f"{side} tables have shape {P.shape}/{r.shape}")
                continue

            def where(s=None, a=None, side=side, parity=parity):
                return f"({side},s{s},{_action_label(parity, a)})" if s is not None else side

            _check_rows(report, P, where, spec.S)
            _check_rewards(report, r, where)
        _check_initial(report, spec.initial_state, spec.S)
    elif isinstance(spec, LinearGameSpec):
        _check_counts(report, H=spec.H, S=spec.S, A1=spec.A1, A2=spec.A2, d=spec.d)
        if not report.ok:
            return report
        for h in range(spec.num_steps):
            A = spec.num_actions(h)
            f, th, m = spec.phi[h], spec.theta[h], spec.mu[h]
            if f.shape != (spec.S, A, spec.d) or th.shape != (spec.S, spec.d) or m.shape != (spec.d,):
                report.violations.append(f"step {h + 1}: feature/measure dimensions do not match d={spec.d}")
                continue
            P = np.einsum("sad,td->sat", f, th)
            r = f @ m

            def where(s=None, a=None, h=h):
                return f"({h + 1},s{s},{_action_label(h, a)})" if s is not None else f"step {h + 1}"

            _check_rows(report, P, where, spec.S)
            _check_rewards(report, r, where)
            norms = np.linalg.norm(f, axis=-1)
            if np.any(norms > 1.0 + 1e-12):
                report.warnings.append(f"step {h + 1}: feature norm {norms.max():.6g} exceeds 1")
            if np.linalg.norm(m) > math.sqrt(spec.d) + 1e-12:
                report.warnings.append(f"step {h + 1}: reward weight norm exceeds sqrt(d)")
            if theta_norm(th) > math.sqrt(spec.d) + 1e-12:
                report.warnings.append(f"step {h + 1}: measure norm exceeds sqrt(d)")
        _check_initial(report, spec.initial_state, spec.S)
    else:
        report.violations.append(f"unknown spec type {type(spec).__name__}")
    return report


def theta_norm(theta_h) -> float:
    """‖θ_h(S)‖: Euclidean norm of the total measure Σ_{s'} θ_h(s')."""
    return float(np.linalg.norm(np.asarray(theta_h).sum(axis=0)))


def generate_random_episodic(S: int, A1: int, A2: int, H: int, seed: int) -> EpisodicGameSpec:
    """Random episodic game, fully determined by the arguments.

    Per step, transition rows are normalized uniform(0,1] draws (row-major over
    ``(s, a, s')``), followed by uniform [0,1) rewards over ``(s, a)``.
    """
    for name, v in (("S", S), ("A1", A1), ("A2", A2), ("H", H)):
        if int(v) < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    rng = Xoshiro256(seed)
    transitions, rewards = [], []
    for h in range(2 * H):
        A = A1 if is_max_step(h) else A2
        P = np.empty((S, A, S))
        for s in range(S):
            for a in range(A):
                row = [rng.random_open0() for _ in range(S)]
                total = math.fsum(row)
                P[s, a] = [x / total for x in row]
        r = np.array([[rng.random() for _ in range(A)] for _ in range(S)])
        transitions.append(P)
        rewards.append(r)
    return EpisodicGameSpec(H, S, A1, A2, tuple(transitions), tuple(rewards), 0)


def generate_random_discounted(S: int, A1: int, A2: int, gamma: float, seed: int) -> DiscountedGameSpec:
    """Discounted counterpart of :func:`generate_random_episodic` (max tables first)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    base = generate_random_episodic(S, A1, A2, 1, seed)
    return DiscountedGameSpec(S, A1, A2, gamma, base.transitions, base.rewards, 0)


def lift_tabular_to_linear(spec: EpisodicGameSpec) -> LinearGameSpec:
    """One-hot embedding: ``d = S*(A1+A2)``, max actions first within each state block."""
    S, A1, A2 = spec.S, spec.A1, spec.A2
    d = S * (A1 + A2)

    def idx(h, s, a):
        return s * (A1 + A2) + (a if is_max_step(h) else A1 + a)

    phi, theta, mu = [], [], []
    for h in range(spec.num_steps):
        A = spec.num_actions(h)
        f = np.zeros((S, A, d))
        th = np.zeros((S, d))
        m = np.zeros(d)
        for s in range(S):
            for a in range(A):
                i = idx(h, s, a)
                f[s, a, i] = 1.0
                th[:, i] = spec.transitions[h][s, a]
                m[i] = spec.rewards[h][s, a]
        phi.append(f)
        theta.append(th)
        mu.append(m)
    return LinearGameSpec(spec.H, S, A1, A2, d, tuple(phi), tuple(theta), tuple(mu), spec.initial_state)


def g_one() -> EpisodicGameSpec:
    """Single-state, H=1 fixture: rewards 1 / 0.25 for the max-player, 0 / 0.5 for the min-player."""
    loop = np.ones((1, 2, 1))
    return EpisodicGameSpec(
        1, 1, 2, 2,
        (loop, loop),
        (np.array([[1.0, 0.25]]), np.array([[0.0, 0.5]])),
        0,
    )


def g_disc(gamma: float = 0.5) -> DiscountedGameSpec:
    """Single-state discounted fixture: max rewards 1 / 0, one min action with reward 0."""
    return DiscountedGameSpec(
        1, 2, 1, gamma,
        (np.ones((1, 2, 1)), np.ones((1, 1, 1))),
        (np.array([[1.0, 0.0]]), np.array([[0.0]])),
        0,
    )


def zero_reward_game(S: int, A1: int, A2: int, H: int, seed: int = 0) -> EpisodicGameSpec:
    base = generate_random_episodic(S, A1, A2, H, seed)
    return EpisodicGameSpec(
        H, S, A1, A2, base.transitions, tuple(np.zeros_like(r) for r in base.rewards), 0
    )
