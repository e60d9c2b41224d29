"""Optimistic Nash Q-learning for tabular turn-based games (episodic and discounted)."""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .game import DiscountedGameSpec, EpisodicGameSpec, is_max_step
from .rng import Xoshiro256
from .solver import PolicyPair, StationaryPolicyPair

MAX_COUNT = np.iinfo(np.int64).max
C2_DEFAULT = 4.0 * math.sqrt(2.0)


@contextmanager
def _read_only(arrays):
    for a in arrays:
        a.setflags(write=False)
    try:
        yield
    finally:
        for a in arrays:
            a.setflags(write=True)


def learning_rate(t: int, horizon: float) -> float:
    """(horizon + 1) / (horizon + t); horizon is 2H episodically, H when discounted."""
    return (horizon + 1.0) / (horizon + t)


@dataclass
class EpisodicLearnerState:
    """Upper/lower Q tables, value tables and visit counts of the episodic learner."""

    H: int
    c: float
    iota: float
    Qbar: list
    Qlow: list
    Vbar: np.ndarray
    Vlow: np.ndarray
    N: list

    @classmethod
    def fresh(cls, spec: EpisodicGameSpec, K: int, c: float):
        n = spec.num_steps
        T = n * K
        A = spec.A1 + spec.A2
        iota = math.log(spec.S * A * T * T)
        shapes = [(spec.S, spec.num_actions(h)) for h in range(n)]
        Vbar = np.full((n + 1, spec.S), float(n))
        Vbar[n] = 0.0
        return cls(
            spec.H, float(c), iota,
            [np.full(sh, float(n)) for sh in shapes],
            [np.zeros(sh) for sh in shapes],
            Vbar, np.zeros((n + 1, spec.S)),
            [np.zeros(sh, dtype=np.int64) for sh in shapes],
        )

    def arrays(self):
        return [*self.Qbar, *self.Qlow, self.Vbar, self.Vlow, *self.N]

    def bonus(self, t: int) -> float:
        return self.c * math.sqrt((2 * self.H) ** 3 * self.iota / t)

    @property
    def total_visits(self) -> int:
        return int(sum(n.sum() for n in self.N))


def extract_greedy_pair(state: EpisodicLearnerState) -> PolicyPair:
    """argmax Q̄ on max steps, argmin Q̲ on min steps (lowest index on ties)."""
    steps = []
    for h in range(len(state.Qbar)):
        if is_max_step(h):
            steps.append(tuple(int(a) for a in np.argmax(state.Qbar[h], axis=1)))
        else:
            steps.append(tuple(int(a) for a in np.argmin(state.Qlow[h], axis=1)))
    return PolicyPair(tuple(steps))


@dataclass
class EpisodeView:
    """What hooks see after each episode.

    ``pair`` is the greedy pair the episode was played with, ``trajectory`` the
    visited ``(h, s, a)`` triples and ``widths`` the pre-update Q̄ − Q̲ at each.
    """

    k: int
    state: object
    pair: object
    s1: int
    trajectory: list = field(default_factory=list)
    widths: list = field(default_factory=list)


def nashq_episodic_run(spec: EpisodicGameSpec, K: int, c: float = 2.0, seed: int = 0, hooks=()):
    """Run optimistic Nash Q-learning for ``K`` episodes; return the final learner state."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if c < 0:
        raise ValueError("c must be nonnegative")
    if spec.num_steps * K > MAX_COUNT:
        raise OverflowError("total step count 2H*K overflows the visit counters")
    state = EpisodicLearnerState.fresh(spec, K, c)
    rng = Xoshiro256(seed)
    n = spec.num_steps
    horizon = float(n)
    Qbar, Qlow, Vbar, Vlow, N = state.Qbar, state.Qlow, state.Vbar, state.Vlow, state.N
    for k in range(1, K + 1):
        pair = extract_greedy_pair(state)
        s = spec.sample_initial(rng)
        s1 = s
        traj, widths = [], []
        for h in range(n):
            a = pair.steps[h][s]
            s_next = rng.choice(spec.transitions[h][s, a]) if h + 1 < n else 0
            traj.append((h, s, a))
            widths.append(float(Qbar[h][s, a] - Qlow[h][s, a]))
            N[h][s, a] += 1
            t = int(N[h][s, a])
            beta = state.bonus(t)
            alpha = learning_rate(t, horizon)
            r = spec.rewards[h][s, a]
            Qbar[h][s, a] = (1 - alpha) * Qbar[h][s, a] + alpha * (r + Vbar[h + 1, s_next] + beta)
            Qlow[h][s, a] = (1 - alpha) * Qlow[h][s, a] + alpha * (r + Vlow[h + 1, s_next] - beta)
            Vbar[h, s] = Qbar[h][s, a]
            Vlow[h, s] = Qlow[h][s, a]
            s = s_next
        if hooks:
            view = EpisodeView(k, state, pair, s1, traj, widths)
            with _read_only(state.arrays()):
                for hook in hooks:
                    hook(view)
    return state


# ---------------------------------------------------------------- discounted


def effective_horizon(gamma: float, gap_lower_bound: float) -> float:
    """log(2 / ((1-γ) g)) / log(1/γ)."""
    if gap_lower_bound <= 0:
        raise ValueError("gap_lower_bound must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    return math.log(2.0 / ((1.0 - gamma) * gap_lower_bound)) / math.log(1.0 / gamma)


@dataclass
class DiscountedLearnerState:
    """Tables of the discounted learner; index 0 is the max side, 1 the min side.

    Value tables are kept per (parity, state): the turn at a state depends on
    the parity of the global step.
    """

    gamma: float
    c2: float
    H: float
    T: int
    S: int
    A: int
    Qbar: list
    Qlow: list
    Qhat: list
    Qcheck: list
    Vhat: np.ndarray
    Vcheck: np.ndarray
    N: list

    @classmethod
    def fresh(cls, spec: DiscountedGameSpec, T: int, c2: float, H: float):
        top = 1.0 / (1.0 - spec.gamma)
        shapes = [(spec.S, spec.A1), (spec.S, spec.A2)]
        return cls(
            spec.gamma, float(c2), H, T, spec.S, spec.A1 + spec.A2,
            [np.full(sh, top) for sh in shapes],
            [np.zeros(sh) for sh in shapes],
            [np.full(sh, top) for sh in shapes],
            [np.zeros(sh) for sh in shapes],
            np.full((2, spec.S), top),
            np.zeros((2, spec.S)),
            [np.zeros(sh, dtype=np.int64) for sh in shapes],
        )

    def arrays(self):
        return [*self.Qbar, *self.Qlow, *self.Qhat, *self.Qcheck, self.Vhat, self.Vcheck, *self.N]

    def iota(self, k: int) -> float:
        return math.log(self.S * self.A * self.T * (k + 1) * (k + 2))

    def bonus(self, k: int) -> float:
        return self.c2 / (1.0 - self.gamma) * math.sqrt(self.H * self.iota(k) / k)


def greedy_stationary_pair(state: DiscountedLearnerState) -> StationaryPolicyPair:
    return StationaryPolicyPair(
        tuple(int(a) for a in np.argmax(state.Qbar[0], axis=1)),
        tuple(int(a) for a in np.argmin(state.Qlow[1], axis=1)),
    )


@dataclass
class StepView:
    """Hook payload of the discounted learner: step ``t`` (1-based) before its update."""

    t: int
    state: object
    pair: object
    parity: int
    s: int
    a: int
    width: float


def nashq_discounted_run(
    spec: DiscountedGameSpec, T: int, c2: float = C2_DEFAULT, gap_lower_bound: float = None,
    seed: int = 0, hooks=(), cadence: int = 1,
):
    """Run the discounted learner for ``T`` steps.

    Hooks are called with a :class:`StepView` after every ``cadence``-th step
    update; ``view.pair`` is the greedy pair that chose the action at that step.
    """
    if gap_lower_bound is None or gap_lower_bound <= 0:
        raise ValueError("gap_lower_bound must be a positive lower bound on the minimal gap")
    if T < 1:
        raise ValueError("T must be >= 1")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    H = effective_horizon(spec.gamma, gap_lower_bound)
    state = DiscountedLearnerState.fresh(spec, T, c2, H)
    rng = Xoshiro256(seed)
    g = spec.gamma
    s = spec.initial_state
    for t in range(1, T + 1):
        side = (t - 1) % 2          # t odd -> max side (0)
        Qb, Ql = state.Qbar[side], state.Qlow[side]
        if side == 0:
            a = int(np.argmax(Qb[s]))
        else:
            a = int(np.argmin(Ql[s]))
        want_hook = hooks and t % cadence == 0
        pair = greedy_stationary_pair(state) if want_hook else None
        width = float(state.Qhat[side][s, a] - state.Qcheck[side][s, a])
        r = spec.rewards[side][s, a]
        s_next = rng.choice(spec.transitions[side][s, a])
        nxt = 1 - side
        state.N[side][s, a] += 1
        k = int(state.N[side][s, a])
        b = state.bonus(k)
        alpha = learning_rate(k, H)
        Qb[s, a] = (1 - alpha) * Qb[s, a] + alpha * (r + g * state.Vhat[nxt, s_next] + b)
        Ql[s, a] = (1 - alpha) * Ql[s, a] + alpha * (r + g * state.Vcheck[nxt, s_next] - b)
        state.Qhat[side][s, a] = min(state.Qhat[side][s, a], Qb[s, a])
        state.Qcheck[side][s, a] = max(state.Qcheck[side][s, a], Ql[s, a])
        state.Vhat[side, s] = state.Qhat[side][s, a]
        state.Vcheck[side, s] = state.Qcheck[side][s, a]
        if want_hook:
            view = StepView(t, state, pair, side, s, a, width)
            with _read_only(state.arrays()):
                for hook in hooks:
                    hook(view)
        s = s_next
    return state
