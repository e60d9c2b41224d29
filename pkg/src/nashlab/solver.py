"""Exact Nash values, best responses, gaps and policy evaluation.

These are the ground-truth oracles that every regret measurement uses.  All
argmax/argmin choices break ties toward the lowest action index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import DiscountedGameSpec, EpisodicGameSpec, is_max_step
from .rng import Xoshiro256

LEMMA1_TOL = 1e-10
MINIMAX_TOL = 1e-10
GAP_ZERO_TOL = 1e-12


class EnumerationLimitError(RuntimeError):
    """The requested brute-force enumeration exceeds the configured limit."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PolicyPair:
    """Deterministic Markov pair for an episodic game.

    ``steps[h][s]`` is the action taken at 0-based step ``h`` in state ``s``:
    an A1 index on max steps (even ``h``) and an A2 index on min steps.  The
    tuple-of-tuples form doubles as a hashable fingerprint.
    """

    steps: tuple

    @classmethod
    def from_parts(cls, pi, mu):
        steps = []
        for i in range(len(pi)):
            steps.append(tuple(int(a) for a in pi[i]))
            steps.append(tuple(int(a) for a in mu[i]))
        return cls(tuple(steps))

    @classmethod
    def from_tables(cls, tables):
        return cls(tuple(tuple(int(a) for a in t) for t in tables))

    @property
    def pi(self):
        return self.steps[0::2]

    @property
    def mu(self):
        return self.steps[1::2]

    def action(self, h: int, s: int) -> int:
        return self.steps[h][s]


@dataclass(frozen=True)
class StationaryPolicyPair:
    """Stationary pair for a discounted game, applied by step parity."""

    pi: tuple
    mu: tuple

    def action(self, parity: int, s: int) -> int:
        return self.pi[s] if parity == 0 else self.mu[s]


@dataclass(frozen=True, eq=False)
class NashSolution:
    """Backward-induction solution.

    ``Vstar`` has shape ``(2H+1, S)`` with a zero last row; ``Qstar``, ``gap``
    and ``gap_plus`` are tuples of per-step ``(S, A_h)`` arrays; ``policy`` is
    the Nash pair.  ``gap_plus_min`` is ``None`` when every gap is zero.
    """

    Vstar: np.ndarray
    Qstar: tuple
    gap: tuple
    gap_plus: tuple
    policy: PolicyPair
    gap_plus_min: float | None

    @property
    def all_zero(self) -> bool:
        return self.gap_plus_min is None

    @property
    def pi_star(self):
        return self.policy.pi

    @property
    def mu_star(self):
        return self.policy.mu


@dataclass(frozen=True, eq=False)
class DiscountedNashSolution:
    """Solution on parity-augmented states: index 0 = max-player to move, 1 = min-player."""

    Vstar: np.ndarray
    Qstar: tuple
    gap: tuple
    gap_plus: tuple
    pi: tuple
    mu: tuple
    gap_plus_min: float | None
    tol: float
    residual: float
    iterations: int

    @property
    def all_zero(self) -> bool:
        return self.gap_plus_min is None

    @property
    def policy(self) -> StationaryPolicyPair:
        return StationaryPolicyPair(self.pi, self.mu)


def backup(spec, h: int, v_next) -> np.ndarray:
    """Q_h = r_h + P_h V_{h+1} for every (s, a) of step ``h``."""
    return spec.rewards[h] + spec.transitions[h] @ v_next


def _min_positive(tables, zero_tol):
    best = None
    for g in tables:
        pos = g[g > zero_tol]
        if pos.size:
            m = float(pos.min())
            best = m if best is None else min(best, m)
    return best


def solve_episodic(spec: EpisodicGameSpec, zero_tol: float = GAP_ZERO_TOL) -> NashSolution:
    n = spec.num_steps
    V = np.zeros((n + 1, spec.S))
    Q, policy = [None] * n, [None] * n
    for h in reversed(range(n)):
        q = backup(spec, h, V[h + 1])
        a = np.argmax(q, axis=1) if is_max_step(h) else np.argmin(q, axis=1)
        V[h] = q[np.arange(spec.S), a]
        Q[h], policy[h] = q, a
    gap = tuple(V[h][:, None] - Q[h] for h in range(n))
    gap_plus = tuple(np.abs(g) for g in gap)
    for arr in (V, *Q, *gap, *gap_plus):
        arr.setflags(write=False)
    return NashSolution(
        V, tuple(Q), gap, gap_plus, PolicyPair.from_tables(policy), _min_positive(gap_plus, zero_tol)
    )


def initial_weights(spec, s1=None) -> np.ndarray:
    if s1 is None:
        return spec.initial_distribution()
    w = np.zeros(spec.S)
    w[s1] = 1.0
    return w


def evaluate_pair_episodic(spec: EpisodicGameSpec, pair: PolicyPair) -> np.ndarray:
    """Exact V^{π,μ} table of shape ``(2H+1, S)``."""
    n = spec.num_steps
    V = np.zeros((n + 1, spec.S))
    idx = np.arange(spec.S)
    for h in reversed(range(n)):
        a = np.asarray(pair.steps[h])
        V[h] = spec.rewards[h][idx, a] + spec.transitions[h][idx, a] @ V[h + 1]
    return V


def best_response_min(spec: EpisodicGameSpec, pi):
    """Min-player best response to max-player tables ``pi`` (one per max step).

    Returns ``(mu, V)`` where ``V`` is the ``(2H+1, S)`` table of V^{π,†}.
    """
    return _best_response(spec, pi, respond_on_max=False)


def best_response_max(spec: EpisodicGameSpec, mu):
    """Max-player best response to ``mu``; returns ``(pi, V^{†,μ})``."""
    return _best_response(spec, mu, respond_on_max=True)


def _best_response(spec, fixed, respond_on_max):
    n = spec.num_steps
    V = np.zeros((n + 1, spec.S))
    idx = np.arange(spec.S)
    response = []
    for h in reversed(range(n)):
        q = backup(spec, h, V[h + 1])
        if is_max_step(h) == respond_on_max:
            a = np.argmax(q, axis=1) if respond_on_max else np.argmin(q, axis=1)
            response.append(tuple(int(x) for x in a))
        else:
            a = np.asarray(fixed[h // 2])
        V[h] = q[idx, a]
    return tuple(reversed(response)), V


def best_response_tables_max(spec: EpisodicGameSpec, mu):
    """V^{†,μ} and all Q^{†,μ}_h(s, a) tables (every legal action at every step)."""
    n = spec.num_steps
    V = np.zeros((n + 1, spec.S))
    idx = np.arange(spec.S)
    Q = [None] * n
    for h in reversed(range(n)):
        q = backup(spec, h, V[h + 1])
        V[h] = q.max(axis=1) if is_max_step(h) else q[idx, np.asarray(mu[h // 2])]
        Q[h] = q
    return V, Q


def duality_gap(spec: EpisodicGameSpec, pair: PolicyPair, s1=None) -> float:
    """V₁^{†,μ}(s₁) − V₁^{π,†}(s₁), averaged over the initial law when ``s1`` is None."""
    w = initial_weights(spec, s1)
    _, v_dagger_mu = best_response_max(spec, pair.mu)
    _, v_pi_dagger = best_response_min(spec, pair.pi)
    return float(w @ v_dagger_mu[0] - w @ v_pi_dagger[0])


def occupancy(spec: EpisodicGameSpec, pair: PolicyPair, s1=None) -> np.ndarray:
    """Exact state distributions d_h under the pair, shape ``(2H, S)``."""
    n = spec.num_steps
    d = np.zeros((n, spec.S))
    d[0] = initial_weights(spec, s1)
    idx = np.arange(spec.S)
    for h in range(n - 1):
        a = np.asarray(pair.steps[h])
        d[h + 1] = d[h] @ spec.transitions[h][idx, a]
    return d


def exact_gap_sum(spec: EpisodicGameSpec, solution: NashSolution, pair: PolicyPair, s1=None) -> float:
    """E[Σ_h gap_h(s_h, a_h) | π, μ] by forward occupancy propagation.

    The result is checked against V₁*(s₁) − V₁^{π,μ}(s₁) computed by backward
    evaluation; a mismatch beyond 1e-10 raises AssertionError.
    """
    d = occupancy(spec, pair, s1)
    idx = np.arange(spec.S)
    total = math.fsum(
        float(d[h] @ solution.gap[h][idx, np.asarray(pair.steps[h])]) for h in range(spec.num_steps)
    )
    w = initial_weights(spec, s1)
    direct = float(w @ solution.Vstar[0] - w @ evaluate_pair_episodic(spec, pair)[0])
    if abs(total - direct) > LEMMA1_TOL:
        raise AssertionError(f"gap-sum identity violated: {total!r} vs {direct!r}")
    return total


def pure_policy_count(spec: EpisodicGameSpec) -> int:
    return (spec.A1 ** (spec.S * spec.H)) * (spec.A2 ** (spec.S * spec.H))


def _decision_rules(S: int, A: int) -> np.ndarray:
    """All A**S maps from states to actions, shape ``(A**S, S)``."""
    grids = np.meshgrid(*([np.arange(A)] * S), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1) if S else np.zeros((1, 0), dtype=int)


def brute_force_values(spec: EpisodicGameSpec, limit: int = 10**6) -> np.ndarray:
    """V₁^{π,μ} for every pure pair, as an array with one axis per step plus a state axis.

    Axis ``h`` enumerates the decision rules of step ``h``; evaluation is the
    plain backward recursion with both actions fixed, broadcast over all tails.
    """
    count = pure_policy_count(spec)
    if count > limit:
        raise EnumerationLimitError(f"{count} pure policy pairs exceed the limit {limit}")
    S = spec.S
    idx = np.arange(S)
    V = np.zeros(S)
    for h in reversed(range(spec.num_steps)):
        rules = _decision_rules(S, spec.num_actions(h))
        rr = spec.rewards[h][idx, rules]                 # (n_rules, S)
        PP = spec.transitions[h][idx, rules]             # (n_rules, S, S')
        tail = V.reshape(-1, S)                          # (n_tail, S')
        nxt = np.einsum("jst,mt->jms", PP, tail)         # (n_rules, n_tail, S)
        V = (rr[:, None, :] + nxt).reshape((len(rules),) + V.shape[:-1] + (S,))
    return V


def brute_force_solve(spec: EpisodicGameSpec, limit: int = 10**6, s1=None) -> float:
    """max over pure π of min over pure μ of V₁^{π,μ}(s₁), by full enumeration.

    Also checks that min-max equals max-min, which must hold for turn-based games.
    """
    values = brute_force_values(spec, limit)
    w = initial_weights(spec, s1)
    v1 = values @ w
    n = spec.num_steps
    max_axes = tuple(range(0, n, 2))
    min_axes = tuple(range(1, n, 2))
    maxmin = float(v1.min(axis=min_axes, keepdims=True).max())
    minmax = float(v1.max(axis=max_axes, keepdims=True).min())
    if abs(maxmin - minmax) > MINIMAX_TOL:
        raise AssertionError(f"max-min {maxmin!r} differs from min-max {minmax!r}")
    return maxmin


def brute_force_minmax(spec: EpisodicGameSpec, limit: int = 10**6, s1=None):
    """Return (max-min, min-max) without asserting equality."""
    values = brute_force_values(spec, limit)
    v1 = values @ initial_weights(spec, s1)
    n = spec.num_steps
    maxmin = float(v1.min(axis=tuple(range(1, n, 2)), keepdims=True).max())
    minmax = float(v1.max(axis=tuple(range(0, n, 2)), keepdims=True).min())
    return maxmin, minmax


def gap_min_independent(
    spec: EpisodicGameSpec, limit: int = 10**5, zero_tol: float = GAP_ZERO_TOL, max_steps_only: bool = False,
):
    """Smallest positive |V^{†,μ} − Q^{†,μ}| over all pure min-player policies μ.

    Every step counts by default, min-player steps included; ``max_steps_only``
    restricts the minimum to the max-player's own steps.  Returns None when every
    such gap is zero.
    """
    count = spec.A2 ** (spec.S * spec.H)
    if count > limit:
        raise EnumerationLimitError(f"{count} pure min-player policies exceed the limit {limit}")
    rules = _decision_rules(spec.S, spec.A2)
    best = None
    for combo in np.ndindex(*([len(rules)] * spec.H)):
        mu = [rules[i] for i in combo]
        V, Q = best_response_tables_max(spec, mu)
        steps = range(0, spec.num_steps, 2) if max_steps_only else range(spec.num_steps)
        gaps = [np.abs(V[h][:, None] - Q[h]) for h in steps]
        m = _min_positive(gaps, zero_tol)
        if m is not None:
            best = m if best is None else min(best, m)
    return best


def rollout_returns(spec: EpisodicGameSpec, pair: PolicyPair, episodes: int, seed: int) -> np.ndarray:
    """Monte Carlo episode returns under the pair (simulation oracle)."""
    rng = Xoshiro256(seed)
    out = np.empty(episodes)
    for k in range(episodes):
        s = spec.sample_initial(rng)
        total = 0.0
        for h in range(spec.num_steps):
            a = pair.steps[h][s]
            total += spec.rewards[h][s, a]
            if h + 1 < spec.num_steps:
                s = rng.choice(spec.transitions[h][s, a])
        out[k] = total
    return out


# ---------------------------------------------------------------- discounted


def _discounted_q(spec: DiscountedGameSpec, V):
    q_max = spec.rewards[0] + spec.gamma * (spec.transitions[0] @ V[1])
    q_min = spec.rewards[1] + spec.gamma * (spec.transitions[1] @ V[0])
    return q_max, q_min


def discounted_bellman(spec: DiscountedGameSpec, V) -> np.ndarray:
    q_max, q_min = _discounted_q(spec, V)
    return np.stack([q_max.max(axis=1), q_min.min(axis=1)])


def solve_discounted(spec: DiscountedGameSpec, tol: float = 1e-10, max_iter: int = 1_000_000) -> DiscountedNashSolution:
    """Value iteration on (parity, state) until ‖V − V*‖∞ ≤ tol is guaranteed."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    gamma = spec.gamma
    stop = math.inf if gamma == 0.0 else tol * (1.0 - gamma) / (2.0 * gamma)
    V = np.zeros((2, spec.S))
    for it in range(1, max_iter + 1):
        V_new = discounted_bellman(spec, V)
        delta = float(np.max(np.abs(V_new - V)))
        V = V_new
        if delta <= stop:
            break
    else:
        raise ConvergenceError(f"no convergence to tol={tol} within {max_iter} iterations")
    q_max, q_min = _discounted_q(spec, V)
    residual = float(np.max(np.abs(discounted_bellman(spec, V) - V)))
    gap = (V[0][:, None] - q_max, V[1][:, None] - q_min)
    gap_plus = tuple(np.abs(g) for g in gap)
    pi = tuple(int(a) for a in np.argmax(q_max, axis=1))
    mu = tuple(int(a) for a in np.argmin(q_min, axis=1))
    return DiscountedNashSolution(
        V, (q_max, q_min), gap, gap_plus, pi, mu,
        _min_positive(gap_plus, 10.0 * tol), tol, residual, it,
    )


def evaluate_pair_discounted(spec: DiscountedGameSpec, pair: StationaryPolicyPair) -> np.ndarray:
    """Exact V^{π,μ} on (parity, state) by a direct 2S×2S linear solve."""
    S, g = spec.S, spec.gamma
    idx = np.arange(S)
    a, b = np.asarray(pair.pi), np.asarray(pair.mu)
    M = np.zeros((2 * S, 2 * S))
    M[:S, S:] = spec.transitions[0][idx, a]
    M[S:, :S] = spec.transitions[1][idx, b]
    r = np.concatenate([spec.rewards[0][idx, a], spec.rewards[1][idx, b]])
    v = np.linalg.solve(np.eye(2 * S) - g * M, r)
    return v.reshape(2, S)
