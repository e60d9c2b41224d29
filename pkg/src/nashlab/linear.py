"""Least-squares value iteration for linear turn-based games (centralized and independent)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .game import EpisodicGameSpec, LinearGameSpec, is_max_step
from .rng import Xoshiro256, derive_seed
from .solver import PolicyPair, best_response_min

C_BETA_DEFAULT = 160.0
LAMBDA = 1.0


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, pivot: int):
        super().__init__(f"matrix is not positive definite: Cholesky failed at pivot {pivot}")
        self.pivot = pivot


def cholesky(L: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor via LAPACK dpotrf; raises with the failing 1-based pivot."""
    c, info = lapack.dpotrf(np.asarray(L, dtype=float), lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(int(info))
    if info < 0:
        raise ValueError(f"invalid argument {-info} to dpotrf")
    return c


def cho_solve(c: np.ndarray, b: np.ndarray) -> np.ndarray:
    x, info = lapack.dpotrs(c, np.asarray(b, dtype=float), lower=1)
    if info != 0:
        raise ValueError(f"dpotrs failed with info={info}")
    return x


def _check_residual(L, x, b):
    res = float(np.max(np.abs(L @ x - b))) if b.size else 0.0
    bound = 1e-8 * (1.0 + (float(np.max(np.abs(b))) if b.size else 0.0))
    if res > bound:
        raise AssertionError(f"SPD solve residual {res:.3e} exceeds {bound:.3e}")


def spd_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L x = b`` for symmetric positive definite ``L`` (b may have several columns).

    The residual bound ‖Lx − b‖∞ ≤ 1e-8 (1 + ‖b‖∞) is checked on every call.
    """
    L = np.asarray(L, dtype=float)
    b = np.asarray(b, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {L.shape}")
    if b.shape[0] != L.shape[0]:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, matrix has {L.shape[0]}")
    x = cho_solve(cholesky(L), b)
    _check_residual(L, x, b)
    return x


def ucb_width(L: np.ndarray, phi: np.ndarray) -> float:
    """sqrt(φᵀ L⁻¹ φ), computed through a solve."""
    phi = np.asarray(phi, dtype=float)
    q = float(phi @ spd_solve(L, phi))
    return math.sqrt(max(q, 0.0))


def ucb_widths(L: np.ndarray, features: np.ndarray, factor=None) -> np.ndarray:
    """Row-wise widths for a ``(n, d)`` feature matrix."""
    F = np.asarray(features, dtype=float)
    X = cho_solve(factor, F.T) if factor is not None else spd_solve(L, F.T)
    return np.sqrt(np.maximum(np.einsum("nd,dn->n", F, X), 0.0))


@dataclass
class RidgeAccumulator:
    """History of one step's regressions plus an incrementally maintained Gram matrix."""

    d: int
    capacity: int
    lam: float = LAMBDA
    n: int = 0
    phis: np.ndarray = None
    rewards: np.ndarray = None
    next_states: np.ndarray = None
    gram: np.ndarray = None

    def __post_init__(self):
        self.phis = np.zeros((self.capacity, self.d))
        self.rewards = np.zeros(self.capacity)
        self.next_states = np.zeros(self.capacity, dtype=np.int64)
        self.gram = self.lam * np.eye(self.d)

    def add(self, phi, reward: float, next_state: int) -> None:
        if self.n >= self.capacity:
            raise IndexError("ridge history is full")
        phi = np.asarray(phi, dtype=float)
        self.phis[self.n] = phi
        self.rewards[self.n] = reward
        self.next_states[self.n] = next_state
        self.gram += np.outer(phi, phi)
        self.n += 1

    def gram_from_history(self) -> np.ndarray:
        F = self.phis[: self.n]
        return self.lam * np.eye(self.d) + F.T @ F

    def design(self):
        return self.phis[: self.n], self.rewards[: self.n], self.next_states[: self.n]


def default_p(H: int, K: int) -> float:
    return 1.0 / (4.0 * H * H * K * (K + 1))


def bonus_scale(d: int, H: int, K: int, p: float, c_beta: float = C_BETA_DEFAULT) -> float:
    """β = c_β · d · H · sqrt(ι) with ι = log(4dKH/p)."""
    iota = math.log(4.0 * d * K * H / p)
    return c_beta * d * H * math.sqrt(iota)


# ---------------------------------------------------------------- opponents


class Opponent:
    """Min-player plug-in: commits to a pure policy at the start of each episode."""

    name = "opponent"

    def begin_episode(self, k: int, pi) -> tuple:
        """Return the per-min-step action tables the opponent plays in episode ``k``."""
        raise NotImplementedError

    def next_action(self, k: int, h: int, s: int, observables=None) -> int:
        return self._current[h // 2][s]


class FixedPure(Opponent):
    name = "fixed"

    def __init__(self, tables):
        self.tables = tuple(tuple(int(a) for a in t) for t in tables)
        self._current = self.tables

    @classmethod
    def constant(cls, action: int, S: int, H: int):
        return cls([[action] * S for _ in range(H)])

    def begin_episode(self, k, pi):
        self._current = self.tables
        return self.tables


class SeededRandomStationary(Opponent):
    """A pure policy drawn once from ``seed`` and then played every episode."""

    name = "random"

    def __init__(self, seed: int, S: int, A2: int, H: int):
        rng = Xoshiro256(derive_seed(seed, 0x0BB0))
        self.tables = tuple(tuple(rng.integers(A2) for _ in range(S)) for _ in range(H))
        self._current = self.tables

    def begin_episode(self, k, pi):
        self._current = self.tables
        return self.tables


class BestResponseOracle(Opponent):
    """Exact best response to the max-player's greedy policy, recomputed every episode."""

    name = "best-response"

    def __init__(self, spec: EpisodicGameSpec):
        self.spec = spec
        self._current = None

    def begin_episode(self, k, pi):
        mu, _ = best_response_min(self.spec, pi)
        self._current = mu
        return mu


def make_opponent(name: str, spec: EpisodicGameSpec, **params) -> Opponent:
    """Build an opponent from a config name: ``fixed``, ``random`` or ``best-response``."""
    if name == "fixed":
        if "tables" in params:
            return FixedPure(params["tables"])
        return FixedPure.constant(int(params.get("action", 0)), spec.S, spec.H)
    if name == "random":
        return SeededRandomStationary(int(params.get("seed", 0)), spec.S, spec.A2, spec.H)
    if name == "best-response":
        return BestResponseOracle(spec)
    raise ValueError(f"unknown opponent {name!r}")


# ---------------------------------------------------------------- learner


@dataclass
class LSVIState:
    """Per-step regression state; ``wlow``/``Qlow`` stay None in the independent setting."""

    d: int
    H: int
    K: int
    beta: float
    p: float
    c_beta: float
    ridge: list
    wbar: list
    wlow: list | None
    Qbar: list
    Qlow: list | None
    potential: np.ndarray
    potential_violations: int = 0
    history_potential: list = field(default_factory=list)


@dataclass
class LinearEpisodeView:
    k: int
    state: LSVIState
    pair: PolicyPair
    s1: int
    trajectory: list
    widths: list
    opponent_policy: tuple | None = None


def _check_dims(lspec: LinearGameSpec):
    for h in range(lspec.num_steps):
        if lspec.phi[h].shape != (lspec.S, lspec.num_actions(h), lspec.d):
            raise ValueError(f"feature map at step {h + 1} has shape {lspec.phi[h].shape}, expected d={lspec.d}")


def _lsvi_run(lspec, K, c_beta, p, seed, hooks, fast, opponent, lam):
    if K < 1:
        raise ValueError("K must be >= 1")
    _check_dims(lspec)
    n, d, S, H = lspec.num_steps, lspec.d, lspec.S, lspec.H
    top = float(n)
    p = default_p(H, K) if p is None else p
    beta = bonus_scale(d, H, K, p, c_beta)
    P = lspec.reconstruct_transitions()
    R = lspec.reconstruct_rewards()
    centralized = opponent is None
    state = LSVIState(
        d, H, K, beta, p, c_beta,
        [RidgeAccumulator(d, K, lam) for _ in range(n)],
        [np.zeros(d) for _ in range(n)],
        [np.zeros(d) for _ in range(n)] if centralized else None,
        [np.full((S, lspec.num_actions(h)), top) for h in range(n)],
        [np.zeros((S, lspec.num_actions(h))) for h in range(n)] if centralized else None,
        np.zeros(n),
    )
    # last action the opponent was seen to take at (h, s); -1 = never observed
    seen = [np.full(S, -1, dtype=np.int64) for _ in range(n)]
    rng = Xoshiro256(seed)
    flat_phi = [lspec.phi[h].reshape(-1, d) for h in range(n)]
    widths_all = [None] * n
    # the potential bound is only guaranteed for features inside the unit ball
    bound_guaranteed = max(float(np.linalg.norm(f, axis=-1).max()) for f in lspec.phi) <= 1.0 + 1e-12

    for k in range(1, K + 1):
        Vbar_next = np.zeros(S)
        Vlow_next = np.zeros(S)
        for h in reversed(range(n)):
            acc = state.ridge[h]
            F, rew, nxt = acc.design()
            if fast:
                gram = acc.gram
                factor = cholesky(gram)
                solve = lambda b, g=gram, c=factor: cho_solve(c, b)
            else:
                gram = acc.gram_from_history()
                factor = None
                solve = lambda b, g=gram: spd_solve(g, b)
            wbar = solve(F.T @ (rew + Vbar_next[nxt]))
            widths = ucb_widths(gram, flat_phi[h], factor).reshape(S, -1)
            Qbar = np.minimum(top, lspec.phi[h] @ wbar + beta * widths)
            state.wbar[h], state.Qbar[h] = wbar, Qbar
            widths_all[h] = widths
            if centralized:
                wlow = solve(F.T @ (rew + Vlow_next[nxt]))
                Qlow = np.maximum(0.0, lspec.phi[h] @ wlow - beta * widths)
                state.wlow[h], state.Qlow[h] = wlow, Qlow
                act = np.argmax(Qbar, axis=1) if is_max_step(h) else np.argmin(Qlow, axis=1)
                Vbar_next = Qbar[np.arange(S), act]
                Vlow_next = Qlow[np.arange(S), act]
            elif is_max_step(h):
                Vbar_next = Qbar.max(axis=1)
            else:
                obs = seen[h]
                Vbar_next = np.where(obs >= 0, Qbar[np.arange(S), np.maximum(obs, 0)], top)

        steps = []
        for h in range(n):
            if is_max_step(h):
                steps.append(tuple(int(a) for a in np.argmax(state.Qbar[h], axis=1)))
            elif centralized:
                steps.append(tuple(int(a) for a in np.argmin(state.Qlow[h], axis=1)))
            else:
                steps.append(None)
        opp_policy = None
        if not centralized:
            opp_policy = tuple(tuple(int(a) for a in t) for t in opponent.begin_episode(k, tuple(steps[0::2])))
            for i, t in enumerate(opp_policy):
                steps[2 * i + 1] = t
        pair = PolicyPair(tuple(steps))

        s = lspec.initial_state if isinstance(lspec.initial_state, int) else rng.choice(lspec.initial_state)
        s1 = s
        traj, wids = [], []
        for h in range(n):
            if is_max_step(h) or centralized:
                a = pair.steps[h][s]
            else:
                a = int(opponent.next_action(k, h, s, None))
                if not 0 <= a < lspec.A2:
                    raise ValueError(f"opponent returned action {a} outside 0..{lspec.A2 - 1}")
                seen[h][s] = a
            s_next = rng.choice(P[h][s, a]) if h + 1 < n else 0
            w = float(widths_all[h][s, a])
            state.potential[h] += w * w
            bound = 2.0 * d * math.log(1.0 + k)
            if state.potential[h] > bound:
                state.potential_violations += 1
                if bound_guaranteed:
                    raise AssertionError(
                        f"elliptical potential {state.potential[h]!r} exceeds 2d log(1+k) = {bound!r} at h={h + 1}, k={k}"
                    )
            traj.append((h, s, a))
            wids.append(w)
            state.ridge[h].add(lspec.phi[h][s, a], R[h][s, a], s_next)
            s = s_next
        state.history_potential.append(state.potential.copy())
        if hooks:
            view = LinearEpisodeView(k, state, pair, s1, traj, wids, opp_policy)
            for hook in hooks:
                hook(view)
    return state


def lsvi_centralized_run(
    lspec: LinearGameSpec, K: int, c_beta: float = C_BETA_DEFAULT, p: float | None = None,
    seed: int = 0, hooks=(), fast: bool = False, lam: float = LAMBDA,
) -> LSVIState:
    """Centralized LSVI with upper and lower estimates; returns the final state.

    ``fast`` keeps the Gram matrix incrementally and reuses one factorization
    per step; the default recomputes everything from the stored history.
    """
    return _lsvi_run(lspec, K, c_beta, p, seed, hooks, fast, None, lam)


def lsvi_independent_run(
    lspec: LinearGameSpec, K: int, opponent: Opponent, c_beta: float = C_BETA_DEFAULT,
    p: float | None = None, seed: int = 0, hooks=(), fast: bool = False, lam: float = LAMBDA,
) -> LSVIState:
    """Independent LSVI: only the max-player learns; min steps are played by ``opponent``."""
    if opponent is None:
        raise ValueError("the independent setting needs an opponent")
    return _lsvi_run(lspec, K, c_beta, p, seed, hooks, fast, opponent, lam)
