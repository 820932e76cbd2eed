"""Tabular solvers for the workshop Q-function.

Exact value iteration sweeps the enumerated transition model to the Bellman
fixed point; tabular Q-learning approaches the same fixed point from sampled
transitions; both share the greedy/epsilon-greedy readout.  A finished
Q-table can be persisted as a flat binary array with a small header.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .workshop_env import (
    ACTIONS,
    EnvParams,
    WorkerProfile,
    WorkshopEnv,
    decode_state,
    encode_observation,
    encode_state,
    num_states,
    reward_fn,
    transition_model,
    worker_need,
)


class InvalidToleranceError(ValueError):
    """Non-positive convergence tolerance."""


@dataclass
class QTable:
    """Dense state-action values.  Exclusively owned by one training loop
    while learning; safe to share once finished."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("q-table must be 2-D (states x actions)")

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QTable":
        return cls(np.zeros((n_states, n_actions), dtype=np.float64))

    @property
    def num_states(self) -> int:
        return self.values.shape[0]

    @property
    def num_actions(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "QTable":
        return QTable(self.values.copy())


@dataclass(frozen=True)
class FiniteMdp:
    """Dense MDP arrays: transitions (S, A, S) and expected rewards (S, A)."""

    transitions: np.ndarray
    rewards: np.ndarray

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    @property
    def rmax(self) -> float:
        return float(np.max(np.abs(self.rewards))) if self.rewards.size else 0.0

    @classmethod
    def from_env(cls, params: EnvParams, profile: WorkerProfile) -> "FiniteMdp":
        """Enumerate the workshop into dense arrays (exact, no sampling)."""
        n, a = num_states(params), len(ACTIONS)
        p = np.zeros((n, a, n), dtype=np.float64)
        r = np.zeros((n, a), dtype=np.float64)
        for s in range(n):
            state = decode_state(s, params)
            for ai, action in enumerate(ACTIONS):
                for nxt, prob in transition_model(state, action, params, profile):
                    p[s, ai, encode_state(nxt)] += prob
                r[s, ai] = reward_fn(state, action, params, profile).total
        return cls(p, r)


def value_iteration(
    mdp: FiniteMdp, gamma: float, tolerance: float = 1e-9
) -> QTable:
    """Full-backup iteration of the Bellman optimality operator from zero.

    Stops once the max-norm change between sweeps is <= tolerance, which
    bounds the Bellman residual of the result by gamma * tolerance.
    """
    if tolerance <= 0:
        raise InvalidToleranceError(f"tolerance must be positive, got {tolerance}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0,1), got {gamma}")
    q = np.zeros_like(mdp.rewards)
    rmax = mdp.rmax
    if rmax == 0.0:
        return QTable(q)
    max_sweeps = (
        math.ceil(math.log(tolerance * (1.0 - gamma) / rmax) / math.log(gamma)) + 1
        if gamma > 0.0
        else 1
    )
    for _ in range(max(max_sweeps, 1) + 2):
        nxt = mdp.rewards + gamma * (mdp.transitions @ q.max(axis=1))
        delta = float(np.max(np.abs(nxt - q)))
        q = nxt
        if delta <= tolerance:
            return QTable(q)
    raise RuntimeError("value iteration failed to converge within its sweep bound")


def bellman_residual(q: QTable, mdp: FiniteMdp, gamma: float) -> float:
    """Max-norm deviation from the Bellman fixed point; 0 iff q is optimal."""
    backup = mdp.rewards + gamma * (mdp.transitions @ q.values.max(axis=1))
    return float(np.max(np.abs(q.values - backup)))


def q_update(
    q: QTable,
    s: int,
    a: int,
    r: float,
    s_next: int,
    eta: float,
    gamma: float,
    done: bool = False,
) -> float:
    """One sampled Bellman update of entry (s, a) in place; returns the TD
    error.  ``done`` suppresses the bootstrap (terminal convention); horizon
    truncation in the workshop bootstraps normally."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"learning rate must be in (0,1], got {eta}")
    n, m = q.values.shape
    if not (0 <= s < n and 0 <= s_next < n):
        raise IndexError(f"state index out of range [0, {n})")
    if not 0 <= a < m:
        raise IndexError(f"action index out of range [0, {m})")
    target = r if done else r + gamma * float(q.values[s_next].max())
    td = target - float(q.values[s, a])
    q.values[s, a] += eta * td
    return td


def epsilon_greedy(q: QTable, s: int, epsilon: float, rng: np.random.Generator) -> int:
    """Greedy action with probability 1 - epsilon (ties take the lowest
    index), uniform otherwise."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0,1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(q.num_actions))
    return int(np.argmax(q.values[s]))


def greedy_policy(q: QTable) -> np.ndarray:
    """state -> action map (lowest-index tie-break)."""
    return np.argmax(q.values, axis=1)


@dataclass(frozen=True)
class LearningSchedule:
    """Q-learning schedule: constant learning rate, linear epsilon decay
    over the first ``decay_steps`` episodes."""

    learning_rate: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    decay_steps: int = 4000
    episodes: int = 5000

    def __post_init__(self) -> None:
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning rate must be in (0,1], got {self.learning_rate}")
        for e in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"epsilon must be in [0,1], got {e}")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        if self.decay_steps < 0 or self.episodes < 0:
            raise ValueError("decay_steps and episodes must be non-negative")

    def epsilon_at(self, episode: int) -> float:
        if self.decay_steps <= 0:
            return self.epsilon_end
        f = min(1.0, episode / self.decay_steps)
        return self.epsilon_start + f * (self.epsilon_end - self.epsilon_start)


@dataclass(frozen=True)
class EpisodeMetrics:
    episode: int
    episode_return: float
    epsilon: float
    max_abs_td_error: float


def max_step_reward(params: EnvParams) -> float:
    """Largest composite reward obtainable in one step."""
    m, w = params.rewards, params.weights
    return (
        w.w_worker * max(m.worker_match, m.worker_mismatch)
        + w.w_team * max(m.team_ok, m.team_bad)
        + sum(w.w_context * max(0.0, m.context_unsafe) for c in params.contexts if c.influences_worker)
    )


def optimistic_initial_value(params: EnvParams) -> float:
    """Horizon-limited upper bound on any return: a Q-table initialised here
    explores under-visited actions until their estimates settle, which keeps
    sample-based learning from starving rarely-visited state-action pairs."""
    g, h = params.gamma, params.horizon
    return max_step_reward(params) * (1.0 - g**h) / (1.0 - g)


def train_tabular(
    env: WorkshopEnv,
    schedule: LearningSchedule,
    gamma: float,
    partial_obs: bool = False,
    exploration_seed: int | None = None,
    initial_q: float = 0.0,
) -> tuple[QTable, list[EpisodeMetrics]]:
    """Epsilon-greedy Q-learning against the environment.

    Deterministic given the environment seed: exploration draws come from a
    dedicated stream derived from it.  With ``partial_obs`` the learner sees
    the noisy inference channel instead of the true worker state.  The table
    starts at ``initial_q`` (zeros by default; see optimistic_initial_value
    for the optimistic option).
    """
    seed = exploration_seed if exploration_seed is not None else env.params.seed
    rng = np.random.default_rng([seed, 1])
    q = QTable(np.full((env.num_states, env.num_actions), float(initial_q)))
    metrics: list[EpisodeMetrics] = []
    for episode in range(schedule.episodes):
        eps = schedule.epsilon_at(episode)
        state, obs = env.reset()
        s = encode_observation(obs) if partial_obs else encode_state(state)
        ep_return = 0.0
        max_td = 0.0
        for _ in range(env.params.horizon):
            a = epsilon_greedy(q, s, eps, rng)
            state, obs, reward, done = env.step(ACTIONS[a])
            s_next = encode_observation(obs) if partial_obs else encode_state(state)
            td = q_update(
                q, s, a, reward.total, s_next, schedule.learning_rate, gamma
            )
            ep_return += reward.total
            max_td = max(max_td, abs(td))
            s = s_next
            if done:
                break
        metrics.append(EpisodeMetrics(episode, ep_return, eps, max_td))
    return q, metrics


# ---------------------------------------------------------------------------
# Policy evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalSummary:
    episodes: int
    mean_return: float
    worker_match_rate: float
    safety_violation_rate: float


def evaluate_policy(
    params: EnvParams,
    profile: WorkerProfile,
    policy,
    episodes: int,
    seed: int | None = None,
) -> EvalSummary:
    """Greedy rollouts of ``policy(state, observation) -> Action``.

    Reports mean undiscounted return, the fraction of steps whose action
    matched the worker-need rule, and the fraction of steps taking an unsafe
    action next to a degraded influencing machine.
    """
    if episodes <= 0:
        return EvalSummary(0, 0.0, 0.0, 0.0)
    base = seed if seed is not None else params.seed
    env = WorkshopEnv(params, profile)
    returns = []
    matches = 0
    violations = 0
    steps = 0
    for i in range(episodes):
        state, obs = env.reset(seed=base + 100_000 + i)
        total = 0.0
        for _ in range(params.horizon):
            action = policy(state, obs)
            if action is worker_need(state, profile):
                matches += 1
            reward: object
            state, obs, reward, done = env.step(action)
            if any(rc != 0.0 for rc in reward.r_context):
                violations += 1
            total += reward.total
            steps += 1
            if done:
                break
        returns.append(total)
    return EvalSummary(
        episodes=episodes,
        mean_return=float(np.mean(returns)),
        worker_match_rate=matches / steps,
        safety_violation_rate=violations / steps,
    )


def table_policy(q: QTable):
    """Wrap a q-table as a policy callable over true states."""
    pi = greedy_policy(q)

    def policy(state, obs):
        return ACTIONS[int(pi[encode_state(state)])]

    return policy


def exact_match_rate(
    policy_actions: np.ndarray, params: EnvParams, profile: WorkerProfile
) -> float:
    """Fraction of the enumerated state space where the policy picks the
    worker-need action (no sampling)."""
    n = num_states(params)
    hits = 0
    for s in range(n):
        state = decode_state(s, params)
        if ACTIONS[int(policy_actions[s])] is worker_need(state, profile):
            hits += 1
    return hits / n


# ---------------------------------------------------------------------------
# Persistence (flat binary array with a small header)
# ---------------------------------------------------------------------------

_QTABLE_MAGIC = b"QTB1"


def save_qtable(q: QTable, gamma: float, path: str | Path) -> None:
    if not np.all(np.isfinite(q.values)):
        raise ValueError("refusing to persist a q-table with non-finite entries")
    header = _QTABLE_MAGIC + struct.pack("<qqd", q.num_states, q.num_actions, gamma)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(q.values.astype("<f8").tobytes())


def load_qtable(path: str | Path) -> tuple[QTable, float]:
    with open(path, "rb") as fh:
        blob = fh.read()
    head = len(_QTABLE_MAGIC) + struct.calcsize("<qqd")
    if len(blob) < head or blob[: len(_QTABLE_MAGIC)] != _QTABLE_MAGIC:
        raise ValueError(f"{path}: not a q-table file")
    n, a, gamma = struct.unpack("<qqd", blob[len(_QTABLE_MAGIC) : head])
    values = np.frombuffer(blob[head:], dtype="<f8")
    if values.size != n * a:
        raise ValueError(f"{path}: truncated q-table payload")
    return QTable(values.reshape(n, a).copy()), gamma
