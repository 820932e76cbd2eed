"""Desk-scale smart-workshop MDP for cobot personalisation.

The state combines a worker (emotional state, cognitive load, working pace),
the surrounding team (pressure) and one machine per context element.  The
cobot picks one of five discrete actions per step.  The reward is a weighted
sum of a worker term (did the action match what the worker currently needs),
a team throughput term, and per-machine safety penalties; the worker weight
must strictly dominate the others.

The transition structure is an explicit, fully enumerable distribution
(`transition_model`), so exact solvers can sweep it, and the environment
samples from exactly that distribution.  Worker states are also observable
through a noisy inference channel: with probability ``alpha`` the observed
worker state is the true one, otherwise it is uniform over the remaining
worker states.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Mapping, Sequence

import numpy as np


class InvalidParamsError(ValueError):
    """Environment parameters violating a constraint (weight priority, ranges)."""


class EpisodeOverError(RuntimeError):
    """step() called on a finished episode."""


class Emotion(str, Enum):
    CALM = "calm"
    STRESSED = "stressed"


class CognitiveLoad(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class Pace(str, Enum):
    SLOW = "slow"
    NORMAL = "normal"
    FAST = "fast"


class Skill(str, Enum):
    NOVICE = "novice"
    SKILLED = "skilled"
    EXPERT = "expert"


class Pressure(str, Enum):
    LOW = "low"
    HIGH = "high"


class MachineCondition(str, Enum):
    OK = "ok"
    DEGRADED = "degraded"


class Action(str, Enum):
    SLOW_DOWN = "slow_down"
    SPEED_UP = "speed_up"
    HOLD = "hold"
    ASSIST = "assist"
    HANDOVER = "handover"


ACTIONS: tuple[Action, ...] = tuple(Action)
ACTION_INDEX: dict[Action, int] = {a: i for i, a in enumerate(ACTIONS)}

EMOTIONS = (Emotion.CALM, Emotion.STRESSED)
LOADS = (CognitiveLoad.LOW, CognitiveLoad.MEDIUM, CognitiveLoad.HIGH)
PACES = (Pace.SLOW, Pace.NORMAL, Pace.FAST)

_EMO_IDX = {v: i for i, v in enumerate(EMOTIONS)}
_LOAD_IDX = {v: i for i, v in enumerate(LOADS)}
_PACE_IDX = {v: i for i, v in enumerate(PACES)}


@dataclass(frozen=True, slots=True)
class WorkerProfile:
    """Fixed per-episode traits of the worker being personalised for."""

    skill: Skill = Skill.SKILLED
    pace_preference: Pace = Pace.NORMAL


@dataclass(frozen=True, slots=True)
class WorkerState:
    emotional: Emotion
    cognitive_load: CognitiveLoad
    pace: Pace


#: All 18 worker states in lexicographic (emotional, load, pace) order.
WORKER_STATES: tuple[WorkerState, ...] = tuple(
    WorkerState(e, l, p) for e in EMOTIONS for l in LOADS for p in PACES
)
WORKER_INDEX: dict[WorkerState, int] = {w: i for i, w in enumerate(WORKER_STATES)}


@dataclass(frozen=True, slots=True)
class TeamState:
    pressure: Pressure


@dataclass(frozen=True, slots=True)
class ContextElement:
    """State of one context element (a machine) plus whether it influences
    the worker.  Elements that do not influence the worker never touch the
    worker's dynamics or any reward term."""

    id: str
    machine: MachineCondition
    influences_worker: bool


@dataclass(frozen=True, slots=True)
class WorkshopState:
    worker: WorkerState
    team: TeamState
    contexts: tuple[ContextElement, ...]
    step_index: int = 0


@dataclass(frozen=True, slots=True)
class Observation:
    """What the cobot perceives: an inferred worker state (noisy channel)
    plus exact team and context readings."""

    inferred_worker: WorkerState
    team: TeamState
    contexts: tuple[ContextElement, ...]


@dataclass(frozen=True, slots=True)
class RewardBreakdown:
    """Per-entity reward terms; ``r_context`` holds one entry per influencing
    context element.  ``total`` is the weighted composite."""

    r_worker: float
    r_team: float
    r_context: tuple[float, ...]
    total: float


@dataclass(frozen=True)
class RewardWeights:
    w_worker: float = 1.0
    w_team: float = 0.5
    w_context: float = 0.5


@dataclass(frozen=True)
class RewardMagnitudes:
    worker_match: float = 1.0
    worker_mismatch: float = -1.0
    team_ok: float = 0.5
    team_bad: float = -0.5
    context_unsafe: float = -2.0


@dataclass(frozen=True)
class ContextConfig:
    id: str
    influences_worker: bool = True


@dataclass(frozen=True)
class EnvParams:
    """Everything that defines one workshop instance.

    ``weights.w_worker`` must be strictly greater than both other weights:
    the worker term is the prioritised one.
    """

    gamma: float = 0.95
    alpha: float = 0.9
    noise_p: float = 0.1
    horizon: int = 50
    weights: RewardWeights = field(default_factory=RewardWeights)
    contexts: tuple[ContextConfig, ...] = (ContextConfig("machine1", True),)
    seed: int = 0
    pressure_flip_p: float = 0.1
    machine_degrade_p: float = 0.05
    rewards: RewardMagnitudes = field(default_factory=RewardMagnitudes)

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParamsError(f"gamma must be in (0,1), got {self.gamma}")
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidParamsError(f"alpha must be in (0,1], got {self.alpha}")
        if not 0.0 <= self.noise_p <= 1.0:
            raise InvalidParamsError(f"noise_p must be in [0,1], got {self.noise_p}")
        if self.horizon < 1:
            raise InvalidParamsError(f"horizon must be positive, got {self.horizon}")
        w = self.weights
        if w.w_worker <= 0 or w.w_team <= 0 or w.w_context <= 0:
            raise InvalidParamsError("all reward weights must be positive")
        if w.w_worker <= w.w_team or w.w_worker <= w.w_context:
            raise InvalidParamsError(
                "worker weight must strictly dominate team and context weights "
                f"(got {w.w_worker}, {w.w_team}, {w.w_context})"
            )
        for p in (self.pressure_flip_p, self.machine_degrade_p):
            if not 0.0 <= p <= 1.0:
                raise InvalidParamsError(f"probability out of [0,1]: {p}")
        ids = [c.id for c in self.contexts]
        if len(set(ids)) != len(ids):
            raise InvalidParamsError(f"context ids must be unique: {ids}")


def num_states(params: EnvParams) -> int:
    """Size of the tabular state space: 18 worker x 2 pressure x 2^machines."""
    return 36 << len(params.contexts)


def worker_need(state: WorkshopState, profile: WorkerProfile) -> Action:
    """Deterministic ground truth of the action the worker needs right now.

    Checked in order (first match wins): slow down when stressed or pacing
    above preference; speed up when calm and pacing below preference; assist
    on high cognitive load; hold on medium load at preferred pace.  A fully
    recovered worker gets the task handed over, except that a degraded
    influencing machine needs assistance before any handover.
    """
    worker = state.worker
    pref = _PACE_IDX[profile.pace_preference]
    pace = _PACE_IDX[worker.pace]
    if worker.emotional is Emotion.STRESSED or pace > pref:
        return Action.SLOW_DOWN
    if pace < pref:
        return Action.SPEED_UP
    if worker.cognitive_load is CognitiveLoad.HIGH:
        return Action.ASSIST
    if worker.cognitive_load is CognitiveLoad.MEDIUM:
        return Action.HOLD
    if any(
        c.influences_worker and c.machine is MachineCondition.DEGRADED
        for c in state.contexts
    ):
        return Action.ASSIST
    return Action.HANDOVER


# ---------------------------------------------------------------------------
# Transition model
# ---------------------------------------------------------------------------

_DIM_LEVELS: dict[str, tuple] = {
    "emotional": EMOTIONS,
    "cognitive_load": LOADS,
    "pace": PACES,
}


def _step_toward(levels: tuple, current, goal):
    i, g = levels.index(current), levels.index(goal)
    if i > g:
        return levels[i - 1]
    if i < g:
        return levels[i + 1]
    return current


def _step_away(levels: tuple, current, goal):
    i, g = levels.index(current), levels.index(goal)
    if i >= g:
        return levels[min(i + 1, len(levels) - 1)]
    return levels[max(i - 1, 0)]


def _matched_move(worker: WorkerState, profile: WorkerProfile, action: Action):
    """Dimension/target pair for an action that matches the worker's need;
    None when there is nothing left to improve (handover on an ideal state)."""
    if action is Action.SLOW_DOWN:
        if worker.emotional is Emotion.STRESSED:
            return "emotional", Emotion.CALM
        return "pace", _step_toward(PACES, worker.pace, profile.pace_preference)
    if action is Action.SPEED_UP:
        return "pace", _step_toward(PACES, worker.pace, profile.pace_preference)
    if action is Action.ASSIST:
        return "cognitive_load", _step_toward(LOADS, worker.cognitive_load, CognitiveLoad.LOW)
    if action is Action.HOLD:
        return "cognitive_load", _step_toward(LOADS, worker.cognitive_load, CognitiveLoad.LOW)
    return None


def _generic_degrade(worker: WorkerState, profile: WorkerProfile):
    """First degradable dimension, most-violated first (stress dominates load
    dominates pace), cascading past saturated dimensions; None when the
    worker is already fully degraded."""
    pref = profile.pace_preference
    order: list[str] = []
    if worker.emotional is Emotion.STRESSED:
        order.append("emotional")
    if worker.cognitive_load is not CognitiveLoad.LOW:
        order.append("cognitive_load")
    if worker.pace is not pref:
        order.append("pace")
    for dim in ("emotional", "cognitive_load", "pace"):
        if dim not in order:
            order.append(dim)
    for dim in order:
        if dim == "emotional" and worker.emotional is Emotion.CALM:
            return "emotional", Emotion.STRESSED
        if dim == "cognitive_load" and worker.cognitive_load is not CognitiveLoad.HIGH:
            return "cognitive_load", LOADS[_LOAD_IDX[worker.cognitive_load] + 1]
        if dim == "pace" and worker.pace is not pref:
            away = _step_away(PACES, worker.pace, pref)
            if away is not worker.pace:
                return "pace", away
    return None


def _degrade_move(worker: WorkerState, profile: WorkerProfile, action: Action):
    """Dimension/target pair for a mismatched action.

    The pace-control actions act on the pace itself (an unwanted speed-up or
    slow-down pushes the line off preference, saturating at the extremes);
    unneeded assistance is wasted support but does not harm the worker; the
    remaining mismatches degrade the most-violated dimension.
    """
    if action is Action.SPEED_UP or action is Action.SLOW_DOWN:
        idx = _PACE_IDX[worker.pace] + (1 if action is Action.SPEED_UP else -1)
        if 0 <= idx < len(PACES):
            return "pace", PACES[idx]
        return _generic_degrade(worker, profile)
    if action is Action.ASSIST:
        return None
    return _generic_degrade(worker, profile)


def _neighbors(levels: tuple, value) -> tuple:
    i = levels.index(value)
    out = []
    if i > 0:
        out.append(levels[i - 1])
    if i < len(levels) - 1:
        out.append(levels[i + 1])
    return tuple(out)


def _worker_outcomes(
    state: WorkshopState, action: Action, params: EnvParams, profile: WorkerProfile
) -> list[tuple[WorkerState, float]]:
    need = worker_need(state, profile)
    move = (
        _matched_move(state.worker, profile, action)
        if action is need
        else _degrade_move(state.worker, profile, action)
    )
    if move is not None and getattr(state.worker, move[0]) is move[1]:
        move = None  # targeting the current level is a no-op (e.g. assist
        # matched purely to repair a machine for an already-unloaded worker)
    acc: dict[WorkerState, float] = {}

    def add(w: WorkerState, p: float) -> None:
        if p > 0.0:
            acc[w] = acc.get(w, 0.0) + p

    if move is None:
        add(state.worker, 1.0)
    else:
        dim, target = move
        levels = _DIM_LEVELS[dim]
        add(replace(state.worker, **{dim: target}), 1.0 - params.noise_p)
        nbrs = _neighbors(levels, target)
        for nb in nbrs:
            add(replace(state.worker, **{dim: nb}), params.noise_p / len(nbrs))

    # A degraded machine that matters to the worker is a stressor under speed-up.
    if action is Action.SPEED_UP and any(
        c.influences_worker and c.machine is MachineCondition.DEGRADED
        for c in state.contexts
    ):
        stressed: dict[WorkerState, float] = {}
        for w, p in acc.items():
            sw = replace(w, emotional=Emotion.STRESSED)
            stressed[sw] = stressed.get(sw, 0.0) + p
        acc = stressed
    return list(acc.items())


def _pressure_outcomes(state: WorkshopState, params: EnvParams) -> list[tuple[Pressure, float]]:
    q = params.pressure_flip_p
    cur = state.team.pressure
    other = Pressure.HIGH if cur is Pressure.LOW else Pressure.LOW
    if q <= 0.0:
        return [(cur, 1.0)]
    if q >= 1.0:
        return [(other, 1.0)]
    return [(cur, 1.0 - q), (other, q)]


def _machine_outcomes(
    ctx: ContextElement, action: Action, params: EnvParams
) -> list[tuple[MachineCondition, float]]:
    if action is Action.ASSIST:
        return [(MachineCondition.OK, 1.0)]  # assist repairs
    if ctx.machine is MachineCondition.DEGRADED:
        return [(MachineCondition.DEGRADED, 1.0)]  # stays broken until repaired
    q = params.machine_degrade_p
    if q <= 0.0:
        return [(MachineCondition.OK, 1.0)]
    if q >= 1.0:
        return [(MachineCondition.DEGRADED, 1.0)]
    return [(MachineCondition.OK, 1.0 - q), (MachineCondition.DEGRADED, q)]


def transition_model(
    state: WorkshopState,
    action: Action,
    params: EnvParams,
    profile: WorkerProfile,
) -> list[tuple[WorkshopState, float]]:
    """Exact next-state distribution for one step, as (state, probability)
    pairs sorted by encoded state index.  Matched actions move the violated
    worker dimension one level toward its good value with probability
    ``1 - noise_p`` (noise lands on a uniform neighbour of the target);
    mismatched actions degrade the most-violated dimension.  Team pressure
    flips independently, machines degrade independently and are repaired by
    assist.  Step indices are dropped: the distribution lives on the tabular
    (time-free) space.
    """
    worker_out = _worker_outcomes(state, action, params, profile)
    pressure_out = _pressure_outcomes(state, params)
    machines_out = [_machine_outcomes(c, action, params) for c in state.contexts]

    acc: dict[int, tuple[WorkshopState, float]] = {}
    for w, pw in worker_out:
        for pr, pp in pressure_out:
            combos: list[tuple[tuple[MachineCondition, ...], float]] = [((), 1.0)]
            for m_out in machines_out:
                combos = [
                    (bits + (m,), pb * pm) for bits, pb in combos for m, pm in m_out
                ]
            for bits, pm in combos:
                prob = pw * pp * pm
                if prob <= 0.0:
                    continue
                contexts = tuple(
                    replace(c, machine=m) for c, m in zip(state.contexts, bits)
                )
                nxt = WorkshopState(w, TeamState(pr), contexts, 0)
                key = encode_state(nxt)
                if key in acc:
                    acc[key] = (nxt, acc[key][1] + prob)
                else:
                    acc[key] = (nxt, prob)
    return [acc[k] for k in sorted(acc)]


# ---------------------------------------------------------------------------
# Rewards
# ---------------------------------------------------------------------------

_UNSAFE_ACTIONS = frozenset({Action.SPEED_UP, Action.HANDOVER})


def composite_total(
    r_worker: float, r_team: float, r_context: Sequence[float], weights: RewardWeights
) -> float:
    """The prioritised weighted sum of per-entity reward terms."""
    total = weights.w_worker * r_worker + weights.w_team * r_team
    for rc in r_context:
        total += weights.w_context * rc
    return total


def reward_fn(
    state: WorkshopState,
    action: Action,
    params: EnvParams,
    profile: WorkerProfile,
) -> RewardBreakdown:
    """Composite reward for taking ``action`` in ``state``.

    Worker term: +match / -mismatch against the worker-need rule.  Team term:
    throughput is maintained unless the cobot holds under high pressure.
    Context terms (influencing elements only): a safety penalty when the
    action is unsafe next to a degraded machine (speed-up or handover).
    """
    mags = params.rewards
    r_worker = (
        mags.worker_match
        if action is worker_need(state, profile)
        else mags.worker_mismatch
    )
    throughput_ok = state.team.pressure is Pressure.LOW or action is not Action.HOLD
    r_team = mags.team_ok if throughput_ok else mags.team_bad
    r_context = tuple(
        mags.context_unsafe
        if c.machine is MachineCondition.DEGRADED and action in _UNSAFE_ACTIONS
        else 0.0
        for c in state.contexts
        if c.influences_worker
    )
    total = composite_total(r_worker, r_team, r_context, params.weights)
    return RewardBreakdown(r_worker, r_team, r_context, total)


# ---------------------------------------------------------------------------
# State encoding (bijection onto [0, num_states), step index excluded)
# ---------------------------------------------------------------------------


def encode_state(state: WorkshopState) -> int:
    """Lexicographic index over (emotional, load, pace, pressure, machines);
    the step index is not part of the tabular state."""
    idx = WORKER_INDEX[state.worker]
    idx = idx * 2 + (0 if state.team.pressure is Pressure.LOW else 1)
    for c in state.contexts:
        idx = idx * 2 + (0 if c.machine is MachineCondition.OK else 1)
    return idx


def encode_observation(obs: Observation) -> int:
    """Index of the state the observation claims, on the same ordering."""
    idx = WORKER_INDEX[obs.inferred_worker]
    idx = idx * 2 + (0 if obs.team.pressure is Pressure.LOW else 1)
    for c in obs.contexts:
        idx = idx * 2 + (0 if c.machine is MachineCondition.OK else 1)
    return idx


def decode_state(index: int, params: EnvParams) -> WorkshopState:
    """Inverse of encode_state (step index 0)."""
    total = num_states(params)
    if not 0 <= index < total:
        raise IndexError(f"state index {index} out of range [0, {total})")
    rem = index
    bits = []
    for _ in params.contexts:
        rem, b = divmod(rem, 2)
        bits.append(b)
    bits.reverse()
    rem, pressure_bit = divmod(rem, 2)
    worker = WORKER_STATES[rem]
    contexts = tuple(
        ContextElement(
            cfg.id,
            MachineCondition.DEGRADED if b else MachineCondition.OK,
            cfg.influences_worker,
        )
        for cfg, b in zip(params.contexts, bits)
    )
    return WorkshopState(
        worker,
        TeamState(Pressure.HIGH if pressure_bit else Pressure.LOW),
        contexts,
        0,
    )


def enumerate_states(params: EnvParams) -> Iterator[WorkshopState]:
    for i in range(num_states(params)):
        yield decode_state(i, params)


def initial_state(params: EnvParams, profile: WorkerProfile) -> WorkshopState:
    """Deterministic episode start: calm, unloaded, at preferred pace, low
    pressure, all machines ok."""
    worker = WorkerState(Emotion.CALM, CognitiveLoad.LOW, profile.pace_preference)
    contexts = tuple(
        ContextElement(c.id, MachineCondition.OK, c.influences_worker)
        for c in params.contexts
    )
    return WorkshopState(worker, TeamState(Pressure.LOW), contexts, 0)


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


class WorkshopEnv:
    """Episodic environment over the workshop MDP.

    Owns a private random stream seeded from ``params.seed`` at construction;
    ``reset()`` starts a new episode on the continuing stream, while
    ``reset(seed=...)`` reseeds first (two environments built from equal
    params produce bit-identical trajectories for equal action sequences).
    Instances are single-threaded; run independent instances in parallel.
    """

    num_actions = len(ACTIONS)

    def __init__(self, params: EnvParams, profile: WorkerProfile | None = None):
        self.params = params
        self.profile = profile if profile is not None else WorkerProfile()
        self._rng = np.random.default_rng([params.seed, 0])
        self._state: WorkshopState | None = None
        self._rows: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        self._reward_cache: dict[tuple[int, int], RewardBreakdown] = {}
        self._decoded: dict[int, WorkshopState] = {}

    @property
    def num_states(self) -> int:
        return num_states(self.params)

    @property
    def state(self) -> WorkshopState | None:
        return self._state

    def reset(self, seed: int | None = None) -> tuple[WorkshopState, Observation]:
        if seed is not None:
            self._rng = np.random.default_rng([seed, 0])
        self._state = initial_state(self.params, self.profile)
        return self._state, self.observe(self._state)

    def observe(self, state: WorkshopState) -> Observation:
        """Sample the inference channel for ``state`` (consumes the stream)."""
        true_idx = WORKER_INDEX[state.worker]
        if self._rng.random() < self.params.alpha:
            inferred = state.worker
        else:
            j = int(self._rng.integers(len(WORKER_STATES) - 1))
            if j >= true_idx:
                j += 1
            inferred = WORKER_STATES[j]
        return Observation(inferred, state.team, state.contexts)

    def step(
        self, action: Action
    ) -> tuple[WorkshopState, Observation, RewardBreakdown, bool]:
        if self._state is None:
            raise EpisodeOverError("call reset() before step()")
        t = self._state.step_index
        if t >= self.params.horizon:
            raise EpisodeOverError(f"episode is over (horizon {self.params.horizon})")
        s_idx = encode_state(self._state)
        a_idx = ACTION_INDEX[action]
        next_ids, cum = self._row(s_idx, a_idx)
        u = self._rng.random()
        k = min(int(np.searchsorted(cum, u, side="right")), len(next_ids) - 1)
        nxt = replace(self._decode_cached(int(next_ids[k])), step_index=t + 1)
        obs = self.observe(nxt)
        reward = self.reward_breakdown(s_idx, a_idx)
        done = t + 1 >= self.params.horizon
        self._state = nxt
        return nxt, obs, reward, done

    def reward_breakdown(self, state_index: int, action_index: int) -> RewardBreakdown:
        key = (state_index, action_index)
        br = self._reward_cache.get(key)
        if br is None:
            br = reward_fn(
                self._decode_cached(state_index),
                ACTIONS[action_index],
                self.params,
                self.profile,
            )
            self._reward_cache[key] = br
        return br

    def _decode_cached(self, index: int) -> WorkshopState:
        st = self._decoded.get(index)
        if st is None:
            st = decode_state(index, self.params)
            self._decoded[index] = st
        return st

    def _row(self, s_idx: int, a_idx: int) -> tuple[np.ndarray, np.ndarray]:
        key = (s_idx, a_idx)
        row = self._rows.get(key)
        if row is None:
            dist = transition_model(
                self._decode_cached(s_idx), ACTIONS[a_idx], self.params, self.profile
            )
            ids = np.array([encode_state(s) for s, _ in dist], dtype=np.int64)
            cum = np.cumsum(np.array([p for _, p in dist], dtype=np.float64))
            row = (ids, cum)
            self._rows[key] = row
        return row


# ---------------------------------------------------------------------------
# Config parsing (the `env` section of an experiment config)
# ---------------------------------------------------------------------------

_ENV_KEYS = {
    "gamma",
    "alpha",
    "noise_p",
    "horizon",
    "weights",
    "contexts",
    "profile",
    "seed",
    "pressure_flip_p",
    "machine_degrade_p",
    "rewards",
}


def profile_from_config(raw: Mapping) -> WorkerProfile:
    try:
        return WorkerProfile(
            skill=Skill(raw.get("skill", Skill.SKILLED.value)),
            pace_preference=Pace(raw.get("pace_preference", Pace.NORMAL.value)),
        )
    except ValueError as exc:
        raise InvalidParamsError(f"bad profile: {exc}") from exc


def env_params_from_config(raw: Mapping) -> tuple[EnvParams, WorkerProfile]:
    """Build (EnvParams, WorkerProfile) from a plain config mapping; unknown
    keys are rejected so that typos do not silently fall back to defaults."""
    unknown = set(raw) - _ENV_KEYS
    if unknown:
        raise InvalidParamsError(f"unknown env config keys: {sorted(unknown)}")
    weights_raw = raw.get("weights", {})
    weights = RewardWeights(
        w_worker=float(weights_raw.get("w_worker", 1.0)),
        w_team=float(weights_raw.get("w_team", 0.5)),
        w_context=float(weights_raw.get("w_context", 0.5)),
    )
    rewards_raw = raw.get("rewards", {})
    rewards = RewardMagnitudes(
        worker_match=float(rewards_raw.get("worker_match", 1.0)),
        worker_mismatch=float(rewards_raw.get("worker_mismatch", -1.0)),
        team_ok=float(rewards_raw.get("team_ok", 0.5)),
        team_bad=float(rewards_raw.get("team_bad", -0.5)),
        context_unsafe=float(rewards_raw.get("context_unsafe", -2.0)),
    )
    contexts_raw = raw.get("contexts", [{"id": "machine1", "influences_worker": True}])
    contexts = tuple(
        ContextConfig(str(c["id"]), bool(c.get("influences_worker", True)))
        for c in contexts_raw
    )
    params = EnvParams(
        gamma=float(raw.get("gamma", 0.95)),
        alpha=float(raw.get("alpha", 0.9)),
        noise_p=float(raw.get("noise_p", 0.1)),
        horizon=int(raw.get("horizon", 50)),
        weights=weights,
        contexts=contexts,
        seed=int(raw.get("seed", 0)),
        pressure_flip_p=float(raw.get("pressure_flip_p", 0.1)),
        machine_degrade_p=float(raw.get("machine_degrade_p", 0.05)),
        rewards=rewards,
    )
    profile = profile_from_config(raw.get("profile", {}))
    return params, profile
