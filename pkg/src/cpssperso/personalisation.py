"""Three-layer personalisation pipeline.

Layer 1 binds the personalisation roles (user, hosting workshop, crowd,
device, context elements) to nodes of a composition graph.  Layer 2 holds
the stakeholders' objectives and detects conflicting pairs.  Layer 3
assembles the resulting reinforcement-learning task definition: the state
composition, the action set, and prioritised per-entity reward terms -
exactly what the workshop environment consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .meta_model import SosGraph, SystemKind, classify_system
from .workshop_env import ACTIONS, Action


class UnknownSystemError(ValueError):
    """A role refers to a node that is not in the graph."""


class RoleCollisionError(ValueError):
    """The personalisation user and device must be different systems."""


class DuplicateObjectiveError(ValueError):
    """Objective ids must be unique."""


class PriorityViolationError(ValueError):
    """The user's reward weight must strictly dominate every other term."""


class Direction(str, Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


@dataclass(frozen=True)
class ContextBinding:
    id: str
    influences_user: bool


@dataclass(frozen=True)
class PersoScenario:
    """Role binding: who is personalised for, by what, among whom."""

    user: str
    device: str
    crowd: tuple[str, ...]
    context: tuple[ContextBinding, ...]
    cpss: str | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "user": self.user,
            "device": self.device,
            "crowd": list(self.crowd),
            "context": [
                {"id": c.id, "influences_user": c.influences_user} for c in self.context
            ],
        }
        if self.cpss is not None:
            out["cpss"] = self.cpss
        return out


def scenario_from_dict(raw: Mapping) -> PersoScenario:
    return PersoScenario(
        user=str(raw["user"]),
        device=str(raw["device"]),
        crowd=tuple(str(c) for c in raw.get("crowd", [])),
        context=tuple(
            ContextBinding(str(c["id"]), bool(c.get("influences_user", True)))
            for c in raw.get("context", [])
        ),
        cpss=str(raw["cpss"]) if raw.get("cpss") is not None else None,
    )


@dataclass(frozen=True)
class ObjectiveSpec:
    id: str
    owner: str
    metric: str
    direction: Direction
    weight: float

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise ValueError(f"objective weight must be positive, got {self.weight}")


def objectives_from_config(raw: Sequence[Mapping]) -> list[ObjectiveSpec]:
    return [
        ObjectiveSpec(
            id=str(o["id"]),
            owner=str(o["owner"]),
            metric=str(o["metric"]),
            direction=Direction(str(o["direction"])),
            weight=float(o.get("weight", 1.0)),
        )
        for o in raw
    ]


@dataclass(frozen=True)
class RewardTerm:
    term_id: str
    owner: str
    weight: float


@dataclass(frozen=True)
class RlTaskDef:
    """What the personalising agent optimises: an ordered state composition
    (user, crowd aggregate, each influencing context element), the discrete
    action set, prioritised reward terms, and the discount."""

    state_composition: tuple[str, ...]
    action_set: tuple[Action, ...]
    reward_terms: tuple[RewardTerm, ...]
    gamma: float


@dataclass(frozen=True)
class BindingResult:
    scenario: PersoScenario
    warnings: tuple[str, ...]


def bind_roles(graph: SosGraph, role_config: Mapping) -> BindingResult:
    """Layer 1: resolve the personalisation roles against the graph.

    Every referenced id must exist and the user and device must differ.  A
    device whose own components do not classify to a single-system CPSS is
    accepted but flagged: without social actuation on the device the
    assemblage cannot be a true CPSS.
    """
    scenario = scenario_from_dict(role_config)
    node_ids = {n.id for n in graph.nodes}
    referenced = [scenario.user, scenario.device, *scenario.crowd]
    referenced += [c.id for c in scenario.context]
    if scenario.cpss is not None:
        referenced.append(scenario.cpss)
    for node_id in referenced:
        if node_id not in node_ids:
            raise UnknownSystemError(f"role refers to unknown system: {node_id!r}")
    if scenario.user == scenario.device:
        raise RoleCollisionError(
            f"user and device must be different systems, both are {scenario.user!r}"
        )
    warnings = []
    device_kind = classify_system(graph.node(scenario.device).components)
    if device_kind is not SystemKind.CPSS:
        warnings.append(
            f"device {scenario.device!r} classifies as {device_kind.value}, not a "
            "single-system CPSS: the assemblage is a SoS but not a true CPSS"
        )
    return BindingResult(scenario, tuple(warnings))


def detect_conflicts(
    objectives: Sequence[ObjectiveSpec],
) -> list[tuple[ObjectiveSpec, ObjectiveSpec]]:
    """Layer 2: unordered pairs of objectives on the same metric pulling in
    opposite directions (same direction on a shared metric is complementary,
    not a conflict)."""
    seen: set[str] = set()
    for o in objectives:
        if o.id in seen:
            raise DuplicateObjectiveError(f"duplicate objective id: {o.id!r}")
        seen.add(o.id)
    ordered = sorted(objectives, key=lambda o: o.id)
    out = []
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if a.metric == b.metric and a.direction is not b.direction:
                out.append((a, b))
    return out


def assemble_rl_task(
    scenario: PersoScenario,
    objectives: Sequence[ObjectiveSpec],
    env_section: Mapping,
) -> RlTaskDef:
    """Layer 3: turn a bound scenario into the RL task definition.

    State composition is the user, one crowd aggregate, and exactly the
    influencing context elements.  Reward terms mirror that composition with
    weights from the environment section; the user's weight must strictly
    dominate or the assembly is rejected.
    """
    detect_conflicts(objectives)  # validates id uniqueness as a side condition
    weights = env_section.get("weights", {})
    w_user = float(weights.get("w_worker", 1.0))
    w_crowd = float(weights.get("w_team", 0.5))
    w_context = float(weights.get("w_context", 0.5))
    if w_user <= w_crowd or w_user <= w_context:
        raise PriorityViolationError(
            f"user reward weight {w_user} must strictly dominate the others "
            f"(crowd {w_crowd}, context {w_context})"
        )
    influencing = [c.id for c in scenario.context if c.influences_user]
    composition = [scenario.user]
    terms = [RewardTerm("worker", scenario.user, w_user)]
    if scenario.crowd:
        aggregate = "+".join(scenario.crowd)
        composition.append(aggregate)
        terms.append(RewardTerm("team", aggregate, w_crowd))
    for ctx_id in influencing:
        composition.append(ctx_id)
        terms.append(RewardTerm(f"context:{ctx_id}", ctx_id, w_context))
    return RlTaskDef(
        state_composition=tuple(composition),
        action_set=ACTIONS,
        reward_terms=tuple(terms),
        gamma=float(env_section.get("gamma", 0.95)),
    )
