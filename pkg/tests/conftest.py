import json
from pathlib import Path

import pytest

from cpssperso.meta_model import (
    Component,
    ComponentType,
    Relation,
    RelationKind,
    SosGraph,
    SystemNode,
    full_component,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
CONFIGS = REPO_ROOT / "configs"

_KIND_COMPONENTS = {
    "CPS": (ComponentType.CYBER, ComponentType.PHYSICAL),
    "PSS": (ComponentType.PHYSICAL, ComponentType.SOCIAL),
    "CSS": (ComponentType.CYBER, ComponentType.SOCIAL),
    "CPSS": (ComponentType.CYBER, ComponentType.PHYSICAL, ComponentType.SOCIAL),
}


def node_of(node_id: str, kind: str, independent: bool = True) -> SystemNode:
    """Fully-capable node classifying to the given composite kind."""
    return SystemNode(
        id=node_id,
        components=tuple(full_component(k) for k in _KIND_COMPONENTS[kind]),
        operational_independence=independent,
        managerial_independence=independent,
    )


def worker_cobot_graph(*relation_kinds: RelationKind) -> SosGraph:
    return SosGraph(
        nodes=(node_of("worker", "PSS"), node_of("cobot", "CPSS")),
        edges=tuple(Relation("worker", "cobot", k) for k in relation_kinds),
    )


@pytest.fixture
def workshop_graph_path() -> Path:
    return CONFIGS / "smart_workshop_graph.json"


@pytest.fixture
def rp_only_graph_path() -> Path:
    return CONFIGS / "worker_cobot_rp_only_graph.json"


@pytest.fixture
def workshop_config() -> dict:
    with open(CONFIGS / "workshop.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict to a temp file and return its path."""

    def _write(doc: dict, name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
        return path

    return _write
