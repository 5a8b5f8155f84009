"""The task automaton: a directed graph of skill primitives.

Each non-start node pairs a keyframe policy with an initiation classifier and
keeps its full training provenance (segments and start states), so every
parameter can be rebuilt from stored data.  A virtual start node anchors
bootstrap teaching; execution walks children picked by classifier confidence.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .classifier import InitiationClassifier, is_activated, predict_proba
from .demos import DemoSegment, Keyframe, Pose2, WorldState
from .errors import ConsistencyError, InvalidInputError, ModelFileError
from .hmm import GaussianHMM, sample_keyframes
from .world import RuleTable, World, step_to

MODEL_SCHEMA_VERSION = 1
START_ID = 0
MAX_EXECUTION_STEPS = 60


def start_classifier() -> InitiationClassifier:
    return InitiationClassifier(
        weights=np.zeros(0), bias=0.0, positives=[], negatives=[], degenerate=True
    )


@dataclass
class Primitive:
    id: int
    policy: GaussianHMM | None
    classifier: InitiationClassifier
    segments: list = field(default_factory=list)
    start_states: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.segments) != len(self.start_states):
            raise InvalidInputError("segments and start states must stay aligned")

    @property
    def is_start(self) -> bool:
        return self.policy is None

    def dominant_reference(self) -> str:
        """Most frequent reference object in the provenance; ties by name."""
        if not self.segments:
            raise InvalidInputError(f"node {self.id} has no provenance")
        counts = Counter(s.reference_object for s in self.segments)
        top = max(counts.values())
        return min(name for name, c in counts.items() if c == top)


@dataclass
class SelectionOutcome:
    kind: str  # node | terminal | failure
    node_id: int | None = None
    state: WorldState | None = None


@dataclass
class ExecutionTrace:
    visited: list
    plans: dict  # node id -> list of workspace-frame keyframe targets
    outcome: str  # success | failure
    reason: str | None = None
    state: WorldState | None = None
    failed_node: int | None = None
    final_world: World | None = None

    def to_dict(self) -> dict:
        return {
            "visited": list(self.visited),
            "plans": {str(k): [list(map(float, p)) for p in v] for k, v in self.plans.items()},
            "outcome": self.outcome,
            "reason": self.reason,
            "state": None if self.state is None else list(self.state.features),
            "failed_node": self.failed_node,
            "final_world": None if self.final_world is None else self.final_world.to_dict(),
        }


class TaskModel:
    def __init__(self, layout, scenario: str = "", meta: dict | None = None):
        self.layout = tuple(layout)
        self.scenario = scenario
        self.meta = dict(meta or {})
        self.start_id = START_ID
        self.nodes: dict = {
            START_ID: Primitive(id=START_ID, policy=None, classifier=start_classifier())
        }
        self.edges: set = set()
        self.traversal_log: list = []  # {"demo_id": ..., "path": [...]}
        self._next_id = START_ID + 1

    # -- queries ------------------------------------------------------------

    @property
    def kappa(self) -> int:
        return len(self.nodes)

    def node(self, node_id: int) -> Primitive:
        if node_id not in self.nodes:
            raise InvalidInputError(f"unknown node id {node_id}")
        return self.nodes[node_id]

    def children(self, node_id: int) -> list:
        self.node(node_id)
        return sorted(v for (u, v) in self.edges if u == node_id)

    def parents(self, node_id: int) -> list:
        self.node(node_id)
        return sorted(u for (u, v) in self.edges if v == node_id)

    def new_node_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    # -- mutation -----------------------------------------------------------

    def add_node(self, primitive: Primitive) -> int:
        if primitive.id in self.nodes:
            raise InvalidInputError(f"node id {primitive.id} already present")
        self.nodes[primitive.id] = primitive
        self._next_id = max(self._next_id, primitive.id + 1)
        return primitive.id

    def add_edge(self, u: int, v: int) -> bool:
        """Insert the edge; returns True when it was new (re-adding is a no-op)."""
        self.node(u)
        self.node(v)
        if (u, v) in self.edges:
            return False
        self.edges.add((u, v))
        return True

    # -- selection and execution ---------------------------------------------

    def applicable_set(self, s: WorldState, theta: float = 0.5) -> list:
        """Non-start primitives whose classifiers activate on s, by id."""
        return [
            self.nodes[nid]
            for nid in sorted(self.nodes)
            if nid != self.start_id and is_activated(self.nodes[nid].classifier, s, theta)
        ]

    def select_next(self, current: int, s: WorldState, theta: float = 0.5) -> SelectionOutcome:
        """Most confident child of the current node, or terminal/failure."""
        kids = self.children(current)
        if not kids:
            return SelectionOutcome(kind="terminal")
        best_id, best_p = None, -1.0
        for nid in kids:
            p = predict_proba(self.nodes[nid].classifier, s)
            if p > best_p:
                best_id, best_p = nid, p
        if best_p < theta:
            return SelectionOutcome(kind="failure", node_id=current, state=s)
        return SelectionOutcome(kind="node", node_id=best_id)

    def execute(
        self,
        world: World,
        rules: RuleTable,
        theta: float = 0.5,
        rng_seed=0,
        substep: float = 0.05,
        on_event=None,
    ) -> ExecutionTrace:
        """Run the automaton from the start node in the given world.

        Deterministic for a fixed seed.  Emits optional events through
        ``on_event`` (node_entered, keyframe_reached, failure).
        """
        emit = on_event or (lambda kind, data: None)
        root = np.random.SeedSequence(rng_seed)
        visited = [self.start_id]
        plans: dict = {}
        current = self.start_id
        for step in range(MAX_EXECUTION_STEPS):
            s = world.features(self.layout)
            outcome = self.select_next(current, s, theta)
            if outcome.kind == "terminal":
                if current == self.start_id:
                    emit("failure", {"node": current, "state": list(s.features)})
                    return ExecutionTrace(
                        visited, plans, "failure", reason="empty-model",
                        state=s, failed_node=current, final_world=world,
                    )
                return ExecutionTrace(visited, plans, "success", final_world=world)
            if outcome.kind == "failure":
                emit("failure", {"node": current, "state": list(s.features)})
                return ExecutionTrace(
                    visited, plans, "failure", reason="selection",
                    state=s, failed_node=current, final_world=world,
                )
            node = self.nodes[outcome.node_id]
            visited.append(node.id)
            emit("node_entered", {"node": node.id})
            seed = np.random.SeedSequence(entropy=root.entropy, spawn_key=(step,))
            rel_frames = sample_keyframes(node.policy, seed)
            anchor = world.object_pose(node.dominant_reference())
            plan = []
            for frame in rel_frames:
                pose = Pose2(frame[0], frame[1], frame[2]).transform_from_frame(anchor)
                grip = float(min(1.0, max(0.0, frame[3])))
                plan.append([pose.x, pose.y, pose.theta, grip])
                try:
                    world = step_to(world, pose, grip, rules, substep=substep)
                except Exception as exc:  # simulator fault -> in-band failure
                    plans[node.id] = plan
                    state = world.features(self.layout)
                    emit("failure", {"node": node.id, "state": list(state.features)})
                    return ExecutionTrace(
                        visited, plans, "failure", reason=f"simulator: {exc}",
                        state=state, failed_node=node.id, final_world=world,
                    )
                emit("keyframe_reached", {"node": node.id, "pose": plan[-1]})
            plans[node.id] = plan
            current = node.id
        s = world.features(self.layout)
        emit("failure", {"node": current, "state": list(s.features)})
        return ExecutionTrace(
            visited, plans, "failure", reason="step-limit",
            state=s, failed_node=current, final_world=world,
        )

    # -- invariants ----------------------------------------------------------

    def validate(self) -> None:
        if self.start_id not in self.nodes:
            raise ConsistencyError("start node missing")
        start = self.nodes[self.start_id]
        if not start.is_start or not start.classifier.degenerate:
            raise ConsistencyError("start node must be virtual with an always-true classifier")
        for u, v in self.edges:
            if u not in self.nodes or v not in self.nodes:
                raise ConsistencyError(f"edge ({u}, {v}) references a missing node")
        for entry in self.traversal_log:
            path = entry["path"]
            for a, b in zip(path, path[1:]):
                if (a, b) not in self.edges:
                    raise ConsistencyError(
                        f"traversal of demo {entry['demo_id']} uses non-edge ({a}, {b})"
                    )
        for node in self.nodes.values():
            if node.id != self.start_id and node.policy is None:
                raise ConsistencyError(f"node {node.id} lacks a policy")
            if len(node.segments) != len(node.start_states):
                raise ConsistencyError(f"node {node.id} provenance misaligned")

    # -- serialization ---------------------------------------------------------

    def _keyframe_to_dict(self, kf: Keyframe) -> dict:
        return {
            "pose": [kf.ee_pose.x, kf.ee_pose.y, kf.ee_pose.theta],
            "gripper": kf.gripper,
            "reference_object": kf.reference_object,
            "world_features": list(kf.world.features),
            "timestamp": kf.timestamp,
        }

    def _keyframe_from_dict(self, d: dict) -> Keyframe:
        return Keyframe(
            ee_pose=Pose2(*d["pose"]),
            gripper=d["gripper"],
            reference_object=d["reference_object"],
            world=WorldState.from_array(d["world_features"], self.layout),
            timestamp=d["timestamp"],
        )

    def _segment_to_dict(self, seg: DemoSegment) -> dict:
        return {
            "demo_id": seg.demo_id,
            "position": seg.position,
            "reference_object": seg.reference_object,
            "keyframes": [self._keyframe_to_dict(k) for k in seg.keyframes],
        }

    def _segment_from_dict(self, d: dict) -> DemoSegment:
        kfs = [self._keyframe_from_dict(k) for k in d["keyframes"]]
        return DemoSegment(
            keyframes=kfs,
            reference_object=d["reference_object"],
            start_state=kfs[0].world,
            demo_id=d["demo_id"],
            position=d["position"],
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "scenario": self.scenario,
            "layout": list(self.layout),
            "meta": self.meta,
            "start_id": self.start_id,
            "next_id": self._next_id,
            "nodes": [
                {
                    "id": node.id,
                    "policy": None if node.policy is None else node.policy.to_dict(),
                    "classifier": node.classifier.to_dict(),
                    "segments": [self._segment_to_dict(s) for s in node.segments],
                    "start_states": [list(s.features) for s in node.start_states],
                }
                for _, node in sorted(self.nodes.items())
            ],
            "edges": sorted([u, v] for (u, v) in self.edges),
            "traversal_log": [
                {"demo_id": e["demo_id"], "path": list(e["path"])} for e in self.traversal_log
            ],
        }

    @staticmethod
    def from_dict(d: dict, *, path: str | None = None) -> "TaskModel":
        version = d.get("schema_version")
        if version != MODEL_SCHEMA_VERSION:
            raise ModelFileError(f"unsupported model schema version {version!r}", path=path)
        try:
            model = TaskModel(d["layout"], scenario=d.get("scenario", ""), meta=d.get("meta"))
            model.nodes = {}
            for nd in d["nodes"]:
                classifier = InitiationClassifier.from_dict(nd["classifier"], model.layout)
                policy = None if nd["policy"] is None else GaussianHMM.from_dict(nd["policy"])
                node = Primitive(
                    id=nd["id"],
                    policy=policy,
                    classifier=classifier,
                    segments=[model._segment_from_dict(s) for s in nd["segments"]],
                    start_states=[
                        WorldState.from_array(f, model.layout) for f in nd["start_states"]
                    ],
                )
                model.nodes[node.id] = node
            model.start_id = d["start_id"]
            model.edges = {(u, v) for u, v in d["edges"]}
            model.traversal_log = [
                {"demo_id": e["demo_id"], "path": list(e["path"])} for e in d["traversal_log"]
            ]
            model._next_id = d["next_id"]
        except (KeyError, TypeError, IndexError) as exc:
            raise ModelFileError(f"malformed model file: {exc}", path=path) from exc
        model.validate()
        return model

    def to_dot(self) -> str:
        """Deterministic DOT rendering of the automaton."""
        lines = [
            "digraph task_model {",
            "  rankdir=LR;",
            f'  label="kappa={self.kappa}";',
        ]
        for nid, node in sorted(self.nodes.items()):
            if node.is_start:
                lines.append(f'  n{nid} [shape=doubleoctagon, label="start"];')
            else:
                label = f"z{nid} segs={len(node.segments)}"
                lines.append(f'  n{nid} [shape=ellipse, label="{label}"];')
        for u, v in sorted(self.edges):
            lines.append(f"  n{u} -> n{v};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def save_model(model: TaskModel, path: str) -> None:
    model.validate()
    text = json.dumps(model.to_dict(), sort_keys=True, indent=2) + "\n"
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def load_model(path: str) -> TaskModel:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ModelFileError(
            "invalid model file", path=path, location=f"line {exc.lineno} col {exc.colno}"
        ) from exc
    except OSError as exc:
        raise ModelFileError(f"cannot read model file: {exc}", path=path) from exc
    return TaskModel.from_dict(data, path=path)


def models_equal(a: TaskModel, b: TaskModel) -> bool:
    """Field-for-field equality through the canonical serialization."""
    return a.to_dict() == b.to_dict()
