import json
import math

import numpy as np
import pytest
from util import LAYOUT, bootstrap_model, segment_from_rel, state

from skillgraph.classifier import InitiationClassifier, fit_classifier
from skillgraph.demos import Pose2, WorldState
from skillgraph.errors import ConsistencyError, InvalidInputError, ModelFileError
from skillgraph.hmm import GaussianHMM
from skillgraph.task_model import (
    Primitive,
    TaskModel,
    load_model,
    models_equal,
    save_model,
)
from skillgraph.world import RuleTable, World


def tiny_policy(offset=0.0, dim=4):
    means = np.zeros((2, dim))
    means[1, 0] = 1.0 + offset
    trans = np.array([[0.0, 1.0], [0.0, 1.0]])
    return GaussianHMM([1.0, 0.0], trans, means, np.full((2, dim), 1e-4))


def const_classifier(p):
    """Classifier with probability p everywhere (zero weights, fixed bias)."""
    bias = math.log(p / (1 - p))
    return InitiationClassifier(np.zeros(4), bias, [state(0)], [state(1)])


def make_primitive(pid, proba=0.9, offset=0.0):
    seg = segment_from_rel([[0, 0, 0, 0], [1 + offset, 0, 0, 0]], demo_id=f"d{pid}")
    return Primitive(
        id=pid,
        policy=tiny_policy(offset),
        classifier=const_classifier(proba),
        segments=[seg],
        start_states=[seg.start_state],
    )


class TestGraphMutation:
    def test_add_node_to_fresh_model(self):
        m = TaskModel(LAYOUT)
        assert m.kappa == 1
        m.add_node(make_primitive(m.new_node_id()))
        assert m.kappa == 2

    def test_two_adds_distinct_ids(self):
        m = TaskModel(LAYOUT)
        a = m.add_node(make_primitive(m.new_node_id()))
        b = m.add_node(make_primitive(m.new_node_id()))
        assert a != b

    def test_node_round_trip_by_id(self):
        m = TaskModel(LAYOUT)
        prim = make_primitive(m.new_node_id())
        m.add_node(prim)
        got = m.node(prim.id)
        assert got is prim
        assert got.segments == prim.segments

    def test_duplicate_id_rejected(self):
        m = TaskModel(LAYOUT)
        prim = make_primitive(m.new_node_id())
        m.add_node(prim)
        with pytest.raises(InvalidInputError):
            m.add_node(make_primitive(prim.id))

    def test_add_edge_idempotent(self):
        m = TaskModel(LAYOUT)
        a = m.add_node(make_primitive(m.new_node_id()))
        assert m.add_edge(m.start_id, a) is True
        assert m.add_edge(m.start_id, a) is False
        assert len(m.edges) == 1

    def test_children_and_parents(self):
        m = TaskModel(LAYOUT)
        a = m.add_node(make_primitive(m.new_node_id()))
        b = m.add_node(make_primitive(m.new_node_id()))
        m.add_edge(a, b)
        assert b in m.children(a)
        assert a in m.parents(b)

    def test_self_edge_allowed_once(self):
        m = TaskModel(LAYOUT)
        a = m.add_node(make_primitive(m.new_node_id()))
        assert m.add_edge(a, a) is True
        assert m.add_edge(a, a) is False
        assert (a, a) in m.edges

    def test_missing_endpoint_rejected(self):
        m = TaskModel(LAYOUT)
        with pytest.raises(InvalidInputError):
            m.add_edge(m.start_id, 42)


class TestApplicableSet:
    def test_start_only_model_empty(self):
        m = TaskModel(LAYOUT)
        assert m.applicable_set(state(0)) == []

    def test_degenerate_node_always_applicable(self):
        m = TaskModel(LAYOUT)
        prim = make_primitive(m.new_node_id())
        prim.classifier = fit_classifier([state(0)], [])
        m.add_node(prim)
        for probe in (state(0), state(9, -3, 1, 1)):
            assert [p.id for p in m.applicable_set(probe)] == [prim.id]

    def test_separated_clusters_select_matching_node(self):
        rng = np.random.default_rng(0)
        cluster_a = [state(*(np.array([2, 2, 0, 0]) + rng.normal(0, 0.2, 4))) for _ in range(15)]
        cluster_b = [state(*(np.array([-2, -2, 0, 0]) + rng.normal(0, 0.2, 4))) for _ in range(15)]
        m = TaskModel(LAYOUT)
        pa = make_primitive(m.new_node_id())
        pa.classifier = fit_classifier(cluster_a, cluster_b)
        m.add_node(pa)
        pb = make_primitive(m.new_node_id())
        pb.classifier = fit_classifier(cluster_b, cluster_a)
        m.add_node(pb)
        probe = state(2.1, 1.9, 0, 0)
        assert [p.id for p in m.applicable_set(probe)] == [pa.id]

    def test_ascending_id_order(self):
        m = TaskModel(LAYOUT)
        ids = [m.add_node(make_primitive(m.new_node_id())) for _ in range(4)]
        got = [p.id for p in m.applicable_set(state(0))]
        assert got == sorted(ids)


class TestSelectNext:
    def test_no_children_terminal(self):
        m = TaskModel(LAYOUT)
        out = m.select_next(m.start_id, state(0))
        assert out.kind == "terminal"

    def test_single_degenerate_child(self):
        m = TaskModel(LAYOUT)
        prim = make_primitive(m.new_node_id())
        prim.classifier = fit_classifier([state(0)], [])
        m.add_node(prim)
        m.add_edge(m.start_id, prim.id)
        out = m.select_next(m.start_id, state(4))
        assert out.kind == "node" and out.node_id == prim.id

    def test_argmax_of_probabilities(self):
        m = TaskModel(LAYOUT)
        hi = make_primitive(m.new_node_id(), proba=0.9)
        lo = make_primitive(m.new_node_id(), proba=0.2)
        m.add_node(hi)
        m.add_node(lo)
        m.add_edge(m.start_id, hi.id)
        m.add_edge(m.start_id, lo.id)
        out = m.select_next(m.start_id, state(0))
        assert out.node_id == hi.id

    def test_tie_breaks_to_lowest_id(self):
        m = TaskModel(LAYOUT)
        a = make_primitive(m.new_node_id(), proba=0.8)
        b = make_primitive(m.new_node_id(), proba=0.8)
        m.add_node(a)
        m.add_node(b)
        m.add_edge(m.start_id, a.id)
        m.add_edge(m.start_id, b.id)
        assert m.select_next(m.start_id, state(0)).node_id == min(a.id, b.id)

    def test_below_threshold_is_failure_with_state(self):
        m = TaskModel(LAYOUT)
        lo = make_primitive(m.new_node_id(), proba=0.3)
        m.add_node(lo)
        m.add_edge(m.start_id, lo.id)
        probe = state(7)
        out = m.select_next(m.start_id, probe, theta=0.5)
        assert out.kind == "failure"
        assert out.state == probe
        assert out.node_id == m.start_id


class TestExecute:
    def teach_replay_model(self, obj_pose):
        template = [[-1.0, 0.0, 0.0, 0.0], [-0.4, 0.2, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]
        seg = segment_from_rel(template, demo_id="teach", obj_pose=obj_pose)
        return bootstrap_model([[seg]])

    def test_teach_then_replay_round_trip(self):
        obj_pose = Pose2(2.0, 1.0, 0.0)
        m = self.teach_replay_model(obj_pose)
        world = World(objects={"obj": obj_pose}, ee=Pose2(0.0, 0.0, 0.0), gripper=0.0)
        trace = m.execute(world, RuleTable(), rng_seed=5)
        assert trace.outcome == "success"
        assert trace.visited == [m.start_id, 1]
        final = trace.final_world.ee
        assert math.hypot(final.x - obj_pose.x, final.y - obj_pose.y) < 0.1

    def test_threshold_saturation_fails_immediately(self):
        m = TaskModel(LAYOUT)
        prim = make_primitive(m.new_node_id(), proba=0.97)
        m.add_node(prim)
        m.add_edge(m.start_id, prim.id)
        world = World(objects={"obj": Pose2(0, 0, 0)}, ee=Pose2(0, 1, 0), gripper=0.0)
        trace = m.execute(world, RuleTable(), theta=1 - 1e-12)
        assert trace.outcome == "failure"
        assert trace.reason == "selection"
        assert trace.visited == [m.start_id]
        assert trace.failed_node == m.start_id

    def test_branching_follows_world_flag(self):
        layout = ("flag", "obj")
        flag_a, flag_b = Pose2(3.0, 3.0, 0.0), Pose2(-3.0, -3.0, 0.0)
        obj = Pose2(1.0, 0.0, 0.0)

        def world_with(flag_pose):
            return World(objects={"flag": flag_pose, "obj": obj}, ee=Pose2(0, 0, 0), gripper=0.0)

        s_a = world_with(flag_a).features(layout)
        s_b = world_with(flag_b).features(layout)
        m = TaskModel(layout)
        seg = segment_from_rel([[0, 0, 0, 0], [0.5, 0, 0, 0]])
        for positives, negatives in ((s_a, s_b), (s_b, s_a)):
            prim = Primitive(
                id=m.new_node_id(),
                policy=tiny_policy(),
                classifier=fit_classifier([positives], [negatives]),
                segments=[seg],
                start_states=[positives],
            )
            m.add_node(prim)
            m.add_edge(m.start_id, prim.id)
        t_a = m.execute(world_with(flag_a), RuleTable(), rng_seed=0)
        t_b = m.execute(world_with(flag_b), RuleTable(), rng_seed=0)
        assert t_a.visited == [m.start_id, 1]
        assert t_b.visited == [m.start_id, 2]

    def test_deterministic_under_seed(self):
        m = self.teach_replay_model(Pose2(1.5, 0.5, 0.0))
        world = World(objects={"obj": Pose2(1.5, 0.5, 0.0)}, ee=Pose2(0, 0, 0), gripper=0.0)
        t1 = m.execute(world, RuleTable(), rng_seed=9)
        t2 = m.execute(world, RuleTable(), rng_seed=9)
        assert t1.to_dict() == t2.to_dict()

    def test_visits_only_edges(self):
        m = self.teach_replay_model(Pose2(1.0, 1.0, 0.0))
        world = World(objects={"obj": Pose2(1.0, 1.0, 0.0)}, ee=Pose2(0, 0, 0), gripper=0.0)
        trace = m.execute(world, RuleTable(), rng_seed=1)
        for a, b in zip(trace.visited, trace.visited[1:]):
            assert (a, b) in m.edges

    def test_empty_model_fails(self):
        m = TaskModel(LAYOUT)
        world = World(objects={"obj": Pose2(0, 0, 0)}, ee=Pose2(0, 1, 0), gripper=0.0)
        trace = m.execute(world, RuleTable())
        assert trace.outcome == "failure"
        assert trace.reason == "empty-model"


def random_model(n_nodes=50, seed=0):
    rng = np.random.default_rng(seed)
    m = TaskModel(LAYOUT)
    ids = []
    for _ in range(n_nodes):
        pid = m.new_node_id()
        seg = segment_from_rel(
            [[float(rng.normal()), float(rng.normal()), 0.0, 0.0] for _ in range(3)],
            demo_id=f"d{pid}",
        )
        prim = Primitive(
            id=pid,
            policy=tiny_policy(float(rng.normal())),
            classifier=fit_classifier(
                [state(float(rng.normal(3, 0.2)))], [state(float(rng.normal(-3, 0.2)))]
            ),
            segments=[seg],
            start_states=[seg.start_state],
        )
        m.add_node(prim)
        ids.append(pid)
    for i, pid in enumerate(ids):
        m.add_edge(m.start_id if i == 0 else ids[i - 1], pid)
    for _ in range(20):
        u, v = rng.choice(ids, size=2, replace=True)
        m.add_edge(int(u), int(v))
    m.traversal_log.append({"demo_id": "d1", "path": [m.start_id, ids[0], ids[1]]})
    return m


class TestSerialization:
    def test_empty_model_round_trip(self, tmp_path):
        m = TaskModel(LAYOUT, scenario="s")
        p = tmp_path / "m.json"
        save_model(m, str(p))
        m2 = load_model(str(p))
        assert models_equal(m, m2)

    def test_random_model_byte_identical_second_save(self, tmp_path):
        m = random_model()
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_model(m, str(p1))
        m2 = load_model(str(p1))
        save_model(m2, str(p2))
        assert p1.read_bytes() == p2.read_bytes()
        assert models_equal(m, m2)

    def test_truncated_file_errors_without_partial_model(self, tmp_path):
        m = random_model(n_nodes=3, seed=1)
        p = tmp_path / "m.json"
        save_model(m, str(p))
        text = p.read_text()
        p.write_text(text[: len(text) // 3])
        with pytest.raises(ModelFileError) as err:
            load_model(str(p))
        assert "line" in str(err.value)

    def test_version_mismatch(self, tmp_path):
        m = TaskModel(LAYOUT)
        p = tmp_path / "m.json"
        save_model(m, str(p))
        data = json.loads(p.read_text())
        data["schema_version"] = 999
        p.write_text(json.dumps(data))
        with pytest.raises(ModelFileError):
            load_model(str(p))

    def test_validate_catches_bad_traversal(self):
        m = random_model(n_nodes=3, seed=2)
        m.traversal_log.append({"demo_id": "bad", "path": [1, 3]})
        if (1, 3) not in m.edges:
            with pytest.raises(ConsistencyError):
                m.validate()


class TestDot:
    def test_empty_model_header_only(self):
        dot = TaskModel(LAYOUT).to_dot()
        assert dot.startswith("digraph task_model {")
        assert "->" not in dot

    def test_chain_of_three_has_two_edges(self):
        m = TaskModel(LAYOUT)
        a = m.add_node(make_primitive(m.new_node_id()))
        b = m.add_node(make_primitive(m.new_node_id()))
        m.add_edge(m.start_id, a)
        m.add_edge(a, b)
        dot = m.to_dot()
        assert dot.count("->") == 2
        assert 'label="start"' in dot
        assert f"n{a} -> n{b};" in dot

    def test_reemission_identical(self):
        m = random_model(n_nodes=6, seed=3)
        assert m.to_dot() == m.to_dot()


class TestPrimitive:
    def test_dominant_reference_ties_lexicographic(self):
        seg_a = segment_from_rel([[0, 0, 0, 0]], ref="obj")
        kfs = segment_from_rel([[0, 0, 0, 0]], ref="obj").keyframes
        prim = Primitive(
            id=7,
            policy=tiny_policy(),
            classifier=const_classifier(0.5),
            segments=[seg_a],
            start_states=[seg_a.start_state],
        )
        assert prim.dominant_reference() == "obj"

    def test_misaligned_provenance_rejected(self):
        with pytest.raises(InvalidInputError):
            Primitive(
                id=1,
                policy=tiny_policy(),
                classifier=const_classifier(0.5),
                segments=[],
                start_states=[state(0)],
            )
