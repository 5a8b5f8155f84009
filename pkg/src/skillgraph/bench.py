"""Benchmark: one corrective update under local repair vs a full rebuild.

The synthetic models place node start-regions on a circle so plain logistic
classifiers localize them (radially-outward weights reject far regions),
keeping the applicable set small no matter how many nodes exist.  The rebuild
baseline pools every stored segment, re-clusters all nodes globally, and
retrains everything, then rebuilds edges from the pooled traversal history.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .classifier import InitiationClassifier, fit_classifier
from .demos import WorldState
from .task_model import Primitive, TaskModel
from .updates import (
    UpdateConfig,
    agglomerate,
    counters,
    incorporate_segments,
    local_reconnect,
    policy_from_segments,
    reconnect_mapping,
)

BENCH_LAYOUT = ("anchor",)
REGION_RADIUS = 20.0
CLUSTER_SPREAD = 0.02
STATES_PER_NODE = 6


def _region_state(rng, angle) -> WorldState:
    x = REGION_RADIUS * math.cos(angle) + rng.normal(0, CLUSTER_SPREAD)
    y = REGION_RADIUS * math.sin(angle) + rng.normal(0, CLUSTER_SPREAD)
    return WorldState.from_array([x, y, 0.0, 0.0], BENCH_LAYOUT)


def _region_classifier(kappa: int, i: int, positives, negatives) -> InitiationClassifier:
    """Exact window classifier for one circle region.

    Built directly rather than fitted: start regions sit on a circle, so the
    radially-outward hyperplane halfway between a region and its neighbours
    accepts exactly that region.  Gain is set for a +/-4 logit margin.
    """
    phi = 2 * math.pi * i / kappa
    dphi = 2 * math.pi / kappa
    margin = REGION_RADIUS * (1.0 - math.cos(dphi)) / 2.0
    gain = 4.0 / margin
    w = np.array([gain * math.cos(phi), gain * math.sin(phi), 0.0, 0.0])
    bias = -gain * REGION_RADIUS * (1.0 + math.cos(dphi)) / 2.0
    return InitiationClassifier(
        weights=w, bias=bias, positives=list(positives), negatives=list(negatives)
    )


def _node_template(i: int, kappa: int):
    phi = 2 * math.pi * i / kappa
    ax, ay = 6 * math.cos(phi), 6 * math.sin(phi)
    return [
        [ax, ay, 0.0, 0.2],
        [ax + 1.0, ay + 0.5, 0.3, 0.8],
        [ax + 2.0, ay, 0.6, 0.2],
    ]


def _node_segments(i, kappa, n, sigma, rng, prefix):
    from .demos import Keyframe, Pose2, world_state_from_poses

    template = _node_template(i, kappa)
    segments = []
    for k in range(n):
        kfs = []
        for t, p in enumerate(template):
            ee = Pose2(
                p[0] + rng.normal(0, sigma), p[1] + rng.normal(0, sigma),
                p[2] + rng.normal(0, sigma / 2),
            )
            world = world_state_from_poses(ee, p[3], {"anchor": Pose2(0, 0, 0)}, BENCH_LAYOUT)
            kfs.append(
                Keyframe(ee_pose=ee, gripper=p[3], reference_object="anchor",
                         world=world, timestamp=t)
            )
        from .demos import DemoSegment

        segments.append(
            DemoSegment(
                keyframes=kfs, reference_object="anchor", start_state=kfs[0].world,
                demo_id=f"{prefix}{i}-{k}", position=0,
            )
        )
    return segments


def build_synthetic_model(kappa: int, seed: int = 0, cfg: UpdateConfig | None = None):
    """Chain automaton with localized start regions and distinct skills.

    Returns (model, probe states by node index) so callers can aim a
    corrective update at any node's region.
    """
    cfg = cfg or UpdateConfig()
    rng = np.random.default_rng(seed)
    model = TaskModel(BENCH_LAYOUT, scenario=f"bench-{kappa}")
    region_states = []
    prims = []
    for i in range(kappa):
        phi = 2 * math.pi * i / kappa
        cluster = [_region_state(rng, phi) for _ in range(STATES_PER_NODE)]
        region_states.append(cluster)
    for i in range(kappa):
        segments = _node_segments(i, kappa, 2, 0.02, rng, "seed")
        negatives = [
            s
            for j in (i - 1, i + 1)
            for s in region_states[j % kappa]
        ]
        prim = Primitive(
            id=model.new_node_id(),
            policy=policy_from_segments(segments, cfg.interp_step),
            classifier=_region_classifier(kappa, i, region_states[i], negatives),
            segments=segments,
            start_states=list(region_states[i])[: len(segments)],
        )
        model.add_node(prim)
        prims.append(prim)
    for a, b in zip(prims, prims[1:]):
        model.add_edge(a.id, b.id)
    model.add_edge(model.start_id, prims[0].id)
    path = [model.start_id] + [p.id for p in prims]
    model.traversal_log.append({"demo_id": "seed-chain", "path": path})
    model.validate()
    return model, region_states


def corrective_input(kappa: int, target: int, seed: int = 1):
    """A fresh segment and start state aimed at one node's region."""
    rng = np.random.default_rng(seed)
    phi = 2 * math.pi * target / kappa
    state = _region_state(rng, phi)
    segment = _node_segments(target, kappa, 1, 0.02, rng, "fix")[0]
    return state, segment


def rebuild_baseline(model: TaskModel, state, segment, cfg: UpdateConfig) -> int:
    """Global re-cluster of every node plus the new data; refits everything.

    Returns the number of components retrained by the global phase alone
    (the subsequent segment incorporation is counted separately).
    """
    prims = [model.nodes[n] for n in sorted(model.nodes) if n != model.start_id]
    result = agglomerate([(p.id, p.policy) for p in prims], cfg)
    by_id = {p.id: p for p in prims}
    rebuilt = []
    for members in result.clusters:
        parts = [by_id[m] for m in members]
        segments = [s for p in parts for s in p.segments]
        positives = [s for p in parts for s in p.classifier.positives]
        negatives = [s for p in parts for s in p.classifier.negatives]
        counters.policy_fits += 1
        counters.classifier_fits += 1
        rebuilt.append(
            Primitive(
                id=members[0],
                policy=policy_from_segments(segments, cfg.interp_step),
                classifier=fit_classifier(positives, negatives or []),
                segments=segments,
                start_states=[s for p in parts for s in p.start_states],
            )
        )
    mapping = reconnect_mapping(result)
    local_reconnect(model, [p.id for p in prims], rebuilt, mapping)
    global_refits = counters.policy_fits
    incorporate_segments(model, model.start_id, [state], [segment], cfg)
    return global_refits


def run_bench(sizes, seed: int = 0, cfg: UpdateConfig | None = None) -> dict:
    """Timing and refit-count table for local updates vs full rebuilds."""
    cfg = cfg or UpdateConfig()
    rows = []
    for kappa in sizes:
        target = kappa // 2
        state, segment = corrective_input(kappa, target, seed + 1)

        model, _ = build_synthetic_model(kappa, seed, cfg)
        applicable = len(model.applicable_set(state, cfg.theta))
        counters.reset()
        t0 = time.perf_counter()
        incorporate_segments(model, model.start_id, [state], [segment], cfg)
        situ_seconds = time.perf_counter() - t0
        situ_policy, situ_classifier = counters.policy_fits, counters.classifier_fits

        model, _ = build_synthetic_model(kappa, seed, cfg)
        counters.reset()
        t0 = time.perf_counter()
        rebuild_policy = rebuild_baseline(model, state, segment, cfg)
        rebuild_seconds = time.perf_counter() - t0

        rows.append(
            {
                "kappa": kappa,
                "applicable": applicable,
                "situ_policy_refits": situ_policy,
                "situ_classifier_refits": situ_classifier,
                "rebuild_refits": rebuild_policy,
                "situ_seconds": round(situ_seconds, 6),
                "rebuild_seconds": round(rebuild_seconds, 6),
                "time_ratio": round(situ_seconds / rebuild_seconds, 6),
            }
        )
    return {"schema": "bench-report/1", "sizes": list(sizes), "rows": rows}
