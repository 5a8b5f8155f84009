"""Incremental task-model repair from corrective demonstration segments.

Each segment is folded into the automaton through a local update: the
applicable primitives are re-clustered under the policy divergence, the graph
is rewired through the old-to-new id mapping, and the segment either updates
its matching primitive or becomes a new node wired from the previous one.
Everything outside the applicable set keeps bit-identical parameters, which
the refit counters make checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import fit_classifier, update_classifier
from .demos import DemoSegment, Demonstration, interpolate_segment, segment_by_reference
from .errors import ConsistencyError, InvalidInputError
from .hmm import GaussianHMM, fit_policy, hmm_distance
from .task_model import Primitive, TaskModel

QUERY_SEED_ID = 2**31 - 1

NODE_ADDITION = "node_addition"
EDGE_ADDITION = "edge_addition"
NODE_MODIFICATION = "node_modification"


@dataclass
class UpdateConfig:
    theta: float = 0.5
    tau: float = 1.0
    # Policies are trained on the interpolated segment trajectory.  The default
    # step exceeds typical keyframe spacing, so fits anchor exactly on the
    # keyframes; smaller steps densify the trajectory for matching instead.
    interp_step: float = 4.0
    distance_sequences: int = 32
    distance_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "tau": self.tau,
            "interp_step": self.interp_step,
            "distance_sequences": self.distance_sequences,
            "distance_seed": self.distance_seed,
        }


@dataclass
class EditRecord:
    kind: str
    nodes: list = field(default_factory=list)  # [kept, *absorbed] for modifications
    edge: tuple | None = None
    demo_id: str = ""
    segment_index: int = -1

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "nodes": list(self.nodes),
            "edge": None if self.edge is None else list(self.edge),
            "demo_id": self.demo_id,
            "segment_index": self.segment_index,
        }

    @staticmethod
    def from_dict(d: dict) -> "EditRecord":
        return EditRecord(
            kind=d["kind"],
            nodes=list(d["nodes"]),
            edge=None if d["edge"] is None else tuple(d["edge"]),
            demo_id=d["demo_id"],
            segment_index=d["segment_index"],
        )


@dataclass
class ClusteringResult:
    clusters: list  # lists of member ids (query uses QUERY_SEED_ID)
    linkage_distances: list
    threshold: float


@dataclass
class RefitCounters:
    """Counts model-component fits (scratch query models are not refits)."""

    policy_fits: int = 0
    classifier_fits: int = 0

    def reset(self) -> None:
        self.policy_fits = 0
        self.classifier_fits = 0

    def total(self) -> int:
        return self.policy_fits + self.classifier_fits


counters = RefitCounters()


def policy_from_segments(segments, interp_step: float = 4.0) -> GaussianHMM:
    """Deterministic policy refit from stored provenance."""
    trajectories = [interpolate_segment(s, interp_step) for s in segments]
    kf_counts = [len(s.keyframes) for s in segments]
    return fit_policy(trajectories, keyframe_counts=kf_counts)


def _fit_policy_counted(segments, interp_step):
    counters.policy_fits += 1
    return policy_from_segments(segments, interp_step)


def _fit_classifier_counted(positives, negatives):
    counters.classifier_fits += 1
    return fit_classifier(positives, negatives)


def _pair_distance(
    id_a: int, policy_a, id_b: int, policy_b, cfg: UpdateConfig
) -> float:
    """Order-independent divergence: the seed depends only on the id pair."""
    (lo_id, lo), (hi_id, hi) = sorted([(id_a, policy_a), (id_b, policy_b)], key=lambda t: t[0])
    seed = np.random.SeedSequence([cfg.distance_seed, lo_id, hi_id])
    return hmm_distance(lo, hi, num_sequences=cfg.distance_sequences, rng_seed=seed)


def agglomerate(items, cfg: UpdateConfig) -> ClusteringResult:
    """Complete-linkage clustering of (id, policy) pairs, cut at the threshold."""
    ids = [i for i, _ in items]
    dist = {}
    for x in range(len(items)):
        for y in range(x + 1, len(items)):
            d = _pair_distance(items[x][0], items[x][1], items[y][0], items[y][1], cfg)
            dist[(ids[x], ids[y])] = d
            dist[(ids[y], ids[x])] = d
    clusters = [[i] for i in sorted(ids)]
    linkage = []
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                link = max(dist[(u, v)] for u in clusters[a] for v in clusters[b])
                key = (link, clusters[a][0], clusters[b][0])
                if best is None or key < best[0:3]:
                    best = (link, clusters[a][0], clusters[b][0], a, b)
        link, _, _, a, b = best
        if link >= cfg.tau:
            break
        merged = sorted(clusters[a] + clusters[b])
        clusters = [c for i, c in enumerate(clusters) if i not in (a, b)] + [merged]
        clusters.sort(key=lambda c: c[0])
        linkage.append(link)
    return ClusteringResult(clusters=clusters, linkage_distances=linkage, threshold=cfg.tau)


def _merge_unique(lists):
    out = []
    for chunk in lists:
        for item in chunk:
            if item not in out:
                out.append(item)
    return out


def cluster(primitives, cfg: UpdateConfig):
    """Group applicable primitives by policy divergence and retrain merges.

    Singleton clusters pass through untouched (same objects, no refit); each
    merged cluster becomes one primitive under the lowest constituent id,
    retrained on the union of the stored segments and start states.
    """
    prims = sorted(primitives, key=lambda p: p.id)
    if not prims:
        return [], ClusteringResult(clusters=[], linkage_distances=[], threshold=cfg.tau)
    result = agglomerate([(p.id, p.policy) for p in prims], cfg)
    by_id = {p.id: p for p in prims}
    out = []
    for members in result.clusters:
        if len(members) == 1:
            out.append(by_id[members[0]])
            continue
        parts = [by_id[m] for m in members]
        segments = [s for p in parts for s in p.segments]
        start_states = [s for p in parts for s in p.start_states]
        positives = _merge_unique([p.classifier.positives for p in parts])
        negatives = _merge_unique([p.classifier.negatives for p in parts])
        merged = Primitive(
            id=members[0],
            policy=_fit_policy_counted(segments, cfg.interp_step),
            classifier=_fit_classifier_counted(positives, negatives),
            segments=segments,
            start_states=start_states,
        )
        out.append(merged)
    return out, result


def reconnect_mapping(result: ClusteringResult) -> dict:
    """Old node id -> surviving id induced by cluster membership."""
    mapping = {}
    for members in result.clusters:
        for m in members:
            mapping[m] = members[0]
    return mapping


def local_reconnect(model: TaskModel, old_ids, new_primitives, mapping) -> None:
    """Swap the old applicable set for the re-clustered primitives.

    Every edge and traversal entry is rewritten through the id mapping;
    edges entirely outside the old set are untouched.
    """
    old_ids = set(old_ids)
    for u, v in model.edges:
        for endpoint in (u, v):
            if endpoint in old_ids and endpoint not in mapping:
                raise ConsistencyError(f"node {endpoint} has no home after reconnection")
    for nid in old_ids:
        if nid not in mapping:
            raise ConsistencyError(f"node {nid} has no home after reconnection")
        del model.nodes[nid]
    for prim in new_primitives:
        model.nodes[prim.id] = prim
        model._next_id = max(model._next_id, prim.id + 1)
    model.edges = {
        (mapping.get(u, u), mapping.get(v, v)) for (u, v) in model.edges
    }
    for entry in model.traversal_log:
        entry["path"] = [mapping.get(n, n) for n in entry["path"]]


def find_policy(segment: DemoSegment, policies, cfg: UpdateConfig):
    """Index of the policy the segment belongs to, or None.

    A query model is trained on the segment's interpolated trajectory and
    clustered together with the candidates; membership is whichever cluster
    the query lands in.  The query model is scratch work, not a refit.
    """
    policies = list(policies)
    if not policies:
        return None, None
    query = fit_policy(
        [interpolate_segment(segment, cfg.interp_step)],
        keyframe_counts=[len(segment.keyframes)],
    )
    items = [(i, p) for i, p in enumerate(policies)]
    items.append((QUERY_SEED_ID, query))
    result = agglomerate(items, cfg)
    for members in result.clusters:
        if QUERY_SEED_ID in members:
            candidates = [m for m in members if m != QUERY_SEED_ID]
            if not candidates:
                return None, result
            return min(candidates), result
    return None, result


def _collect_start_states(model: TaskModel, node_ids) -> list:
    states = []
    for nid in sorted(set(node_ids)):
        if nid == model.start_id:
            continue
        for s in model.nodes[nid].start_states:
            if s not in states:
                states.append(s)
    return states


def local_update(a: int, s, d: DemoSegment, applicable, model: TaskModel, cfg: UpdateConfig):
    """One segment's worth of repair; returns (next current id, edit records).

    Mirrors the two branches: unmatched segments create and connect a new
    primitive, matched segments retrain the existing one and re-assert the
    incoming edge.
    """
    model.node(a)
    records = []
    applied_mapping = {}
    z_new, result = cluster(applicable, cfg)
    if applicable:
        mapping = reconnect_mapping(result)
        merged_clusters = [m for m in result.clusters if len(m) > 1]
        if merged_clusters:
            local_reconnect(model, [p.id for p in applicable], z_new, mapping)
            applied_mapping = {k: v for k, v in mapping.items() if k != v}
            a = mapping.get(a, a)
            for members in merged_clusters:
                records.append(
                    EditRecord(
                        kind=NODE_MODIFICATION,
                        nodes=list(members),
                        demo_id=d.demo_id,
                        segment_index=d.position,
                    )
                )

    ordered = sorted(z_new, key=lambda p: p.id)
    match_index, _ = find_policy(d, [p.policy for p in ordered], cfg)

    if match_index is None:
        negatives = _collect_start_states(model, model.children(a))
        prim = Primitive(
            id=model.new_node_id(),
            policy=_fit_policy_counted([d], cfg.interp_step),
            classifier=_fit_classifier_counted([s], negatives),
            segments=[d],
            start_states=[s],
        )
        model.add_node(prim)
        records.append(
            EditRecord(
                kind=NODE_ADDITION, nodes=[prim.id], demo_id=d.demo_id, segment_index=d.position
            )
        )
        model.add_edge(a, prim.id)
        records.append(
            EditRecord(
                kind=EDGE_ADDITION, edge=(a, prim.id), demo_id=d.demo_id,
                segment_index=d.position,
            )
        )
        return prim.id, records, applied_mapping

    z = ordered[match_index]
    neighborhood = set(model.children(a))
    for r in model.parents(z.id):
        neighborhood.update(model.children(r))
    own = list(z.start_states) + [s]
    negatives = [n for n in _collect_start_states(model, neighborhood) if n not in own]
    z.segments.append(d)
    z.start_states.append(s)
    z.policy = _fit_policy_counted(z.segments, cfg.interp_step)
    before = (len(z.classifier.positives), len(z.classifier.negatives))
    updated = update_classifier(z.classifier, [s], negatives)
    if (len(updated.positives), len(updated.negatives)) != before:
        counters.classifier_fits += 1
    z.classifier = updated
    records.append(
        EditRecord(
            kind=NODE_MODIFICATION, nodes=[z.id], demo_id=d.demo_id, segment_index=d.position
        )
    )
    if model.add_edge(a, z.id):
        records.append(
            EditRecord(
                kind=EDGE_ADDITION, edge=(a, z.id), demo_id=d.demo_id, segment_index=d.position
            )
        )
    return z.id, records, applied_mapping


def incorporate_segments(
    model: TaskModel, entry: int, states, segments, cfg: UpdateConfig | None = None
):
    """Walk the segments with their start states, applying local updates.

    The model is updated in place; the demonstration's node path is appended
    to the traversal log.  Returns the accumulated edit records.
    """
    cfg = cfg or UpdateConfig()
    if len(states) != len(segments):
        raise InvalidInputError("states and segments must align one to one")
    model.node(entry)
    if not segments:
        return []
    records = []
    a = entry
    path = [entry]
    for s, d in zip(states, segments):
        applicable = model.applicable_set(s, cfg.theta)
        a, recs, mapping = local_update(a, s, d, applicable, model, cfg)
        records.extend(recs)
        if mapping:
            path = [mapping.get(n, n) for n in path]
        path.append(a)
    model.traversal_log.append({"demo_id": segments[0].demo_id, "path": path})
    model.validate()
    return records


def incorporate_demo(
    model: TaskModel, demo: Demonstration, entry: int | None = None,
    cfg: UpdateConfig | None = None,
):
    """Segment a demonstration and fold it into the model from the entry node."""
    segments = segment_by_reference(demo)
    states = [seg.start_state for seg in segments]
    return incorporate_segments(
        model, model.start_id if entry is None else entry, states, segments, cfg
    )


def apply_edits_to_skeleton(nodes, edges, records):
    """Replay edit records against a graph skeleton (node ids and edges).

    Used to verify that the records alone reproduce the structural diff of a
    model update.
    """
    nodes = set(nodes)
    edges = set(edges)
    for rec in records:
        if rec.kind == NODE_ADDITION:
            nodes.add(rec.nodes[0])
        elif rec.kind == EDGE_ADDITION:
            edges.add(tuple(rec.edge))
        elif rec.kind == NODE_MODIFICATION:
            kept = rec.nodes[0]
            for absorbed in rec.nodes[1:]:
                edges = {
                    (kept if u == absorbed else u, kept if v == absorbed else v)
                    for (u, v) in edges
                }
                nodes.discard(absorbed)
        else:
            raise InvalidInputError(f"unknown edit kind {rec.kind!r}")
    return nodes, edges
