"""Shared builders for synthetic worlds, segments, and models."""

import numpy as np

from skillgraph.demos import DemoSegment, Keyframe, Pose2, WorldState, world_state_from_poses
from skillgraph.task_model import TaskModel
from skillgraph.updates import UpdateConfig, incorporate_segments
from skillgraph.world import RuleTable, World

LAYOUT = ("obj",)
ORIGIN = Pose2(0.0, 0.0, 0.0)


def state(x, y=0.0, t=0.0, g=0.0, layout=LAYOUT):
    feats = []
    per_obj = [x, y, t]
    for i in range(len(layout)):
        feats.extend(per_obj if i == 0 else [0.0, 0.0, 0.0])
    feats.append(g)
    return WorldState.from_array(feats, layout)


def segment_from_rel(points, demo_id="d", position=0, ref="obj", t0=0, obj_pose=ORIGIN):
    """Segment whose relative keyframes equal the given (dx, dy, dt, g) rows."""
    kfs = []
    for i, p in enumerate(points):
        ee = Pose2(p[0], p[1], p[2]).transform_from_frame(obj_pose)
        world = world_state_from_poses(ee, p[3], {ref: obj_pose}, [ref])
        kfs.append(
            Keyframe(ee_pose=ee, gripper=p[3], reference_object=ref, world=world, timestamp=t0 + i)
        )
    return DemoSegment(
        keyframes=kfs,
        reference_object=ref,
        start_state=kfs[0].world,
        demo_id=demo_id,
        position=position,
    )


def noisy_segments(template, n, sigma, seed, demo_prefix="d"):
    """Independent noisy copies of a keyframe template (position noise sigma,
    angle noise sigma/2, gripper unchanged)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        pts = []
        for p in template:
            pts.append(
                [
                    p[0] + rng.normal(0, sigma),
                    p[1] + rng.normal(0, sigma),
                    p[2] + rng.normal(0, sigma / 2),
                    p[3],
                ]
            )
        out.append(segment_from_rel(pts, demo_id=f"{demo_prefix}{i}"))
    return out


def bootstrap_model(segment_groups, states=None, cfg=None, layout=LAYOUT):
    """Build a model by feeding one list of segments per demonstration."""
    model = TaskModel(layout)
    cfg = cfg or UpdateConfig()
    for segs in segment_groups:
        seg_states = [s.start_state for s in segs] if states is None else states
        incorporate_segments(model, model.start_id, seg_states, segs, cfg)
    return model


def single_object_world(obj_pose=ORIGIN, ee=Pose2(0.0, 1.0, 0.0), gripper=0.0):
    return World(objects={"obj": obj_pose}, ee=ee, gripper=gripper)


EMPTY_RULES = RuleTable()


def brute_force_match(segment, policies, cfg):
    """Independent oracle for policy membership.

    Scores the segment's trajectory by per-point log-likelihood under every
    candidate, picks the argmax, and rejects when the winner trails a
    self-fitted model by more than the clustering threshold (the matched
    rejection rule).  No clustering, no Monte-Carlo distances.
    """
    from skillgraph.demos import interpolate_segment
    from skillgraph.hmm import fit_policy, log_likelihood

    if not policies:
        return None
    traj = interpolate_segment(segment, cfg.interp_step)
    self_model = fit_policy([traj], keyframe_counts=[len(segment.keyframes)])
    self_rate = log_likelihood(self_model, traj) / len(traj)
    rates = [log_likelihood(p, traj) / len(traj) for p in policies]
    best = int(np.argmax(rates))
    if self_rate - rates[best] > cfg.tau:
        return None
    return best


def segment_from_samples(points, demo_id="q", position=0):
    """Synthetic segment from sampled feature rows; gripper clipped to [0, 1]."""
    pts = [[p[0], p[1], p[2], float(min(1.0, max(0.0, p[3])))] for p in points]
    return segment_from_rel(pts, demo_id=demo_id, position=position)
