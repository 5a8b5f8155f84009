"""Keyframe demonstrations: types, reference-frame features, segmentation.

A demonstration is an ordered list of keyframes; each keyframe carries the
absolute end-effector pose, a gripper value, the object the motion is
expressed relative to, and a snapshot of the world feature vector.  Segments
are maximal runs of keyframes sharing one reference object.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, MissingObjectError, ModelFileError

DEMO_SCHEMA_VERSION = 1

TAU = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]; exactly pi stays positive."""
    w = (a + math.pi) % TAU - math.pi
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class Pose2:
    """Planar pose: position plus heading, heading wrapped to (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise InvalidInputError("pose components must be finite")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def transform_to_frame(self, frame: "Pose2") -> "Pose2":
        """Express this pose in the coordinate frame of ``frame``."""
        c, s = math.cos(-frame.theta), math.sin(-frame.theta)
        dx = self.x - frame.x
        dy = self.y - frame.y
        return Pose2(c * dx - s * dy, s * dx + c * dy, wrap_angle(self.theta - frame.theta))

    def transform_from_frame(self, frame: "Pose2") -> "Pose2":
        """Map a pose expressed in ``frame`` coordinates back to the world."""
        c, s = math.cos(frame.theta), math.sin(frame.theta)
        return Pose2(
            frame.x + c * self.x - s * self.y,
            frame.y + s * self.x + c * self.y,
            wrap_angle(frame.theta + self.theta),
        )


@dataclass(frozen=True)
class WorldState:
    """Fixed-length scene feature vector plus the object layout defining it.

    The layout lists object ids in slot order; each object contributes its
    end-effector-relative position (2 entries) and heading difference (1),
    and the final entry is the gripper value.
    """

    features: tuple
    layout: tuple

    @staticmethod
    def from_array(features, layout) -> "WorldState":
        arr = np.asarray(features, dtype=float)
        if arr.ndim != 1:
            raise InvalidInputError("world features must be a flat vector")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("world features must be finite")
        expected = 3 * len(layout) + 1
        if arr.shape[0] != expected:
            raise InvalidInputError(
                f"feature vector has length {arr.shape[0]}, layout implies {expected}"
            )
        return WorldState(tuple(float(v) for v in arr), tuple(layout))

    @property
    def dim(self) -> int:
        return len(self.features)

    def vector(self) -> np.ndarray:
        return np.array(self.features, dtype=float)


@dataclass(frozen=True)
class Keyframe:
    ee_pose: Pose2
    gripper: float
    reference_object: str
    world: WorldState
    timestamp: int

    def __post_init__(self):
        if not 0.0 <= self.gripper <= 1.0:
            raise InvalidInputError("gripper must be in [0, 1]")
        if self.reference_object not in self.world.layout:
            raise MissingObjectError(
                f"reference object {self.reference_object!r} not in world layout"
            )


@dataclass
class Demonstration:
    keyframes: list
    demo_id: str
    kind: str = "full"  # full | corrective

    def __post_init__(self):
        if not self.keyframes:
            raise InvalidInputError("demonstration must contain at least one keyframe")
        if self.kind not in ("full", "corrective"):
            raise InvalidInputError(f"unknown demonstration kind {self.kind!r}")
        stamps = [kf.timestamp for kf in self.keyframes]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise InvalidInputError("keyframe timestamps must be strictly increasing")
        layouts = {kf.world.layout for kf in self.keyframes}
        if len(layouts) != 1:
            raise InvalidInputError("all keyframes must share one feature layout")


@dataclass
class DemoSegment:
    """Maximal keyframe run with a single reference object."""

    keyframes: list
    reference_object: str
    start_state: WorldState
    demo_id: str
    position: int

    def __post_init__(self):
        if not self.keyframes:
            raise InvalidInputError("segment must contain at least one keyframe")
        for kf in self.keyframes:
            if kf.reference_object != self.reference_object:
                raise InvalidInputError("segment keyframes must share the reference object")
        if self.start_state != self.keyframes[0].world:
            raise InvalidInputError("segment start state must be its first keyframe's world")


def segment_by_reference(demo: Demonstration) -> list:
    """Split a demonstration at every change of reference object."""
    if not demo.keyframes:
        raise InvalidInputError("cannot segment an empty demonstration")
    segments = []
    run = [demo.keyframes[0]]
    for kf in demo.keyframes[1:]:
        if kf.reference_object != run[-1].reference_object:
            segments.append(run)
            run = [kf]
        else:
            run.append(kf)
    segments.append(run)
    return [
        DemoSegment(
            keyframes=kfs,
            reference_object=kfs[0].reference_object,
            start_state=kfs[0].world,
            demo_id=demo.demo_id,
            position=i,
        )
        for i, kfs in enumerate(segments)
    ]


def world_state_from_poses(
    ee_pose: Pose2, gripper: float, object_poses: dict, layout
) -> WorldState:
    """Build the scene feature vector from absolute poses.

    Each object contributes its position in the end-effector frame and its
    heading difference; the gripper value is the final entry.
    """
    feats = []
    for obj in layout:
        if obj not in object_poses:
            raise MissingObjectError(f"layout object {obj!r} has no pose")
        rel = object_poses[obj].transform_to_frame(ee_pose)
        feats.extend([rel.x, rel.y, rel.theta])
    feats.append(gripper)
    return WorldState.from_array(feats, layout)


def object_pose_from_state(world: WorldState, ee_pose: Pose2, obj: str) -> Pose2:
    """Recover an object's absolute pose from the stored relative features."""
    if obj not in world.layout:
        raise MissingObjectError(f"object {obj!r} not in world layout")
    i = world.layout.index(obj)
    rel = Pose2(world.features[3 * i], world.features[3 * i + 1], world.features[3 * i + 2])
    return rel.transform_from_frame(ee_pose)


def relative_keyframe(kf: Keyframe) -> np.ndarray:
    """End-effector pose in the reference object's frame, plus gripper.

    Returns (dx, dy, dtheta, gripper) with dtheta wrapped to (-pi, pi].
    """
    obj_pose = object_pose_from_state(kf.world, kf.ee_pose, kf.reference_object)
    rel = kf.ee_pose.transform_to_frame(obj_pose)
    return np.array([rel.x, rel.y, rel.theta, kf.gripper])


def _shortest_arc(a: float, b: float) -> float:
    """Signed angular step from a to b along the shortest arc, ties positive."""
    return wrap_angle(b - a)


def interpolate_segment(seg: DemoSegment, step: float = 0.25) -> np.ndarray:
    """Densify a segment into a relative-feature trajectory.

    Linear in position and gripper, shortest-arc in heading, with consecutive
    points at most ``step`` apart (position, heading and gripper deltas all
    respect the bound).  Every keyframe appears exactly once.
    """
    if step <= 0:
        raise InvalidInputError("interpolation step must be positive")
    points = [relative_keyframe(kf) for kf in seg.keyframes]
    if len(points) == 1:
        return np.array(points)
    out = [points[0]]
    for a, b in zip(points, points[1:]):
        darc = _shortest_arc(a[2], b[2])
        span = max(
            float(np.hypot(b[0] - a[0], b[1] - a[1])),
            abs(darc),
            abs(b[3] - a[3]),
        )
        n = max(1, math.ceil(span / step - 1e-12))
        for i in range(1, n + 1):
            t = i / n
            out.append(
                np.array(
                    [
                        a[0] + t * (b[0] - a[0]),
                        a[1] + t * (b[1] - a[1]),
                        wrap_angle(a[2] + t * darc),
                        a[3] + t * (b[3] - a[3]),
                    ]
                )
            )
    return np.array(out)


# ---------------------------------------------------------------------------
# Demonstration files


def _keyframe_to_dict(kf: Keyframe) -> dict:
    return {
        "pose": {"x": kf.ee_pose.x, "y": kf.ee_pose.y, "theta": kf.ee_pose.theta},
        "gripper": kf.gripper,
        "reference_object": kf.reference_object,
        "world": {"features": list(kf.world.features), "layout": list(kf.world.layout)},
        "timestamp": kf.timestamp,
    }


def _keyframe_from_dict(d: dict) -> Keyframe:
    return Keyframe(
        ee_pose=Pose2(d["pose"]["x"], d["pose"]["y"], d["pose"]["theta"]),
        gripper=d["gripper"],
        reference_object=d["reference_object"],
        world=WorldState.from_array(d["world"]["features"], d["world"]["layout"]),
        timestamp=d["timestamp"],
    )


def demo_to_dict(demo: Demonstration, scenario: str = "") -> dict:
    return {
        "schema_version": DEMO_SCHEMA_VERSION,
        "scenario": scenario,
        "demo_id": demo.demo_id,
        "kind": demo.kind,
        "keyframes": [_keyframe_to_dict(kf) for kf in demo.keyframes],
    }


def demo_from_dict(d: dict, *, path: str | None = None) -> Demonstration:
    version = d.get("schema_version")
    if version != DEMO_SCHEMA_VERSION:
        raise ModelFileError(
            f"unsupported demonstration schema version {version!r}", path=path
        )
    try:
        return Demonstration(
            keyframes=[_keyframe_from_dict(k) for k in d["keyframes"]],
            demo_id=d["demo_id"],
            kind=d.get("kind", "full"),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFileError(f"malformed demonstration file: {exc}", path=path) from exc


def save_demo(demo: Demonstration, path: str, scenario: str = "") -> None:
    text = json.dumps(demo_to_dict(demo, scenario), sort_keys=True, indent=2) + "\n"
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def load_demo(path: str) -> Demonstration:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ModelFileError(
            "invalid demonstration file", path=path, location=f"line {exc.lineno} col {exc.colno}"
        ) from exc
    return demo_from_dict(data, path=path)
