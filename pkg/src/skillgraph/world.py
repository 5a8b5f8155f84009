"""Deterministic 2D workspace with a point end-effector and a rule table.

Worlds are values: stepping returns a new world.  The rule table is the only
thing allowed to change flags, attachment, or object poses.  A held object's
recorded pose is frozen at its grasp location and materializes at the
end-effector when released; demonstrations therefore stay anchored to the
pre-motion pose of whatever they are expressed relative to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .demos import Pose2, WorldState, world_state_from_poses, wrap_angle
from .errors import InvalidInputError

GRASP_RADIUS = 0.1
GRIP_THRESHOLD = 0.5
SUBSTEP = 0.05


@dataclass(frozen=True)
class World:
    objects: dict  # id -> Pose2 (recorded poses)
    ee: Pose2
    gripper: float
    attachment: str | None = None
    grab_offset: Pose2 | None = None  # held object's pose in the ee frame
    flags: dict = field(default_factory=dict)

    def object_pose(self, obj: str) -> Pose2:
        if obj not in self.objects:
            raise InvalidInputError(f"unknown object {obj!r}")
        return self.objects[obj]

    def features(self, layout) -> WorldState:
        return world_state_from_poses(self.ee, self.gripper, self.objects, layout)

    def to_dict(self) -> dict:
        return {
            "objects": {
                k: [p.x, p.y, p.theta] for k, p in sorted(self.objects.items())
            },
            "ee": [self.ee.x, self.ee.y, self.ee.theta],
            "gripper": self.gripper,
            "attachment": self.attachment,
            "grab_offset": None
            if self.grab_offset is None
            else [self.grab_offset.x, self.grab_offset.y, self.grab_offset.theta],
            "flags": dict(sorted(self.flags.items())),
        }

    @staticmethod
    def from_dict(d: dict) -> "World":
        grab = d.get("grab_offset")
        return World(
            objects={k: Pose2(*v) for k, v in d["objects"].items()},
            ee=Pose2(*d["ee"]),
            gripper=float(d["gripper"]),
            attachment=d.get("attachment"),
            grab_offset=None if grab is None else Pose2(*grab),
            flags=dict(d.get("flags", {})),
        )


@dataclass(frozen=True)
class DerivedFlag:
    """Flag maintained as a proximity predicate between two objects."""

    flag: str
    obj_a: str
    obj_b: str
    radius: float

    def to_dict(self):
        return {
            "flag": self.flag, "obj_a": self.obj_a, "obj_b": self.obj_b, "radius": self.radius
        }


@dataclass(frozen=True)
class EventRule:
    """Edge-triggered scripted event.

    Fires when its full condition turns true, having been false at the
    previous substep.  Conditions combine a region around an anchor object
    (inside or outside), the attachment, gripper bounds, a tilt threshold on
    the end-effector heading, and flag preconditions.  Effects set flags and
    may teleport an object's recorded pose.
    """

    name: str
    anchor: str
    radius: float
    outside: bool = False
    attached: str | None = None  # None: no requirement; "": must be empty-handed
    gripper_max: float | None = None
    gripper_min: float | None = None
    tilt_above: float | None = None
    when: dict = field(default_factory=dict)
    effects: dict = field(default_factory=dict)
    move_to: dict = field(default_factory=dict)  # object id -> [x, y, theta]

    def condition(self, world: World) -> bool:
        anchor = world.objects[self.anchor]
        dist = math.hypot(world.ee.x - anchor.x, world.ee.y - anchor.y)
        if self.outside:
            if dist <= self.radius:
                return False
        elif dist > self.radius:
            return False
        if self.attached is not None:
            if self.attached == "" and world.attachment is not None:
                return False
            if self.attached != "" and world.attachment != self.attached:
                return False
        if self.gripper_max is not None and world.gripper > self.gripper_max:
            return False
        if self.gripper_min is not None and world.gripper < self.gripper_min:
            return False
        if self.tilt_above is not None and abs(world.ee.theta) < self.tilt_above:
            return False
        for flag, value in self.when.items():
            if bool(world.flags.get(flag, False)) != value:
                return False
        return True

    def apply(self, world: World) -> World:
        flags = dict(world.flags)
        flags.update(self.effects)
        objects = dict(world.objects)
        for obj, pose in self.move_to.items():
            objects[obj] = Pose2(*pose)
        return replace(world, flags=flags, objects=objects)

    def to_dict(self):
        return {
            "name": self.name,
            "anchor": self.anchor,
            "radius": self.radius,
            "outside": self.outside,
            "attached": self.attached,
            "gripper_max": self.gripper_max,
            "gripper_min": self.gripper_min,
            "tilt_above": self.tilt_above,
            "when": dict(self.when),
            "effects": dict(self.effects),
            "move_to": {k: list(v) for k, v in self.move_to.items()},
        }


@dataclass(frozen=True)
class RuleTable:
    graspable: tuple = ()
    handles: dict = field(default_factory=dict)  # object id -> (hx, hy) local offset
    derived: tuple = ()
    events: tuple = ()
    grasp_radius: float = GRASP_RADIUS

    def to_dict(self):
        return {
            "graspable": list(self.graspable),
            "handles": {k: list(v) for k, v in self.handles.items()},
            "derived": [d.to_dict() for d in self.derived],
            "events": [e.to_dict() for e in self.events],
            "grasp_radius": self.grasp_radius,
        }

    @staticmethod
    def from_dict(d: dict) -> "RuleTable":
        return RuleTable(
            graspable=tuple(d.get("graspable", ())),
            handles={k: tuple(v) for k, v in d.get("handles", {}).items()},
            derived=tuple(DerivedFlag(**x) for x in d.get("derived", ())),
            events=tuple(EventRule(**x) for x in d.get("events", ())),
            grasp_radius=d.get("grasp_radius", GRASP_RADIUS),
        )


def handle_pose(world: World, rules: RuleTable, obj: str) -> Pose2:
    base = world.objects[obj]
    hx, hy = rules.handles.get(obj, (0.0, 0.0))
    return Pose2(hx, hy, 0.0).transform_from_frame(base)


def _refresh_derived(world: World, rules: RuleTable) -> World:
    if not rules.derived:
        return world
    flags = dict(world.flags)
    for rule in rules.derived:
        a = world.objects[rule.obj_a]
        b = world.objects[rule.obj_b]
        flags[rule.flag] = math.hypot(a.x - b.x, a.y - b.y) <= rule.radius
    return replace(world, flags=flags)


def _process_gripper_crossing(world: World, prev_gripper: float, rules: RuleTable) -> World:
    crossed_up = prev_gripper < GRIP_THRESHOLD <= world.gripper
    crossed_down = world.gripper < GRIP_THRESHOLD <= prev_gripper
    if crossed_up and world.attachment is None:
        candidates = []
        for obj in rules.graspable:
            h = handle_pose(world, rules, obj)
            d = math.hypot(world.ee.x - h.x, world.ee.y - h.y)
            if d <= rules.grasp_radius:
                candidates.append((d, obj))
        if candidates:
            _, obj = min(candidates)
            offset = world.objects[obj].transform_to_frame(world.ee)
            return replace(world, attachment=obj, grab_offset=offset)
    if crossed_down and world.attachment is not None:
        landed = world.grab_offset.transform_from_frame(world.ee)
        objects = dict(world.objects)
        objects[world.attachment] = landed
        return replace(world, objects=objects, attachment=None, grab_offset=None)
    return world


def apply_rules(world: World, prev_gripper: float, prev_conditions: dict, rules: RuleTable):
    """One rule-table pass: grasp/release, derived flags, then edge events."""
    world = _process_gripper_crossing(world, prev_gripper, rules)
    world = _refresh_derived(world, rules)
    conditions = {}
    for rule in rules.events:
        now = rule.condition(world)
        if now and not prev_conditions.get(rule.name, False):
            world = rule.apply(world)
        conditions[rule.name] = now
    return world, conditions


def step_to(
    world: World,
    target_pose: Pose2,
    gripper_target: float,
    rules: RuleTable,
    substep: float = SUBSTEP,
) -> World:
    """Move the end-effector straight to the target, applying rules along the way.

    Position, heading (shortest arc) and gripper all interpolate linearly;
    rules are evaluated every ``substep`` of the largest of the three spans.
    """
    if substep <= 0:
        raise InvalidInputError("substep must be positive")
    start = world.ee
    g0 = world.gripper
    darc = wrap_angle(target_pose.theta - start.theta)
    span = max(
        math.hypot(target_pose.x - start.x, target_pose.y - start.y),
        abs(darc),
        abs(gripper_target - g0),
    )
    n = max(1, math.ceil(span / substep - 1e-12))
    conditions = {rule.name: rule.condition(world) for rule in rules.events}
    current = world
    for i in range(1, n + 1):
        t = i / n
        prev_gripper = current.gripper
        pose = Pose2(
            start.x + t * (target_pose.x - start.x),
            start.y + t * (target_pose.y - start.y),
            wrap_angle(start.theta + t * darc),
        )
        current = replace(current, ee=pose, gripper=g0 + t * (gripper_target - g0))
        current, conditions = apply_rules(current, prev_gripper, conditions, rules)
    return current
