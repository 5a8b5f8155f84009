"""Scripted scenario library and synthetic teaching for the 2D workspace.

Two shipped scenarios (pour, scoop) each carry a base task demo, a side-chore
demo, and three modification variants, one per edit kind:

* node_addition: a lid appears on the vessel; a removal skill must be taught.
* edge_addition: a known cleaning skill is needed first, in a new position.
* node_modification: the target vessel and its blemish shift a little, so the
  cleaning skill needs a within-cluster tweak from a new start state.

Demo scripts are noiseless keyframe templates; teaching noise perturbs
positions (sigma) and headings (sigma/2).  Everything is deterministic under
seeds.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .demos import Demonstration, Keyframe, Pose2
from .errors import InvalidInputError, ModelFileError
from .task_model import ExecutionTrace, TaskModel
from .updates import UpdateConfig, incorporate_demo
from .world import DerivedFlag, EventRule, RuleTable, World, step_to

SCENARIO_SCHEMA_VERSION = 1
DEFAULT_SIGMA = 0.02


@dataclass(frozen=True)
class GoalSpec:
    flags_true: tuple = ()
    flags_false: tuple = ()
    parked: tuple = ()  # (object, target object, radius)

    def satisfied(self, world: World) -> bool:
        for flag in self.flags_true:
            if not world.flags.get(flag, False):
                return False
        for flag in self.flags_false:
            if world.flags.get(flag, False):
                return False
        for obj, target, radius in self.parked:
            a, b = world.objects[obj], world.objects[target]
            if math.hypot(a.x - b.x, a.y - b.y) > radius:
                return False
        return True

    def to_dict(self):
        return {
            "flags_true": list(self.flags_true),
            "flags_false": list(self.flags_false),
            "parked": [list(p) for p in self.parked],
        }

    @staticmethod
    def from_dict(d):
        return GoalSpec(
            flags_true=tuple(d["flags_true"]),
            flags_false=tuple(d["flags_false"]),
            parked=tuple((p[0], p[1], p[2]) for p in d["parked"]),
        )


@dataclass(frozen=True)
class Variant:
    name: str
    goal: GoalSpec
    object_overrides: dict = field(default_factory=dict)  # id -> (x, y, theta)
    flag_overrides: dict = field(default_factory=dict)
    demo: tuple = ()  # ((ref, ((x, y, theta, gripper), ...)), ...)
    corrective: tuple = ()
    intended_edit: str | None = None

    def to_dict(self):
        return {
            "name": self.name,
            "goal": self.goal.to_dict(),
            "object_overrides": {k: list(v) for k, v in self.object_overrides.items()},
            "flag_overrides": dict(self.flag_overrides),
            "demo": [[ref, [list(k) for k in kfs]] for ref, kfs in self.demo],
            "corrective": [[ref, [list(k) for k in kfs]] for ref, kfs in self.corrective],
            "intended_edit": self.intended_edit,
        }

    @staticmethod
    def from_dict(d):
        return Variant(
            name=d["name"],
            goal=GoalSpec.from_dict(d["goal"]),
            object_overrides={k: tuple(v) for k, v in d["object_overrides"].items()},
            flag_overrides=dict(d["flag_overrides"]),
            demo=tuple((ref, tuple(tuple(k) for k in kfs)) for ref, kfs in d["demo"]),
            corrective=tuple(
                (ref, tuple(tuple(k) for k in kfs)) for ref, kfs in d["corrective"]
            ),
            intended_edit=d["intended_edit"],
        )


@dataclass(frozen=True)
class Scenario:
    name: str
    layout: tuple
    objects: dict  # id -> Pose2, base placement
    ee_start: Pose2
    initial_flags: dict
    rules: RuleTable
    variants: dict
    teach_variants: tuple
    tau: float
    sigma: float = DEFAULT_SIGMA

    def variant(self, name: str) -> Variant:
        if name not in self.variants:
            raise InvalidInputError(f"scenario {self.name!r} has no variant {name!r}")
        return self.variants[name]

    def initial_world(self, variant_name: str) -> World:
        v = self.variant(variant_name)
        objects = dict(self.objects)
        for obj, pose in v.object_overrides.items():
            objects[obj] = Pose2(*pose)
        flags = dict(self.initial_flags)
        flags.update(v.flag_overrides)
        world = World(objects=objects, ee=self.ee_start, gripper=0.0, flags=flags)
        # settle derived flags before anything moves
        return step_to(world, self.ee_start, 0.0, self.rules)

    def update_config(self, theta: float = 0.5) -> UpdateConfig:
        return UpdateConfig(theta=theta, tau=self.tau)

    def to_dict(self):
        return {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "name": self.name,
            "layout": list(self.layout),
            "objects": {k: [p.x, p.y, p.theta] for k, p in sorted(self.objects.items())},
            "ee_start": [self.ee_start.x, self.ee_start.y, self.ee_start.theta],
            "initial_flags": dict(sorted(self.initial_flags.items())),
            "rules": self.rules.to_dict(),
            "variants": {k: v.to_dict() for k, v in sorted(self.variants.items())},
            "teach_variants": list(self.teach_variants),
            "tau": self.tau,
            "sigma": self.sigma,
        }

    @staticmethod
    def from_dict(d, *, path=None):
        version = d.get("schema_version")
        if version != SCENARIO_SCHEMA_VERSION:
            raise ModelFileError(f"unsupported scenario schema version {version!r}", path=path)
        return Scenario(
            name=d["name"],
            layout=tuple(d["layout"]),
            objects={k: Pose2(*v) for k, v in d["objects"].items()},
            ee_start=Pose2(*d["ee_start"]),
            initial_flags=dict(d["initial_flags"]),
            rules=RuleTable.from_dict(d["rules"]),
            variants={k: Variant.from_dict(v) for k, v in d["variants"].items()},
            teach_variants=tuple(d["teach_variants"]),
            tau=d["tau"],
            sigma=d.get("sigma", DEFAULT_SIGMA),
        )


def save_scenario(scenario: Scenario, path: str) -> None:
    text = json.dumps(scenario.to_dict(), sort_keys=True, indent=2) + "\n"
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ModelFileError(
            "invalid scenario file", path=path, location=f"line {exc.lineno} col {exc.colno}"
        ) from exc
    return Scenario.from_dict(data, path=path)


# ---------------------------------------------------------------------------
# Demonstration synthesis


def _script_to_demo(
    scenario: Scenario,
    variant_name: str,
    script,
    noise_sigma: float,
    rng_seed,
    demo_id: str,
    kind: str,
) -> Demonstration:
    rng = np.random.default_rng(rng_seed)
    world = scenario.initial_world(variant_name)
    keyframes = []
    stamp = 0
    for ref, frames in script:
        for x, y, theta, grip in frames:
            px = x + rng.normal(0.0, noise_sigma) if noise_sigma > 0 else x
            py = y + rng.normal(0.0, noise_sigma) if noise_sigma > 0 else y
            pt = theta + rng.normal(0.0, noise_sigma / 2) if noise_sigma > 0 else theta
            pose = Pose2(px, py, pt)
            world = step_to(world, pose, grip, scenario.rules)
            keyframes.append(
                Keyframe(
                    ee_pose=world.ee,
                    gripper=world.gripper,
                    reference_object=ref,
                    world=world.features(scenario.layout),
                    timestamp=stamp,
                )
            )
            stamp += 1
    return Demonstration(keyframes=keyframes, demo_id=demo_id, kind=kind)


def generate_demo(
    scenario: Scenario,
    variant_name: str,
    noise_sigma: float | None = None,
    rng_seed=0,
    demo_id: str | None = None,
) -> Demonstration:
    """Perturbed instance of a variant's teaching script."""
    v = scenario.variant(variant_name)
    if not v.demo:
        raise InvalidInputError(f"variant {variant_name!r} has no demo script")
    sigma = scenario.sigma if noise_sigma is None else noise_sigma
    return _script_to_demo(
        scenario, variant_name, v.demo, sigma, rng_seed,
        demo_id or f"{scenario.name}-{variant_name}-{rng_seed}", "full",
    )


def scripted_correction(
    scenario: Scenario,
    variant_name: str,
    noise_sigma: float | None = None,
    rng_seed=0,
    demo_id: str | None = None,
) -> Demonstration:
    """The variant's scripted corrective demonstration."""
    v = scenario.variant(variant_name)
    if not v.corrective:
        raise InvalidInputError(f"variant {variant_name!r} has no corrective script")
    sigma = scenario.sigma if noise_sigma is None else noise_sigma
    return _script_to_demo(
        scenario, variant_name, v.corrective, sigma, rng_seed,
        demo_id or f"{scenario.name}-{variant_name}-fix-{rng_seed}", "corrective",
    )


def run_with_model(
    model: TaskModel,
    scenario: Scenario,
    variant_name: str,
    theta: float = 0.5,
    rng_seed=0,
    on_event=None,
):
    """Execute the model in the variant's initial world; returns (trace, goal met)."""
    v = scenario.variant(variant_name)
    world = scenario.initial_world(variant_name)
    trace = model.execute(
        world, scenario.rules, theta=theta, rng_seed=rng_seed, on_event=on_event
    )
    goal_ok = trace.outcome == "success" and v.goal.satisfied(trace.final_world)
    return trace, goal_ok


def modification(scenario: Scenario, edit_kind: str) -> str:
    """Variant whose correction requires exactly the named edit kind."""
    for name, v in sorted(scenario.variants.items()):
        if v.intended_edit == edit_kind:
            return name
    raise InvalidInputError(f"scenario {scenario.name!r} has no {edit_kind!r} variant")


def teach(
    scenario: Scenario,
    cfg: UpdateConfig | None = None,
    noise_sigma: float | None = None,
    rng_seed=0,
) -> TaskModel:
    """Fresh model built from the scenario's teaching scripts."""
    cfg = cfg or scenario.update_config()
    model = TaskModel(scenario.layout, scenario.name)
    for i, variant_name in enumerate(scenario.teach_variants):
        demo = generate_demo(
            scenario, variant_name, noise_sigma, rng_seed=rng_seed + i,
            demo_id=f"{scenario.name}-teach-{i}",
        )
        incorporate_demo(model, demo, cfg=cfg)
    return model


# ---------------------------------------------------------------------------
# Shipped scenarios


def _pour_scenario() -> Scenario:
    # stations are kept >= 0.5 apart so no motion clips a foreign trigger
    home = (3.0, 2.8, 0.0, 0.0)
    objects = {
        "pitcher": Pose2(2.0, 1.0, 0.0),
        "bowl": Pose2(0.0, 1.0, 0.0),
        "coaster": Pose2(4.0, 1.0, 0.0),
        "lid": Pose2(0.0, 4.4, 0.0),
        "dirt": Pose2(5.2, 3.2, 0.0),
        "shelf": Pose2(0.7, 2.9, 0.0),
    }
    rules = RuleTable(
        graspable=("lid", "pitcher"),
        handles={"pitcher": (0.15, 0.0), "lid": (0.0, 0.0)},
        derived=(
            DerivedFlag(flag="lid_on", obj_a="lid", obj_b="pitcher", radius=0.45),
            DerivedFlag(flag="dirt_on", obj_a="dirt", obj_b="bowl", radius=0.5),
        ),
        events=(
            EventRule(
                name="pour_ok", anchor="bowl", radius=0.45, attached="pitcher",
                tilt_above=1.2, when={"loaded": True, "lid_on": False, "dirt_on": False},
                effects={"contents": True, "loaded": False},
            ),
            EventRule(
                name="pour_dirty", anchor="bowl", radius=0.45, attached="pitcher",
                tilt_above=1.2, when={"loaded": True, "lid_on": False, "dirt_on": True},
                effects={"contents": True, "contaminated": True, "loaded": False},
            ),
            EventRule(
                name="spill_outside", anchor="bowl", radius=0.45, outside=True,
                attached="pitcher", tilt_above=1.2,
                when={"loaded": True, "lid_on": False},
                effects={"spilled": True, "loaded": False},
            ),
            EventRule(
                name="wipe", anchor="dirt", radius=0.22, attached="", gripper_max=0.4,
                move_to={"dirt": [5.2, 3.2, 0.0]},
            ),
        ),
    )
    grasp = ("pitcher", (
        home,
        (2.15, 1.55, 0.0, 0.0),
        (2.15, 1.0, 0.0, 0.0),
        (2.15, 1.0, 0.0, 1.0),
    ))
    pour = ("bowl", (
        (2.0, 2.2, 0.0, 1.0),
        (0.0, 1.35, 0.0, 1.0),
        (0.0, 1.35, 2.0, 1.0),
    ))
    pour_moved = ("bowl", (
        (2.45, 2.2, 0.0, 1.0),
        (0.45, 1.35, 0.0, 1.0),
        (0.45, 1.35, 2.0, 1.0),
    ))
    park = ("coaster", (
        (4.15, 1.7, 0.0, 1.0),
        (4.15, 1.1, 0.0, 1.0),
        (4.15, 1.1, 0.0, 0.0),
    ))
    wipe_chore = ("bowl", (
        home,
        (0.0, 1.8, 0.0, 0.0),
        (0.0, 1.44, 0.0, 0.0),
        home,
    ))
    wipe_moved = ("bowl", (
        home,
        (0.37, 1.78, 0.0, 0.0),
        (0.37, 1.44, 0.0, 0.0),
        (3.45, 2.8, 0.0, 0.0),  # retreat stays bowl-relative
    ))
    remove_lid = ("shelf", (
        home,
        (2.0, 1.78, 0.0, 0.0),
        (2.0, 1.28, 0.0, 0.0),
        (2.0, 1.28, 0.0, 1.0),
        (0.7, 3.2, 0.0, 1.0),
        (0.7, 2.92, 0.0, 1.0),
        (0.7, 2.92, 0.0, 0.0),
        home,
    ))
    main_goal = GoalSpec(
        flags_true=("contents",),
        flags_false=("contaminated", "spilled"),
        parked=(("pitcher", "coaster", 0.3),),
    )
    variants = {
        "base": Variant(name="base", goal=main_goal, demo=(grasp, pour, park)),
        "chore": Variant(
            name="chore",
            goal=GoalSpec(flags_false=("dirt_on",)),
            object_overrides={"dirt": (0.0, 1.4, 0.0)},
            demo=(wipe_chore,),
        ),
        "lidded": Variant(
            name="lidded",
            goal=main_goal,
            object_overrides={"lid": (2.0, 1.28, 0.0)},
            corrective=(remove_lid, grasp, pour, park),
            intended_edit="node_addition",
        ),
        "dirty": Variant(
            name="dirty",
            goal=main_goal,
            object_overrides={"dirt": (0.0, 1.4, 0.0)},
            corrective=(wipe_chore, grasp, pour, park),
            intended_edit="edge_addition",
        ),
        "moved": Variant(
            name="moved",
            goal=main_goal,
            object_overrides={"bowl": (0.45, 1.0, 0.0), "dirt": (0.37, 1.42, 0.0)},
            corrective=(wipe_moved, grasp, pour_moved, park),
            intended_edit="node_modification",
        ),
    }
    return Scenario(
        name="pour",
        layout=("bowl", "coaster", "dirt", "lid", "pitcher", "shelf"),
        objects=objects,
        ee_start=Pose2(3.0, 2.8, 0.0),
        initial_flags={"loaded": True, "contents": False, "contaminated": False, "spilled": False},
        rules=rules,
        variants=variants,
        teach_variants=("base", "chore"),
        tau=400.0,
    )


def _scoop_scenario() -> Scenario:
    home = (3.2, 3.2, 0.0, 0.0)
    objects = {
        "spoon": Pose2(4.2, 2.6, 0.0),
        "pot": Pose2(1.0, 1.0, 0.0),
        "bowl2": Pose2(2.6, 1.0, 0.0),
        "rest": Pose2(4.2, 1.2, 0.0),
        "potlid": Pose2(0.0, 4.2, 0.0),
        "crumbs": Pose2(5.4, 3.4, 0.0),
        "tray": Pose2(0.2, 2.2, 0.0),
    }
    rules = RuleTable(
        graspable=("potlid", "spoon"),
        handles={"spoon": (0.0, 0.0), "potlid": (0.0, 0.0)},
        derived=(
            DerivedFlag(flag="potlid_on", obj_a="potlid", obj_b="pot", radius=0.45),
            DerivedFlag(flag="crumbs_on", obj_a="crumbs", obj_b="bowl2", radius=0.5),
        ),
        events=(
            EventRule(
                name="scoop", anchor="pot", radius=0.3, attached="spoon",
                when={"potlid_on": False, "has_scoop": False},
                effects={"has_scoop": True},
            ),
            EventRule(
                name="deliver_ok", anchor="bowl2", radius=0.3, attached="spoon",
                when={"has_scoop": True, "crumbs_on": False},
                effects={"delivered": True, "has_scoop": False},
            ),
            EventRule(
                name="deliver_dirty", anchor="bowl2", radius=0.3, attached="spoon",
                when={"has_scoop": True, "crumbs_on": True},
                effects={"delivered": True, "contaminated": True, "has_scoop": False},
            ),
            EventRule(
                name="sweep", anchor="crumbs", radius=0.22, attached="", gripper_max=0.4,
                move_to={"crumbs": [5.4, 3.4, 0.0]},
            ),
        ),
    )
    grasp = ("spoon", (
        home,
        (4.2, 3.0, 0.0, 0.0),
        (4.2, 2.6, 0.0, 0.0),
        (4.2, 2.6, 0.0, 1.0),
    ))
    scoop = ("pot", (
        (1.0, 1.7, 0.0, 1.0),
        (1.0, 1.18, 0.0, 1.0),
    ))
    deliver = ("bowl2", (
        (2.6, 1.75, 0.0, 1.0),
        (2.6, 1.25, 1.4, 1.0),
    ))
    deliver_moved = ("bowl2", (
        (2.9, 1.75, 0.0, 1.0),
        (2.9, 1.25, 1.4, 1.0),
    ))
    park = ("rest", (
        (4.2, 1.7, 0.0, 1.0),
        (4.2, 1.28, 0.0, 1.0),
        (4.2, 1.28, 0.0, 0.0),
    ))
    sweep_chore = ("bowl2", (
        home,
        (2.6, 1.85, 0.0, 0.0),
        (2.6, 1.46, 0.0, 0.0),
        home,
    ))
    sweep_moved = ("bowl2", (
        home,
        (2.82, 1.85, 0.0, 0.0),
        (2.82, 1.46, 0.0, 0.0),
        (3.5, 3.2, 0.0, 0.0),  # retreat stays bowl-relative
    ))
    remove_potlid = ("tray", (
        home,
        (1.0, 1.8, 0.0, 0.0),
        (1.0, 1.3, 0.0, 0.0),
        (1.0, 1.3, 0.0, 1.0),
        (0.2, 2.5, 0.0, 1.0),
        (0.2, 2.24, 0.0, 1.0),
        (0.2, 2.24, 0.0, 0.0),
        home,
    ))
    main_goal = GoalSpec(
        flags_true=("delivered",),
        flags_false=("contaminated",),
        parked=(("spoon", "rest", 0.3),),
    )
    variants = {
        "base": Variant(name="base", goal=main_goal, demo=(grasp, scoop, deliver, park)),
        "chore": Variant(
            name="chore",
            goal=GoalSpec(flags_false=("crumbs_on",)),
            object_overrides={"crumbs": (2.6, 1.42, 0.0)},
            demo=(sweep_chore,),
        ),
        "lidded": Variant(
            name="lidded",
            goal=main_goal,
            object_overrides={"potlid": (1.0, 1.3, 0.0)},
            corrective=(remove_potlid, grasp, scoop, deliver, park),
            intended_edit="node_addition",
        ),
        "dirty": Variant(
            name="dirty",
            goal=main_goal,
            object_overrides={"crumbs": (2.6, 1.42, 0.0)},
            corrective=(sweep_chore, grasp, scoop, deliver, park),
            intended_edit="edge_addition",
        ),
        "moved": Variant(
            name="moved",
            goal=main_goal,
            object_overrides={"bowl2": (2.9, 1.0, 0.0), "crumbs": (2.82, 1.44, 0.0)},
            corrective=(sweep_moved, grasp, scoop, deliver_moved, park),
            intended_edit="node_modification",
        ),
    }
    return Scenario(
        name="scoop",
        layout=("bowl2", "crumbs", "pot", "potlid", "rest", "spoon", "tray"),
        objects=objects,
        ee_start=Pose2(3.2, 3.2, 0.0),
        initial_flags={"has_scoop": False, "delivered": False, "contaminated": False},
        rules=rules,
        variants=variants,
        teach_variants=("base", "chore"),
        tau=400.0,
    )


_SCENARIOS = {"pour": _pour_scenario, "scoop": _scoop_scenario}


def scenario_names():
    return sorted(_SCENARIOS)


def get_scenario(name: str) -> Scenario:
    if name in _SCENARIOS:
        return _SCENARIOS[name]()
    if os.path.exists(name):
        return load_scenario(name)
    raise InvalidInputError(f"unknown scenario {name!r}")
