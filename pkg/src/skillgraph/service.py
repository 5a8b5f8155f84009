"""Interactive teaching service: WebSocket session protocol plus health REST.

One session owns one scenario world and one task model.  All state flows
through enveloped messages ({type, session, seq, data}); the server's sequence
numbers increase monotonically per session so clients can replay the stream.
Model mutations are serialized per session by the single connection.
"""

from __future__ import annotations

import hashlib
import os
import uuid

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field

from .config import RunConfig
from .demos import Demonstration, Keyframe, Pose2
from .errors import InvalidInputError, SkillGraphError
from .simulator import Scenario, get_scenario, scenario_names
from .task_model import TaskModel
from .updates import counters, incorporate_demo
from .world import World, step_to


class PoseModel(BaseModel):
    x: float
    y: float
    theta: float = 0.0


class SessionStartData(BaseModel):
    scenario: str
    variant: str = "base"
    theta: float = 0.5
    tau: float | None = None
    sigma: float | None = None


class KeyframeData(BaseModel):
    pose: PoseModel
    gripper: float = Field(ge=0.0, le=1.0)
    reference: str


class CommitData(BaseModel):
    kind: str = "full"  # full | corrective
    # Undo is client-local and emits no message; the commit says how many
    # leading keyframes survived.
    keep: int | None = None


class ExecStartData(BaseModel):
    seed: int = 0


class HealthResponse(BaseModel):
    status: str


class ScenarioListResponse(BaseModel):
    scenarios: list


def dot_hash(dot: str) -> str:
    return hashlib.sha256(dot.encode()).hexdigest()


def world_payload(world: World, layout) -> dict:
    return {
        "objects": {k: [p.x, p.y, p.theta] for k, p in sorted(world.objects.items())},
        "ee": [world.ee.x, world.ee.y, world.ee.theta],
        "gripper": world.gripper,
        "attachment": world.attachment,
        "flags": dict(sorted(world.flags.items())),
        "features": list(world.features(layout).features),
        "layout": list(layout),
    }


class Session:
    def __init__(self, data: SessionStartData):
        self.id = uuid.uuid4().hex[:12]
        self.scenario: Scenario = get_scenario(data.scenario)
        self.variant = data.variant
        self.scenario.variant(data.variant)
        self.config = RunConfig(
            scenario=data.scenario, theta=data.theta, tau=data.tau, sigma=data.sigma
        ).resolve(self.scenario)
        self.model = TaskModel(
            self.scenario.layout, self.scenario.name,
            meta={"config_hash": self.config.hash()},
        )
        self.world = self.scenario.initial_world(data.variant)
        self.pending: list = []
        self.demo_count = 0
        self.entry_node = self.model.start_id
        self.seq = 0

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def add_keyframe(self, data: KeyframeData) -> None:
        if data.reference not in self.scenario.layout:
            raise InvalidInputError(f"unknown reference object {data.reference!r}")
        pose = Pose2(data.pose.x, data.pose.y, data.pose.theta)
        self.world = step_to(self.world, pose, data.gripper, self.scenario.rules)
        self.pending.append(
            Keyframe(
                ee_pose=self.world.ee,
                gripper=self.world.gripper,
                reference_object=data.reference,
                world=self.world.features(self.scenario.layout),
                timestamp=len(self.pending),
            )
        )

    def commit(self, kind: str, keep: int | None = None):
        pending = self.pending if keep is None else self.pending[:keep]
        if keep is not None and not 0 < keep <= len(self.pending):
            raise InvalidInputError(f"keep={keep} outside the pending range")
        if not pending:
            raise InvalidInputError("no keyframes to commit")
        if kind not in ("full", "corrective"):
            raise InvalidInputError(f"unknown demonstration kind {kind!r}")
        demo = Demonstration(
            keyframes=list(pending),
            demo_id=f"ui-{self.id}-{self.demo_count}",
            kind=kind,
        )
        self.demo_count += 1
        entry = self.entry_node if kind == "corrective" else self.model.start_id
        counters.reset()
        records = incorporate_demo(
            self.model, demo, entry=entry, cfg=self.config.update_config()
        )
        self.pending = []
        self.entry_node = self.model.start_id
        self.world = self.scenario.initial_world(self.variant)
        return demo, records

    def execute(self, seed: int, emit) -> dict:
        world = self.scenario.initial_world(self.variant)
        trace = self.model.execute(
            world, self.scenario.rules, theta=self.config.theta,
            rng_seed=seed, on_event=emit,
        )
        goal = self.scenario.variant(self.variant).goal
        goal_ok = trace.outcome == "success" and goal.satisfied(trace.final_world)
        if trace.outcome == "failure" and trace.reason == "selection":
            self.world = trace.final_world
            self.entry_node = trace.failed_node
        else:
            self.world = self.scenario.initial_world(self.variant)
            self.entry_node = self.model.start_id
        return {
            "outcome": trace.outcome,
            "reason": trace.reason,
            "goal": bool(goal_ok),
            "visited": list(trace.visited),
        }


def create_app() -> FastAPI:
    app = FastAPI(title="skillgraph teaching service")

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse(status="ok")

    @app.get("/scenarios", response_model=ScenarioListResponse)
    def scenarios():
        return ScenarioListResponse(scenarios=scenario_names())

    @app.websocket("/ws")
    async def ws_endpoint(socket: WebSocket):
        await socket.accept()
        session: Session | None = None
        last_client_seq = 0

        async def send(msg_type: str, data: dict):
            await socket.send_json(
                {
                    "type": msg_type,
                    "session": session.id if session else "",
                    "seq": session.next_seq() if session else 0,
                    "data": data,
                }
            )

        async def push_world():
            await send("world.state", world_payload(session.world, session.scenario.layout))

        async def push_graph():
            dot = session.model.to_dot()
            await send("model.graph", {"dot": dot, "hash": dot_hash(dot)})

        try:
            while True:
                message = await socket.receive_json()
                msg_type = message.get("type")
                client_seq = message.get("seq", last_client_seq + 1)
                if client_seq <= last_client_seq:
                    await send("session.error", {"error": "sequence number not increasing"})
                    continue
                last_client_seq = client_seq
                data = message.get("data", {})
                try:
                    if msg_type == "session.start":
                        session = Session(SessionStartData(**data))
                        await send(
                            "session.start",
                            {
                                "session": session.id,
                                "scenario": session.scenario.name,
                                "variant": session.variant,
                                "layout": list(session.scenario.layout),
                                "theta": session.config.theta,
                                "tau": session.config.tau,
                                "config_hash": session.config.hash(),
                            },
                        )
                        await push_world()
                        await push_graph()
                    elif session is None:
                        await socket.send_json(
                            {
                                "type": "session.error",
                                "session": "",
                                "seq": 0,
                                "data": {"error": "session.start required first"},
                            }
                        )
                    elif msg_type == "demo.keyframe":
                        session.add_keyframe(KeyframeData(**data))
                        await send("demo.keyframe", {"count": len(session.pending)})
                        await push_world()
                    elif msg_type == "demo.commit":
                        commit_data = CommitData(**data)
                        _, records = session.commit(commit_data.kind, commit_data.keep)
                        await send(
                            "model.update_result",
                            {
                                "edits": [r.to_dict() for r in records],
                                "refit_counts": {
                                    "policy": counters.policy_fits,
                                    "classifier": counters.classifier_fits,
                                },
                            },
                        )
                        await push_graph()
                        await push_world()
                    elif msg_type == "exec.start":
                        seed = ExecStartData(**data).seed
                        events: list = []
                        events.append(("exec.start", {"seed": seed}))

                        def emit(kind, payload):
                            events.append(("exec.event", {"kind": kind, **payload}))

                        result = session.execute(seed, emit)
                        events.append(
                            ("exec.event", {"kind": "finished", **result})
                        )
                        for out_type, payload in events:
                            await send(out_type, payload)
                        await push_world()
                    elif msg_type == "model.graph":
                        await push_graph()
                    elif msg_type == "world.state":
                        await push_world()
                    else:
                        await send("session.error", {"error": f"unknown message type {msg_type!r}"})
                except SkillGraphError as exc:
                    await send("session.error", {"error": str(exc)})
        except WebSocketDisconnect:
            pass

    # serve the built browser client when it exists
    dist = os.path.join(os.path.dirname(__file__), "..", "..", "frontend", "dist")
    dist = os.path.abspath(dist)
    if os.path.isdir(dist):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=dist, html=True), name="ui")

    return app


app = create_app()
