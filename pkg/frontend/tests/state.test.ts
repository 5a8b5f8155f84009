import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { envelope } from "../src/protocol";
import {
  commitKeepCount,
  initialView,
  reduce,
  replay,
  type ViewEvent,
} from "../src/state";

function loadLog(name: string): ViewEvent[] {
  return JSON.parse(
    readFileSync(new URL(`./fixtures/${name}`, import.meta.url), "utf-8"),
  ) as ViewEvent[];
}

function outKeyframe(seq: number, x: number, y: number): ViewEvent {
  return {
    dir: "out",
    msg: envelope("demo.keyframe", "s", seq, {
      pose: { x, y, theta: 0 },
      gripper: 0,
      reference: "pitcher",
    }),
  };
}

describe("session view reducer", () => {
  it("appends a marker per placed keyframe", () => {
    let view = initialView();
    view = reduce(view, outKeyframe(1, 1.0, 2.0));
    view = reduce(view, outKeyframe(2, 1.5, 2.0));
    expect(view.inProgress).toHaveLength(2);
    expect(view.inProgress[0].pose.x).toBe(1.0);
    expect(view.sentKeyframes).toBe(2);
  });

  it("undo removes the last marker locally and changes nothing else", () => {
    let view = initialView();
    view = reduce(view, outKeyframe(1, 1.0, 2.0));
    view = reduce(view, outKeyframe(2, 1.5, 2.0));
    const before = view;
    view = reduce(view, { dir: "local", action: "undo" });
    expect(view.inProgress).toHaveLength(1);
    expect(view.sentKeyframes).toBe(2); // messages already sent stay sent
    expect(commitKeepCount(view)).toBe(1);
    expect(view.world).toEqual(before.world);
    view = reduce(view, { dir: "local", action: "undo" });
    view = reduce(view, { dir: "local", action: "undo" }); // no-op when empty
    expect(view.inProgress).toHaveLength(0);
  });

  it("replaying the recorded teaching session reproduces the same view", () => {
    const log = loadLog("session_log.json");
    const a = replay(log);
    const b = replay(log);
    expect(a).toEqual(b);
    expect(a.connection).toBe("ready");
    expect(a.scenario).toBe("pour");
    expect(a.inProgress).toHaveLength(0); // cleared by the update result
    expect(a.lastEdits.length).toBeGreaterThan(0);
    expect(a.lastRefits?.policy).toBeGreaterThan(0);
    expect(a.lastOutcome?.outcome).toBe("success");
    expect(a.lastOutcome?.goal).toBe(true);
  });

  it("verifies the engine's graph hash on every update", () => {
    const log = loadLog("session_log.json");
    const view = replay(log);
    expect(view.graphDot).toContain("digraph task_model");
    expect(view.graphHashMatches).toBe(true);
  });

  it("detects a tampered graph hash", () => {
    const log = loadLog("session_log.json");
    const tampered = log.map((e) =>
      e.dir === "in" && e.msg.type === "model.graph"
        ? {
            ...e,
            msg: { ...e.msg, data: { ...e.msg.data, hash: "0".repeat(64) } },
          }
        : e,
    );
    expect(replay(tampered as ViewEvent[]).graphHashMatches).toBe(false);
  });

  it("a failure event opens correction mode pre-seeded with the failure state", () => {
    const log = loadLog("failure_log.json");
    const view = replay(log);
    const failure = log.find(
      (e) =>
        e.dir === "in" &&
        e.msg.type === "exec.event" &&
        (e.msg.data as { kind?: string }).kind === "failure",
    );
    expect(failure).toBeDefined();
    const failureState = (failure as Extract<ViewEvent, { dir: "in" }>).msg
      .data.state as number[];
    expect(view.mode).toBe("correcting");
    expect(view.correctionState).toEqual(failureState);
    expect(view.correctionNode).not.toBeNull();
    expect(view.running).toBe(false);
  });

  it("execution events accumulate in order", () => {
    const log = loadLog("session_log.json");
    const view = replay(log);
    const kinds = view.trace.map((e) => e.kind);
    expect(kinds[0]).toBe("node_entered");
    expect(kinds).toContain("keyframe_reached");
    expect(kinds[kinds.length - 1]).toBe("finished");
  });

  it("surfaces server errors", () => {
    let view = initialView();
    view = reduce(view, {
      dir: "in",
      msg: envelope("session.error", "s", 1, { error: "boom" }),
    });
    expect(view.lastError).toBe("boom");
  });
});
