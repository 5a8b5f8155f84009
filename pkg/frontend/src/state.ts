import { sha256Hex } from "./hash";
import type {
  Envelope,
  ExecEventPayload,
  EditRecordPayload,
  GraphPayload,
  KeyframePayload,
  SessionStartReply,
  UpdateResultPayload,
  WorldPayload,
} from "./protocol";

// The view is event-sourced: it derives from the ordered stream of protocol
// messages (both directions) plus local undo actions.  Replaying the same
// event log always reproduces the same view.

export type ViewEvent =
  | { dir: "in"; msg: Envelope }
  | { dir: "out"; msg: Envelope }
  | { dir: "local"; action: "undo" };

export type Mode = "idle" | "teaching" | "correcting" | "executing";

export interface PlacedKeyframe {
  pose: { x: number; y: number; theta: number };
  gripper: number;
  reference: string;
}

export interface SessionView {
  connection: "disconnected" | "starting" | "ready";
  sessionId: string;
  scenario: string;
  variant: string;
  layout: string[];
  theta: number;
  world: WorldPayload | null;
  inProgress: PlacedKeyframe[];
  sentKeyframes: number;
  mode: Mode;
  running: boolean;
  trace: ExecEventPayload[];
  lastOutcome: { outcome: string; goal: boolean; reason: string | null } | null;
  correctionState: number[] | null;
  correctionNode: number | null;
  graphDot: string;
  graphHash: string;
  graphHashMatches: boolean;
  lastEdits: EditRecordPayload[];
  lastRefits: { policy: number; classifier: number } | null;
  lastError: string | null;
  lastServerSeq: number;
}

export function initialView(): SessionView {
  return {
    connection: "disconnected",
    sessionId: "",
    scenario: "",
    variant: "",
    layout: [],
    theta: 0.5,
    world: null,
    inProgress: [],
    sentKeyframes: 0,
    mode: "idle",
    running: false,
    trace: [],
    lastOutcome: null,
    correctionState: null,
    correctionNode: null,
    graphDot: "",
    graphHash: "",
    graphHashMatches: true,
    lastEdits: [],
    lastRefits: null,
    lastError: null,
    lastServerSeq: 0,
  };
}

function reduceInbound(view: SessionView, msg: Envelope): SessionView {
  const next = { ...view, lastServerSeq: msg.seq };
  switch (msg.type) {
    case "session.start": {
      const data = msg.data as unknown as SessionStartReply;
      return {
        ...next,
        connection: "ready",
        sessionId: data.session,
        scenario: data.scenario,
        variant: data.variant,
        layout: data.layout,
        theta: data.theta,
        mode: "teaching",
      };
    }
    case "world.state":
      return { ...next, world: msg.data as unknown as WorldPayload };
    case "model.graph": {
      const data = msg.data as unknown as GraphPayload;
      return {
        ...next,
        graphDot: data.dot,
        graphHash: data.hash,
        graphHashMatches: sha256Hex(data.dot) === data.hash,
      };
    }
    case "model.update_result": {
      const data = msg.data as unknown as UpdateResultPayload;
      return {
        ...next,
        lastEdits: data.edits,
        lastRefits: data.refit_counts,
        inProgress: [],
        sentKeyframes: 0,
        mode: "teaching",
        correctionState: null,
        correctionNode: null,
      };
    }
    case "demo.keyframe":
      return next; // server ack; the local list already holds the marker
    case "exec.start":
      return { ...next, trace: [], running: true, mode: "executing" };
    case "exec.event": {
      const data = msg.data as unknown as ExecEventPayload;
      const trace = [...next.trace, data];
      if (data.kind === "failure") {
        return {
          ...next,
          trace,
          running: false,
          mode: "correcting",
          correctionState: data.state ?? null,
          correctionNode: data.node ?? null,
        };
      }
      if (data.kind === "finished") {
        const ok = data.outcome === "success" && data.goal === true;
        return {
          ...next,
          trace,
          running: false,
          mode: ok ? "idle" : "correcting",
          correctionState: ok ? null : next.correctionState,
          correctionNode: ok ? null : next.correctionNode,
          lastOutcome: {
            outcome: data.outcome ?? "failure",
            goal: data.goal ?? false,
            reason: data.reason ?? null,
          },
        };
      }
      return { ...next, trace };
    }
    case "session.error":
      return { ...next, lastError: String(msg.data.error ?? "unknown error") };
    default:
      return next;
  }
}

function reduceOutbound(view: SessionView, msg: Envelope): SessionView {
  switch (msg.type) {
    case "session.start":
      return { ...view, connection: "starting" };
    case "demo.keyframe": {
      const kf = msg.data as unknown as KeyframePayload;
      return {
        ...view,
        inProgress: [
          ...view.inProgress,
          { pose: kf.pose, gripper: kf.gripper, reference: kf.reference },
        ],
        sentKeyframes: view.sentKeyframes + 1,
      };
    }
    case "demo.commit":
      return view; // cleared on the server's update result
    case "exec.start":
      return { ...view, running: true, trace: [], mode: "executing" };
    default:
      return view;
  }
}

export function reduce(view: SessionView, event: ViewEvent): SessionView {
  if (event.dir === "in") return reduceInbound(view, event.msg);
  if (event.dir === "out") return reduceOutbound(view, event.msg);
  if (event.action === "undo") {
    if (view.inProgress.length === 0) return view;
    return { ...view, inProgress: view.inProgress.slice(0, -1) };
  }
  return view;
}

export function replay(events: ViewEvent[]): SessionView {
  return events.reduce(reduce, initialView());
}

// Number of leading keyframes the server should keep at commit: everything
// the user has not undone.
export function commitKeepCount(view: SessionView): number {
  return view.inProgress.length;
}
