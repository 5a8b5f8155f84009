import { canvasToWorld, renderWorld } from "./canvas";
import { Connection } from "./connection";
import { renderGraph } from "./graph";
import {
  commitKeepCount,
  initialView,
  reduce,
  type SessionView,
  type ViewEvent,
} from "./state";

let view: SessionView = initialView();
const eventLog: ViewEvent[] = [];

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

const worldCanvas = $("world") as unknown as HTMLCanvasElement;
const graphCanvas = $("graph") as unknown as HTMLCanvasElement;
const referenceSelect = $("reference") as unknown as HTMLSelectElement;
const scenarioSelect = $("scenario") as unknown as HTMLSelectElement;
const variantSelect = $("variant") as unknown as HTMLSelectElement;
const gripperToggle = $("gripper") as unknown as HTMLInputElement;
const thetaInput = $("theta-value") as unknown as HTMLInputElement;
const seedInput = $("seed") as unknown as HTMLInputElement;
const statusLine = $("status");
const editsLine = $("edits");

const connection = new Connection((event) => {
  eventLog.push(event);
  view = reduce(view, event);
  render();
});

function apply(event: ViewEvent): void {
  eventLog.push(event);
  view = reduce(view, event);
  render();
}

function describeEdits(): string {
  if (!view.lastEdits.length) return "";
  const counts = new Map<string, number>();
  for (const edit of view.lastEdits) {
    counts.set(edit.kind, (counts.get(edit.kind) ?? 0) + 1);
  }
  const parts = [...counts.entries()].map(([k, n]) => `${k}: ${n}`);
  const refits = view.lastRefits
    ? ` | refits policy=${view.lastRefits.policy} classifier=${view.lastRefits.classifier}`
    : "";
  return parts.join(", ") + refits;
}

function render(): void {
  const wctx = worldCanvas.getContext("2d");
  if (wctx) renderWorld(wctx, view, worldCanvas.width, worldCanvas.height);
  const gctx = graphCanvas.getContext("2d");
  if (gctx) {
    const highlighted = view.lastEdits
      .filter((e) => e.kind === "node_addition")
      .flatMap((e) => e.nodes);
    renderGraph(gctx, view.graphDot, graphCanvas.width, graphCanvas.height, highlighted);
  }
  if (view.layout.length && referenceSelect.options.length !== view.layout.length) {
    referenceSelect.innerHTML = view.layout
      .map((o) => `<option value="${o}">${o}</option>`)
      .join("");
  }
  const hashNote = view.graphHashMatches ? "" : "  GRAPH HASH MISMATCH";
  statusLine.textContent =
    `${view.connection} | session ${view.sessionId || "-"} | mode ${view.mode}` +
    ` | keyframes ${view.inProgress.length}` +
    (view.lastOutcome
      ? ` | last run: ${view.lastOutcome.outcome} goal=${view.lastOutcome.goal}`
      : "") +
    (view.lastError ? ` | error: ${view.lastError}` : "") +
    hashNote;
  editsLine.textContent = describeEdits();
  ($("commit-full") as unknown as HTMLButtonElement).disabled =
    view.inProgress.length === 0;
  ($("commit-fix") as unknown as HTMLButtonElement).disabled =
    view.inProgress.length === 0;
  ($("undo") as unknown as HTMLButtonElement).disabled =
    view.inProgress.length === 0;
}

$("connect").addEventListener("click", () => {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  connection.open(`${proto}://${location.host}/ws`);
  setTimeout(() => {
    connection.send("session.start", "", {
      scenario: scenarioSelect.value,
      variant: variantSelect.value,
      theta: Number(thetaInput.value) || 0.5,
    });
  }, 200);
});

worldCanvas.addEventListener("click", (ev) => {
  if (view.connection !== "ready") return;
  if (!referenceSelect.value) return; // a reference object is required first
  const rect = worldCanvas.getBoundingClientRect();
  const [x, y] = canvasToWorld(
    ev.clientX - rect.left,
    ev.clientY - rect.top,
    worldCanvas.width,
    worldCanvas.height,
  );
  connection.send("demo.keyframe", view.sessionId, {
    pose: { x, y, theta: 0.0 },
    gripper: gripperToggle.checked ? 1.0 : 0.0,
    reference: referenceSelect.value,
  });
});

$("undo").addEventListener("click", () => {
  apply({ dir: "local", action: "undo" });
});

$("commit-full").addEventListener("click", () => {
  connection.send("demo.commit", view.sessionId, {
    kind: "full",
    keep: commitKeepCount(view),
  });
});

$("commit-fix").addEventListener("click", () => {
  connection.send("demo.commit", view.sessionId, {
    kind: "corrective",
    keep: commitKeepCount(view),
  });
});

$("run").addEventListener("click", () => {
  connection.send("exec.start", view.sessionId, {
    seed: Number(seedInput.value) || 0,
  });
});

render();
