import type { WorldPayload } from "./protocol";
import type { SessionView } from "./state";

// Workspace renderer: a fixed world window mapped onto the canvas.

export const WORLD_BOUNDS = { minX: -1.2, maxX: 6.2, minY: -0.2, maxY: 5.0 };

export function worldToCanvas(
  x: number,
  y: number,
  width: number,
  height: number,
): [number, number] {
  const { minX, maxX, minY, maxY } = WORLD_BOUNDS;
  const px = ((x - minX) / (maxX - minX)) * width;
  const py = height - ((y - minY) / (maxY - minY)) * height;
  return [px, py];
}

export function canvasToWorld(
  px: number,
  py: number,
  width: number,
  height: number,
): [number, number] {
  const { minX, maxX, minY, maxY } = WORLD_BOUNDS;
  const x = minX + (px / width) * (maxX - minX);
  const y = minY + ((height - py) / height) * (maxY - minY);
  return [x, y];
}

const OBJECT_COLORS: Record<string, string> = {
  pitcher: "#3b6ea5",
  bowl: "#a56e3b",
  bowl2: "#a56e3b",
  coaster: "#7a7a7a",
  rest: "#7a7a7a",
  lid: "#4a9d5f",
  potlid: "#4a9d5f",
  dirt: "#8a5a2a",
  crumbs: "#8a5a2a",
  shelf: "#9a8ebf",
  tray: "#9a8ebf",
  pot: "#b05555",
  spoon: "#c9a227",
};

function drawHeading(
  ctx: CanvasRenderingContext2D,
  px: number,
  py: number,
  theta: number,
  radius: number,
): void {
  ctx.beginPath();
  ctx.moveTo(px, py);
  ctx.lineTo(px + radius * Math.cos(-theta), py + radius * Math.sin(-theta));
  ctx.stroke();
}

export function renderWorld(
  ctx: CanvasRenderingContext2D,
  view: SessionView,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, width, height);
  const world: WorldPayload | null = view.world;
  if (!world) return;

  for (const [name, pose] of Object.entries(world.objects)) {
    const [px, py] = worldToCanvas(pose[0], pose[1], width, height);
    ctx.fillStyle = OBJECT_COLORS[name] ?? "#666";
    ctx.strokeStyle = "#333";
    ctx.beginPath();
    ctx.arc(px, py, 12, 0, Math.PI * 2);
    ctx.fill();
    drawHeading(ctx, px, py, pose[2], 16);
    ctx.fillStyle = "#222";
    ctx.font = "11px sans-serif";
    ctx.fillText(name, px + 14, py - 6);
  }

  // placed, uncommitted keyframes
  view.inProgress.forEach((kf, i) => {
    const [px, py] = worldToCanvas(kf.pose.x, kf.pose.y, width, height);
    ctx.strokeStyle = "#d07b00";
    ctx.beginPath();
    ctx.arc(px, py, 6, 0, Math.PI * 2);
    ctx.stroke();
    ctx.fillStyle = "#d07b00";
    ctx.font = "10px sans-serif";
    ctx.fillText(String(i + 1), px + 7, py + 3);
  });

  // the end-effector
  const [ex, ey] = worldToCanvas(world.ee[0], world.ee[1], width, height);
  ctx.fillStyle = world.gripper >= 0.5 ? "#c22" : "#2a2";
  ctx.strokeStyle = "#111";
  ctx.beginPath();
  ctx.arc(ex, ey, 8, 0, Math.PI * 2);
  ctx.fill();
  drawHeading(ctx, ex, ey, world.ee[2], 14);

  if (view.mode === "correcting" && view.correctionState) {
    ctx.strokeStyle = "#c22";
    ctx.setLineDash([4, 3]);
    ctx.strokeRect(4, 4, width - 8, height - 8);
    ctx.setLineDash([]);
    ctx.fillStyle = "#c22";
    ctx.font = "12px sans-serif";
    ctx.fillText("correction mode: demonstrate from here", 12, 20);
  }
}
