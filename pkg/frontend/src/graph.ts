// Renders the engine-provided DOT text.  The client never mutates the graph;
// it parses the fixed declaration format and lays nodes out in BFS layers.

export interface GraphNode {
  id: number;
  label: string;
  start: boolean;
}

export interface ParsedGraph {
  nodes: GraphNode[];
  edges: [number, number][];
  kappa: number | null;
}

const NODE_RE = /^\s*n(\d+)\s*\[shape=(\w+),\s*label="([^"]*)"\];\s*$/;
const EDGE_RE = /^\s*n(\d+)\s*->\s*n(\d+);\s*$/;
const LABEL_RE = /^\s*label="kappa=(\d+)";\s*$/;

export function parseDot(dot: string): ParsedGraph {
  const nodes: GraphNode[] = [];
  const edges: [number, number][] = [];
  let kappa: number | null = null;
  for (const line of dot.split("\n")) {
    const nodeMatch = NODE_RE.exec(line);
    if (nodeMatch) {
      nodes.push({
        id: Number(nodeMatch[1]),
        label: nodeMatch[3],
        start: nodeMatch[2] === "doubleoctagon",
      });
      continue;
    }
    const edgeMatch = EDGE_RE.exec(line);
    if (edgeMatch) {
      edges.push([Number(edgeMatch[1]), Number(edgeMatch[2])]);
      continue;
    }
    const labelMatch = LABEL_RE.exec(line);
    if (labelMatch) {
      kappa = Number(labelMatch[1]);
    }
  }
  return { nodes, edges, kappa };
}

export function layerLayout(graph: ParsedGraph): Map<number, [number, number]> {
  const layers = new Map<number, number>();
  const children = new Map<number, number[]>();
  for (const [u, v] of graph.edges) {
    if (!children.has(u)) children.set(u, []);
    children.get(u)!.push(v);
  }
  const start = graph.nodes.find((n) => n.start);
  const queue: number[] = start ? [start.id] : [];
  if (start) layers.set(start.id, 0);
  while (queue.length) {
    const u = queue.shift()!;
    for (const v of children.get(u) ?? []) {
      if (!layers.has(v)) {
        layers.set(v, (layers.get(u) ?? 0) + 1);
        queue.push(v);
      }
    }
  }
  for (const node of graph.nodes) {
    if (!layers.has(node.id)) layers.set(node.id, 0);
  }
  const byLayer = new Map<number, number[]>();
  for (const node of graph.nodes) {
    const layer = layers.get(node.id)!;
    if (!byLayer.has(layer)) byLayer.set(layer, []);
    byLayer.get(layer)!.push(node.id);
  }
  const positions = new Map<number, [number, number]>();
  for (const [layer, ids] of byLayer) {
    ids.sort((a, b) => a - b);
    ids.forEach((id, i) => {
      positions.set(id, [layer, i]);
    });
  }
  return positions;
}

export function renderGraph(
  ctx: CanvasRenderingContext2D,
  dot: string,
  width: number,
  height: number,
  highlight: number[] = [],
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, width, height);
  const graph = parseDot(dot);
  if (graph.nodes.length === 0) return;
  const positions = layerLayout(graph);
  const maxLayer = Math.max(...[...positions.values()].map(([l]) => l));
  const maxRow = Math.max(...[...positions.values()].map(([, r]) => r));
  const cellX = width / (maxLayer + 2);
  const cellY = height / (maxRow + 2);
  const pixel = (id: number): [number, number] => {
    const [layer, row] = positions.get(id)!;
    return [(layer + 1) * cellX, (row + 1) * cellY];
  };
  ctx.strokeStyle = "#888";
  for (const [u, v] of graph.edges) {
    const [x1, y1] = pixel(u);
    const [x2, y2] = pixel(v);
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
    const angle = Math.atan2(y2 - y1, x2 - x1);
    ctx.beginPath();
    ctx.moveTo(x2 - 10 * Math.cos(angle - 0.3), y2 - 10 * Math.sin(angle - 0.3));
    ctx.lineTo(x2, y2);
    ctx.lineTo(x2 - 10 * Math.cos(angle + 0.3), y2 - 10 * Math.sin(angle + 0.3));
    ctx.stroke();
  }
  for (const node of graph.nodes) {
    const [x, y] = pixel(node.id);
    ctx.fillStyle = highlight.includes(node.id)
      ? "#ffd97a"
      : node.start
        ? "#cfe3cf"
        : "#dde6f0";
    ctx.strokeStyle = "#333";
    ctx.beginPath();
    ctx.arc(x, y, 16, 0, Math.PI * 2);
    ctx.fill();
    ctx.stroke();
    ctx.fillStyle = "#111";
    ctx.font = "10px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(node.start ? "start" : node.label.split(" ")[0], x, y + 3);
    ctx.textAlign = "left";
  }
}
