// Teaching-session protocol: JSON envelopes over one WebSocket.
// Every message carries the session id and a monotonically increasing
// sequence number per sender.

export interface Envelope {
  type: string;
  session: string;
  seq: number;
  data: Record<string, unknown>;
}

export interface PosePayload {
  x: number;
  y: number;
  theta: number;
}

export interface KeyframePayload {
  pose: PosePayload;
  gripper: number;
  reference: string;
}

export interface WorldPayload {
  objects: Record<string, [number, number, number]>;
  ee: [number, number, number];
  gripper: number;
  attachment: string | null;
  flags: Record<string, boolean>;
  features: number[];
  layout: string[];
}

export interface SessionStartReply {
  session: string;
  scenario: string;
  variant: string;
  layout: string[];
  theta: number;
  tau: number;
  config_hash: string;
}

export interface EditRecordPayload {
  kind: "node_addition" | "edge_addition" | "node_modification";
  nodes: number[];
  edge: [number, number] | null;
  demo_id: string;
  segment_index: number;
}

export interface UpdateResultPayload {
  edits: EditRecordPayload[];
  refit_counts: { policy: number; classifier: number };
}

export interface GraphPayload {
  dot: string;
  hash: string;
}

export type ExecEventKind =
  | "node_entered"
  | "keyframe_reached"
  | "failure"
  | "finished";

export interface ExecEventPayload {
  kind: ExecEventKind;
  node?: number;
  pose?: number[];
  state?: number[];
  outcome?: "success" | "failure";
  reason?: string | null;
  goal?: boolean;
  visited?: number[];
}

export function envelope(
  type: string,
  session: string,
  seq: number,
  data: Record<string, unknown>,
): Envelope {
  return { type, session, seq, data };
}
