import { envelope, type Envelope } from "./protocol";
import { SequenceBuffer } from "./seqbuffer";
import type { ViewEvent } from "./state";

// Thin socket wrapper: numbers outbound messages, orders inbound ones, and
// feeds both directions into one event stream for the reducer.

export class Connection {
  private ws: WebSocket | null = null;
  private outSeq = 0;
  private buffer: SequenceBuffer;

  constructor(private onEvent: (event: ViewEvent) => void) {
    this.buffer = new SequenceBuffer((msg) =>
      this.onEvent({ dir: "in", msg }),
    );
  }

  open(url: string): void {
    this.buffer.reset();
    this.outSeq = 0;
    this.ws = new WebSocket(url);
    this.ws.onmessage = (ev) => {
      try {
        this.buffer.push(JSON.parse(ev.data) as Envelope);
      } catch {
        // non-JSON frames are dropped
      }
    };
  }

  get ready(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  send(type: string, session: string, data: Record<string, unknown>): Envelope {
    this.outSeq += 1;
    const msg = envelope(type, session, this.outSeq, data);
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(msg));
    }
    this.onEvent({ dir: "out", msg });
    return msg;
  }

  close(): void {
    this.ws?.close();
    this.ws = null;
  }
}
