import type { Envelope } from "./protocol";

// Delivers server envelopes strictly in sequence order.  Out-of-order
// arrivals wait in the buffer until the gap fills; stale or duplicate
// sequence numbers are dropped.

export class SequenceBuffer {
  private next = 1;
  private pending = new Map<number, Envelope>();

  constructor(private deliver: (msg: Envelope) => void) {}

  push(msg: Envelope): void {
    if (msg.seq < this.next || this.pending.has(msg.seq)) {
      return; // duplicate or stale
    }
    this.pending.set(msg.seq, msg);
    while (this.pending.has(this.next)) {
      const ready = this.pending.get(this.next)!;
      this.pending.delete(this.next);
      this.next += 1;
      this.deliver(ready);
    }
  }

  get buffered(): number {
    return this.pending.size;
  }

  reset(): void {
    this.next = 1;
    this.pending.clear();
  }
}
