import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { JsonSchema, ProtocolValidator } from "../src/protocol.js";
import { SocketLike } from "../src/session.js";

const here = dirname(fileURLToPath(import.meta.url));

export function loadSchema(): JsonSchema {
  const path = join(here, "..", "..", "src", "ptzkit", "protocol.schema.json");
  return JSON.parse(readFileSync(path, "utf-8")) as JsonSchema;
}

export function loadValidator(): ProtocolValidator {
  return new ProtocolValidator(loadSchema());
}

/** In-memory socket capturing sends; the test plays the server side. */
export class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  serverOpen(): void {
    this.onopen?.();
  }

  serverSend(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  sentJson(): any[] {
    return this.sent.map((s) => JSON.parse(s));
  }
}

/** Manually advanced clock plus timer queue. */
export class FakeClock {
  nowMs = 0;
  private timers = new Map<number, { at: number; fn: () => void }>();
  private nextId = 1;

  now = (): number => this.nowMs;

  setTimer = (fn: () => void, ms: number): number => {
    const id = this.nextId++;
    this.timers.set(id, { at: this.nowMs + ms, fn });
    return id;
  };

  clearTimer = (id: number): void => {
    this.timers.delete(id);
  };

  advance(ms: number): void {
    const target = this.nowMs + ms;
    for (;;) {
      const due = [...this.timers.entries()]
        .filter(([, t]) => t.at <= target)
        .sort((a, b) => a[1].at - b[1].at)[0];
      if (!due) break;
      this.timers.delete(due[0]);
      this.nowMs = due[1].at;
      due[1].fn();
    }
    this.nowMs = target;
  }

  pending(): number {
    return this.timers.size;
  }
}
