// DOM-free session model for the operator console: socket lifecycle with
// reconnect backoff, drag-to-orient pose sending throttled to 120 Hz,
// both zoom modes, recording control, and a frame latency estimate.

import {
  FrameMsg,
  InboundMsg,
  OutboundMsg,
  ProtocolValidator,
  StateMsg,
} from "./protocol.js";
import { yawPitchToQuaternion } from "./math.js";

export const DRAG_GAIN_DEG_PER_PX = 0.2;
export const POSE_MIN_INTERVAL_MS = 1000 / 120;
export const FRAME_INTERVAL_MS = 1000 / 60;

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionOptions {
  socketFactory: SocketFactory;
  validator: ProtocolValidator;
  role?: "operator" | "viewer";
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => number;
  clearTimer?: (id: number) => void;
  maxLog?: number;
}

export interface ConsoleModel {
  connected: boolean;
  role: "operator" | "viewer";
  state: StateMsg | null;
  recording: boolean;
  recordingName: string | null;
  yawDeg: number;
  pitchDeg: number;
  lastFrame: FrameMsg | null;
  frameLatencyMs: number | null;
  log: string[];
}

export class ConsoleSession {
  readonly model: ConsoleModel;
  onchange: (() => void) | null = null;

  private readonly opts: Required<Omit<SessionOptions, "role">>;
  private socket: SocketLike | null = null;
  private url = "";
  private closedByUser = false;
  private backoffMs = 500;
  private reconnectTimer: number | null = null;

  private lastPoseSentMs = -Infinity;
  private pendingPose = false;
  private poseTimer: number | null = null;

  private frameBaseMs: number | null = null;
  private frameBaseSeq = 0;

  constructor(options: SessionOptions) {
    this.opts = {
      socketFactory: options.socketFactory,
      validator: options.validator,
      now: options.now ?? (() => Date.now()),
      setTimer: options.setTimer ?? ((fn, ms) => setTimeout(fn, ms) as unknown as number),
      clearTimer: options.clearTimer ?? ((id) => clearTimeout(id as unknown as ReturnType<typeof setTimeout>)),
      maxLog: options.maxLog ?? 50,
    };
    this.model = {
      connected: false,
      role: options.role ?? "operator",
      state: null,
      recording: false,
      recordingName: null,
      yawDeg: 0,
      pitchDeg: 0,
      lastFrame: null,
      frameLatencyMs: null,
      log: [],
    };
  }

  connect(url: string): void {
    this.url = url;
    this.closedByUser = false;
    this.open();
  }

  disconnect(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) {
      this.opts.clearTimer(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
  }

  private open(): void {
    const ws = this.opts.socketFactory(this.url);
    this.socket = ws;
    ws.onopen = () => {
      this.model.connected = true;
      this.backoffMs = 500;
      this.log(`connected as ${this.model.role}`);
      this.send({ type: "hello", role: this.model.role, proto: 1 });
      this.notify();
    };
    ws.onmessage = (ev) => this.onServerMessage(String(ev.data));
    ws.onerror = () => undefined; // close always follows
    ws.onclose = () => {
      const wasConnected = this.model.connected;
      this.model.connected = false;
      this.notify();
      if (this.closedByUser) return;
      this.log(wasConnected ? "connection lost, reconnecting" : "connect failed, retrying");
      this.reconnectTimer = this.opts.setTimer(() => {
        this.reconnectTimer = null;
        this.open();
      }, this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, 10_000);
    };
  }

  // -- outbound ---------------------------------------------------------

  private send(msg: InboundMsg): boolean {
    if (!this.socket || !this.model.connected) {
      this.log(`not connected, dropping ${msg.type}`);
      return false;
    }
    if (!this.opts.validator.validate(msg, "inbound")) {
      this.log(`blocked schema-invalid ${msg.type} message`);
      return false;
    }
    this.socket.send(JSON.stringify(msg));
    return true;
  }

  private controlsAllowed(): boolean {
    if (this.model.role !== "operator") {
      this.log("viewer role: controls disabled");
      return false;
    }
    return true;
  }

  dragBy(dxPx: number, dyPx: number): void {
    if (!this.controlsAllowed()) return;
    if (dxPx === 0 && dyPx === 0) return;
    this.model.yawDeg += dxPx * DRAG_GAIN_DEG_PER_PX;
    this.model.pitchDeg += dyPx * DRAG_GAIN_DEG_PER_PX;
    // keep the requested pose away from the decomposition singularity;
    // the server clamps to the real gimbal ranges
    this.model.pitchDeg = Math.min(Math.max(this.model.pitchDeg, -89), 89);
    if (this.model.yawDeg > 180) this.model.yawDeg -= 360;
    if (this.model.yawDeg <= -180) this.model.yawDeg += 360;
    this.queuePose();
    this.notify();
  }

  private queuePose(): void {
    const now = this.opts.now();
    if (now - this.lastPoseSentMs >= POSE_MIN_INTERVAL_MS) {
      this.sendPose();
      return;
    }
    this.pendingPose = true;
    if (this.poseTimer === null) {
      const wait = Math.max(this.lastPoseSentMs + POSE_MIN_INTERVAL_MS - now, 1);
      this.poseTimer = this.opts.setTimer(() => {
        this.poseTimer = null;
        if (this.pendingPose) this.sendPose();
      }, wait);
    }
  }

  private sendPose(): void {
    this.pendingPose = false;
    const t = this.opts.now();
    const q = yawPitchToQuaternion(this.model.yawDeg, this.model.pitchDeg);
    if (this.send({ type: "pose", q, t_ms: Math.max(t, 0) })) {
      this.lastPoseSentMs = t;
    }
  }

  zoomStep(dir: -1 | 1): void {
    if (!this.controlsAllowed()) return;
    this.send({ type: "zoom", mode: "step", dir });
  }

  zoomHoldStart(v: number): void {
    if (!this.controlsAllowed()) return;
    this.send({ type: "zoom", mode: "rate", v });
  }

  zoomHoldEnd(): void {
    if (!this.controlsAllowed()) return;
    this.send({ type: "zoom", mode: "rate", v: 0 });
  }

  recordStart(name: string): boolean {
    if (!this.controlsAllowed()) return false;
    if (this.model.recording) {
      this.log("already recording; stop first");
      return false;
    }
    if (this.send({ type: "record", action: "start", name })) {
      this.model.recordingName = name;
      return true;
    }
    return false;
  }

  recordStop(): void {
    if (!this.controlsAllowed()) return;
    this.send({ type: "record", action: "stop" });
  }

  // -- inbound ----------------------------------------------------------

  private onServerMessage(text: string): void {
    let msg: OutboundMsg;
    try {
      msg = JSON.parse(text) as OutboundMsg;
    } catch {
      this.log("unparseable server message");
      return;
    }
    switch (msg.type) {
      case "state":
        this.model.state = msg;
        this.model.recording = msg.recording === true;
        if (!this.model.recording) this.model.recordingName = null;
        break;
      case "frame": {
        this.model.lastFrame = msg;
        const now = this.opts.now();
        if (this.frameBaseMs === null) {
          this.frameBaseMs = now;
          this.frameBaseSeq = msg.seq;
          this.model.frameLatencyMs = 0;
        } else {
          const expected = this.frameBaseMs + (msg.seq - this.frameBaseSeq) * FRAME_INTERVAL_MS;
          this.model.frameLatencyMs = now - expected;
        }
        break;
      }
      case "error":
        this.log(`server error [${msg.code}] ${msg.msg}`);
        break;
      default:
        this.log("ignoring unknown server message type");
    }
    this.notify();
  }

  private log(line: string): void {
    this.model.log.push(line);
    if (this.model.log.length > this.opts.maxLog) this.model.log.shift();
  }

  private notify(): void {
    this.onchange?.();
  }
}
