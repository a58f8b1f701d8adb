/** Connection state machine: hello handshake, role tracking, latest-frame
 * bookkeeping, 20 Hz action throttling, and reconnect with exponential
 * backoff. The WebSocket constructor is injected so tests can drive the
 * machine with a fake socket and fake timers.
 */

import {
  ActionCommand,
  ServerMessage,
  StateFrame,
  TICK_HZ,
  actionMessage,
  helloMessage,
  parseServerMessage,
  recordMessage,
} from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";
export type Role = "driver" | "viewer";

// Handler parameters are loose so the DOM WebSocket satisfies this shape
// directly and tests can drive it with a fake.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev: any) => unknown) | null;
  onclose: ((ev: any) => unknown) | null;
  onmessage: ((event: any) => unknown) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientEvents {
  onFrame?: (frame: StateFrame) => void;
  onStatus?: (status: string) => void;
  onSaved?: (path: string, count: number) => void;
}

export const BACKOFF_INITIAL_MS = 500;
export const BACKOFF_MAX_MS = 8000;
const SEND_INTERVAL_MS = 1000 / TICK_HZ;

export class TeleopClient {
  connection: ConnectionState = "closed";
  role: Role = "viewer";
  latestFrame: StateFrame | null = null;
  lastError: string | null = null;

  private socket: SocketLike | null = null;
  private backoffMs = BACKOFF_INITIAL_MS;
  private lastSentAt = -Infinity;
  private stopped = false;

  constructor(
    private url: string,
    private makeSocket: SocketFactory,
    private events: ClientEvents = {},
    private now: () => number = () => performance.now(),
    private setTimer: (fn: () => void, ms: number) => void = (fn, ms) => {
      setTimeout(fn, ms);
    },
  ) {}

  connect(): void {
    this.stopped = false;
    this.connection = "connecting";
    this.events.onStatus?.(`connecting to ${this.url}`);
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.connection = "open";
      this.backoffMs = BACKOFF_INITIAL_MS;
      this.events.onStatus?.("connected; requesting driver role");
      socket.send(helloMessage("driver"));
    };
    socket.onmessage = (event) => {
      const msg = parseServerMessage(event.data);
      if (msg !== null) this.handleMessage(msg);
    };
    socket.onclose = () => {
      this.connection = "closed";
      this.role = "viewer";
      this.socket = null;
      if (this.stopped) return;
      this.events.onStatus?.(`disconnected; retrying in ${this.backoffMs} ms`);
      this.setTimer(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
    };
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
  }

  private handleMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "state":
        // Stale frames are simply overwritten; rendering reads latestFrame.
        this.latestFrame = msg;
        this.events.onFrame?.(msg);
        break;
      case "role":
        this.role = msg.granted ? "driver" : "viewer";
        this.events.onStatus?.(
          msg.granted ? "driving" : "driver slot taken; viewing only",
        );
        break;
      case "session_saved":
        this.events.onSaved?.(msg.path, msg.count);
        this.events.onStatus?.(`saved ${msg.count} samples to ${msg.path}`);
        break;
      case "error":
        this.lastError = msg.code;
        if (msg.code !== "driver_taken") {
          this.events.onStatus?.(`server error: ${msg.code}`);
        }
        break;
    }
  }

  /** Send the current command, throttled to the tick rate. Drivers only;
   * returns whether a message actually went out. */
  sendAction(action: ActionCommand): boolean {
    if (this.connection !== "open" || this.role !== "driver") return false;
    const t = this.now();
    if (t - this.lastSentAt < SEND_INTERVAL_MS) return false;
    this.lastSentAt = t;
    this.socket!.send(actionMessage(action));
    return true;
  }

  setRecording(on: boolean): boolean {
    if (this.connection !== "open" || this.role !== "driver") return false;
    this.socket!.send(recordMessage(on));
    return true;
  }
}
