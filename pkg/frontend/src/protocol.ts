/** Wire protocol shared with the teleop server: JSON text frames over
 * WebSocket. Parsing is defensive — a malformed frame yields null rather
 * than an exception so one bad message never kills the render loop. */

export const V_MAX = 0.2; // m/s
export const OMEGA_MAX = 2.0; // rad/s
export const TICK_HZ = 20;
export const N_RAYS = 9;

export interface StateFrame {
  type: "state";
  t: number;
  pose: [number, number, number]; // x, y, heading
  speed: number;
  rays: number[]; // 9 normalized distances in [0, 1]
  reward: number;
  green_dot: [number, number];
  recording: boolean;
  sample_count: number;
}

export interface RoleMessage {
  type: "role";
  granted: boolean;
}

export interface SessionSavedMessage {
  type: "session_saved";
  path: string;
  count: number;
}

export interface ErrorMessage {
  type: "error";
  code: string;
}

export type ServerMessage =
  | StateFrame
  | RoleMessage
  | SessionSavedMessage
  | ErrorMessage;

export interface ActionCommand {
  speed: number;
  steer: number;
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isNumberArray(v: unknown, length: number): v is number[] {
  return Array.isArray(v) && v.length === length && v.every(isFiniteNumber);
}

/** Parse one raw server frame; returns null on anything malformed. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const msg = doc as Record<string, unknown>;
  switch (msg.type) {
    case "state":
      if (
        isFiniteNumber(msg.t) &&
        isNumberArray(msg.pose, 3) &&
        isFiniteNumber(msg.speed) &&
        isNumberArray(msg.rays, N_RAYS) &&
        isFiniteNumber(msg.reward) &&
        isNumberArray(msg.green_dot, 2) &&
        typeof msg.recording === "boolean" &&
        isFiniteNumber(msg.sample_count)
      ) {
        return msg as unknown as StateFrame;
      }
      return null;
    case "role":
      return typeof msg.granted === "boolean" ? (msg as unknown as RoleMessage) : null;
    case "session_saved":
      return typeof msg.path === "string" && isFiniteNumber(msg.count)
        ? (msg as unknown as SessionSavedMessage)
        : null;
    case "error":
      return typeof msg.code === "string" ? (msg as unknown as ErrorMessage) : null;
    default:
      return null;
  }
}

export function helloMessage(role: "driver" | "viewer"): string {
  return JSON.stringify({ type: "hello", role });
}

export function actionMessage(action: ActionCommand): string {
  return JSON.stringify({ type: "action", speed: action.speed, steer: action.steer });
}

export function recordMessage(on: boolean): string {
  return JSON.stringify({ type: "record", on });
}
