/** Driver input mapping.
 *
 * Keys are binary, so the speed command ramps: full ramp [0, V_MAX] in one
 * second up or down (and decays to zero with nothing pressed). Steering from
 * keys is a direct full-rate command; a gamepad left stick maps both axes
 * linearly. Pure functions over an explicit state so the mapping is unit
 * testable without a browser.
 */

import { ActionCommand, OMEGA_MAX, V_MAX } from "./protocol.js";

export const SPEED_RAMP_PER_S = V_MAX; // reaches V_MAX in 1 s

export interface KeyState {
  up: boolean;
  down: boolean;
  left: boolean;
  right: boolean;
}

export const KEY_BINDINGS: Record<string, keyof KeyState> = {
  ArrowUp: "up",
  ArrowDown: "down",
  ArrowLeft: "left",
  ArrowRight: "right",
  KeyW: "up",
  KeyS: "down",
  KeyA: "left",
  KeyD: "right",
};

export function emptyKeyState(): KeyState {
  return { up: false, down: false, left: false, right: false };
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

/** Advance the ramped speed by dtSeconds of held keys. Up ramps toward
 * V_MAX, down ramps toward 0, neither decays toward 0. */
export function rampSpeed(speed: number, keys: KeyState, dtSeconds: number): number {
  const delta = SPEED_RAMP_PER_S * dtSeconds;
  if (keys.up && !keys.down) return clamp(speed + delta, 0, V_MAX);
  return clamp(speed - delta, 0, V_MAX);
}

/** Steering from keys: left is positive turn rate (counter-clockwise). */
export function keySteer(keys: KeyState): number {
  let steer = 0;
  if (keys.left) steer += OMEGA_MAX;
  if (keys.right) steer -= OMEGA_MAX;
  return steer;
}

export function keyboardAction(speed: number, keys: KeyState): ActionCommand {
  return { speed, steer: keySteer(keys) };
}

/** Gamepad left stick: axis 1 (up negative) → speed, axis 0 → steer.
 * Small deadzone so a centered stick commands exactly zero. */
export const GAMEPAD_DEADZONE = 0.1;

export function gamepadAction(axis0: number, axis1: number): ActionCommand {
  const dz = (v: number) => (Math.abs(v) < GAMEPAD_DEADZONE ? 0 : v);
  const forward = clamp(dz(-axis1), 0, 1); // stick up drives forward
  const turn = clamp(dz(-axis0), -1, 1); // stick left turns left (+ω)
  return { speed: forward * V_MAX, steer: turn * OMEGA_MAX };
}
