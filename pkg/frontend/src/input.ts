// Keyboard and virtual-joystick state mapped to the six twist axes.
//
// Axes are unitless in [-1, 1] and scaled by the configured maximum twist
// just before sending.  A sender loop emits {type:"hil"} frames at a fixed
// 20 Hz while any axis is nonzero and exactly one zero-twist frame when
// everything is released, so the server-side staleness timeout sees a held
// key as a stream of fresh commands and a release as an explicit stop.

import { ClientFrame } from "./protocol.js";

export const COMMAND_RATE_HZ = 20;
export const COMMAND_PERIOD_MS = 1000 / COMMAND_RATE_HZ;

// twist = [vx, vy, vz, wx, wy, wz] in the end-effector frame
const KEY_AXES: Record<string, [number, number]> = {
  KeyA: [0, -1], // strafe left
  KeyD: [0, +1], // strafe right (toward the right image border)
  KeyW: [1, -1], // marker up in the image
  KeyS: [1, +1], // marker down in the image
  KeyQ: [2, -1], // retreat
  KeyE: [2, +1], // approach
  ArrowUp: [3, -1], // tilt
  ArrowDown: [3, +1],
  ArrowLeft: [4, -1], // pan
  ArrowRight: [4, +1],
  PageUp: [5, +1], // roll
  PageDown: [5, -1],
};

export interface InputState {
  pressed: Set<string>;
  joystick: [number, number]; // maps to the two strafe axes
}

export function createInput(): InputState {
  return { pressed: new Set(), joystick: [0, 0] };
}

/** Returns true when the key is one of ours (caller should preventDefault). */
export function keyDown(state: InputState, code: string): boolean {
  if (!(code in KEY_AXES)) {
    return false;
  }
  state.pressed.add(code);
  return true;
}

export function keyUp(state: InputState, code: string): boolean {
  if (!(code in KEY_AXES)) {
    return false;
  }
  state.pressed.delete(code);
  return true;
}

export function setJoystick(state: InputState, x: number, y: number): void {
  state.joystick = [x, y];
}

const clamp1 = (x: number) => Math.min(1, Math.max(-1, x));

/** Combine keyboard and joystick into the six clamped axes. */
export function currentAxes(state: InputState): number[] {
  const axes = [0, 0, 0, 0, 0, 0];
  for (const code of state.pressed) {
    const [axis, sign] = KEY_AXES[code];
    axes[axis] += sign;
  }
  axes[0] += state.joystick[0];
  axes[1] += state.joystick[1];
  return axes.map(clamp1);
}

/** Scale unit axes by the configured twist limits. */
export function axesToTwist(axes: number[], vMax: number, wMax: number): number[] {
  return axes.map((a, i) => clamp1(a) * (i < 3 ? vMax : wMax));
}

export interface Sender {
  /** True when the previous emission was nonzero (release pending). */
  wasActive: boolean;
}

export function createSender(): Sender {
  return { wasActive: false };
}

/**
 * One emission step: returns the frame to send this period, if any.
 * Call at COMMAND_RATE_HZ.
 */
export function senderStep(sender: Sender, twist: number[]): ClientFrame | null {
  const active = twist.some((x) => x !== 0);
  if (active) {
    sender.wasActive = true;
    return { type: "hil", twist };
  }
  if (sender.wasActive) {
    sender.wasActive = false;
    return { type: "hil", twist: [0, 0, 0, 0, 0, 0] };
  }
  return null;
}
