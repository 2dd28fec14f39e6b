// Single view model shared by the socket callbacks (writers) and the
// animation-frame renderer (reader).  The UI never simulates anything: every
// pixel is derived from the latest snapshot, so killing or corrupting the UI
// cannot affect safety (enforcement is entirely server-side).

import { ServerFrame, Snapshot } from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";
export type BarLevel = "safe" | "warn" | "danger";

/** Values the operator can edit; mirrors the server's scenario defaults. */
export interface PanelValues {
  sigma: number;
  alpha_gain: number;
  beta_max: number;
  h_safe: number;
  robust_mode: string;
  cbf_enabled: boolean;
}

export const DEFAULT_PANEL: PanelValues = {
  sigma: 0.8,
  alpha_gain: 2.0,
  beta_max: 0.8,
  h_safe: 0.1,
  robust_mode: "off",
  cbf_enabled: true,
};

/** A snapshot older than this (no replacement arrived) grays the view. */
export const STALE_AFTER_MS = 500;
/** Points kept per corner trail (~2.4 s at the 50 Hz snapshot rate). */
export const TRAIL_LENGTH = 120;

export interface ViewModel {
  connection: Connection;
  snapshot: Snapshot | null;
  receivedAtMs: number;
  lastError: string | null;
  trails: number[][][]; // per corner: list of [u, v] pixels, newest last
  panel: PanelValues;
}

export function createViewModel(): ViewModel {
  return {
    connection: "connecting",
    snapshot: null,
    receivedAtMs: 0,
    lastError: null,
    trails: [[], [], [], []],
    panel: { ...DEFAULT_PANEL },
  };
}

export function onServerFrame(vm: ViewModel, frame: ServerFrame, nowMs: number): void {
  if (frame.type === "error") {
    vm.lastError = frame.reason;
    return;
  }
  vm.snapshot = frame;
  vm.receivedAtMs = nowMs;
  for (let i = 0; i < 4; i++) {
    const trail = vm.trails[i];
    trail.push(frame.corners_px[i]);
    if (trail.length > TRAIL_LENGTH) {
      trail.splice(0, trail.length - TRAIL_LENGTH);
    }
  }
}

export function onConnectionChange(vm: ViewModel, connection: Connection): void {
  vm.connection = connection;
  if (connection !== "open") {
    vm.trails = [[], [], [], []];
  }
}

export function isStale(vm: ViewModel, nowMs: number): boolean {
  return vm.snapshot === null || nowMs - vm.receivedAtMs > STALE_AFTER_MS;
}

/** The one banner worth showing right now, most urgent first. */
export function banner(vm: ViewModel, nowMs: number): string | null {
  if (vm.connection !== "open") {
    return "reconnecting…";
  }
  if (vm.snapshot !== null && !vm.snapshot.detection_ok) {
    return "marker detection lost";
  }
  if (isStale(vm, nowMs)) {
    return "stale data";
  }
  return null;
}

/** Classify the 17 barrier values (16 corner margins then the standoff). */
export function barLevels(snapshot: Snapshot, hSafe: number): BarLevel[] {
  const classify = (h: number): BarLevel =>
    h < 0 ? "danger" : h < hSafe ? "warn" : "safe";
  return [...snapshot.h.map(classify), classify(snapshot.h_z)];
}

/** Fraction of the authority gauge to fill, in [0, 1]. */
export function gaugeFraction(snapshot: Snapshot, betaMax: number): number {
  if (betaMax <= 0) {
    return 0;
  }
  return Math.min(1, Math.max(0, snapshot.beta / betaMax));
}

/** Frames needed to move the server from one panel state to another. */
export function panelFrames(before: PanelValues, after: PanelValues) {
  const frames: import("./protocol.js").ClientFrame[] = [];
  for (const name of ["sigma", "alpha_gain", "beta_max", "h_safe"] as const) {
    if (after[name] !== before[name]) {
      frames.push({ type: "set_param", name, value: after[name] });
    }
  }
  if (after.robust_mode !== before.robust_mode) {
    frames.push({ type: "set_param", name: "robust_mode", value: after.robust_mode });
  }
  if (after.cbf_enabled !== before.cbf_enabled) {
    frames.push({ type: "toggle_cbf", enabled: after.cbf_enabled });
  }
  return frames;
}
