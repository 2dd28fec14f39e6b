// Wire types for the teleoperation websocket: one JSON object per frame.
// The server publishes snapshots at the control rate and error frames for
// rejected input; the client sends twists, parameter changes and toggles.

export interface Snapshot {
  type: "snapshot";
  t: number;
  corners_px: number[][]; // 4 x [u, v], marker corners on the image plane
  h: number[]; // 16 corner-visibility barrier values
  h_z: number; // standoff barrier value
  beta: number; // operator authority in [0, beta_max]
  u: number[]; // applied twist (after blend + filter)
  u_nom: number[]; // blended twist before the filter
  ee_pose: { rotvec: number[]; translation: number[] };
  cbf_enabled: boolean;
  robust_mode: string;
  detection_ok: boolean;
}

export interface ErrorFrame {
  type: "error";
  reason: string;
}

export type ServerFrame = Snapshot | ErrorFrame;

export type ClientFrame =
  | { type: "hil"; twist: number[] }
  | { type: "set_param"; name: string; value: number | string }
  | { type: "toggle_cbf"; enabled: boolean }
  | { type: "reset" };

function finiteNumbers(x: unknown, n: number): x is number[] {
  return Array.isArray(x) && x.length === n && x.every((v) => Number.isFinite(v));
}

/** Parse one incoming frame; returns null for anything malformed. */
export function parseServerFrame(raw: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) {
    return null;
  }
  const frame = data as Record<string, unknown>;
  if (frame.type === "error" && typeof frame.reason === "string") {
    return { type: "error", reason: frame.reason };
  }
  if (frame.type !== "snapshot") {
    return null;
  }
  const corners = frame.corners_px;
  const pose = frame.ee_pose as Record<string, unknown> | undefined;
  const ok =
    Number.isFinite(frame.t) &&
    Array.isArray(corners) &&
    corners.length === 4 &&
    corners.every((c) => finiteNumbers(c, 2)) &&
    finiteNumbers(frame.h, 16) &&
    Number.isFinite(frame.h_z) &&
    Number.isFinite(frame.beta) &&
    finiteNumbers(frame.u, 6) &&
    finiteNumbers(frame.u_nom, 6) &&
    typeof pose === "object" &&
    pose !== null &&
    finiteNumbers(pose.rotvec, 3) &&
    finiteNumbers(pose.translation, 3) &&
    typeof frame.cbf_enabled === "boolean" &&
    typeof frame.robust_mode === "string" &&
    typeof frame.detection_ok === "boolean";
  return ok ? (frame as unknown as Snapshot) : null;
}
