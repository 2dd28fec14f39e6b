import { Snapshot } from "../src/protocol.js";

/** A well-formed snapshot in the safe interior (all margins above 0.1). */
export function sampleSnapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    type: "snapshot",
    t: 1.25,
    corners_px: [
      [300, 220],
      [300, 260],
      [340, 260],
      [340, 220],
    ],
    h: Array.from({ length: 16 }, (_, i) => 0.3 + 0.01 * i),
    h_z: 0.4,
    beta: 0.8,
    u: [0.1, 0, 0, 0, 0, 0],
    u_nom: [0.1, 0, 0, 0, 0, 0],
    ee_pose: { rotvec: [3.14, 0, 0], translation: [0.1, -0.08, 0.6] },
    cbf_enabled: true,
    robust_mode: "full_theta",
    detection_ok: true,
    ...overrides,
  };
}
