// Canvas drawing.  Everything here is a pure function of the view model; the
// pure geometry helpers are exported for tests, the ctx-taking functions are
// exercised in the browser.

import { Snapshot } from "./protocol.js";
import { BarLevel, ViewModel, banner, barLevels, gaugeFraction } from "./viewmodel.js";

/**
 * Display geometry for the default scenario camera.  The tightened rectangle
 * is the robustified corner set the server library computes for the default
 * 2 cm / 5 degree error bounds; it is drawn for orientation only — the server
 * enforces the real constraints whatever is painted here.
 */
export interface SensorGeometry {
  width: number;
  length: number;
  tightened: number[][]; // 4 x [u, v]
}

export const DEFAULT_GEOMETRY: SensorGeometry = {
  width: 640,
  length: 480,
  tightened: [
    [83.7, 62.8],
    [83.7, 417.2],
    [556.3, 417.2],
    [556.3, 62.8],
  ],
};

const COLORS: Record<BarLevel, string> = {
  safe: "#2e7d32",
  warn: "#ff8f00",
  danger: "#c62828",
};

/** Letterboxed sensor-to-canvas transform (uniform scale, centered). */
export function sensorToCanvas(
  pt: number[],
  geom: SensorGeometry,
  canvasW: number,
  canvasH: number,
): [number, number] {
  const scale = Math.min(canvasW / geom.width, canvasH / geom.length);
  const ox = (canvasW - scale * geom.width) / 2;
  const oy = (canvasH - scale * geom.length) / 2;
  return [ox + scale * pt[0], oy + scale * pt[1]];
}

/** Left/top/width/height of bar i out of n in a panel of w x h. */
export function barRect(
  i: number,
  n: number,
  w: number,
  h: number,
): [number, number, number, number] {
  const gap = 4;
  const barW = (w - gap * (n + 1)) / n;
  return [gap + i * (barW + gap), 0, barW, h];
}

function polyline(ctx: CanvasRenderingContext2D, pts: [number, number][], close: boolean) {
  ctx.beginPath();
  ctx.moveTo(pts[0][0], pts[0][1]);
  for (const [x, y] of pts.slice(1)) {
    ctx.lineTo(x, y);
  }
  if (close) {
    ctx.closePath();
  }
  ctx.stroke();
}

export function drawImagePlane(
  ctx: CanvasRenderingContext2D,
  vm: ViewModel,
  geom: SensorGeometry,
  nowMs: number,
): void {
  const { width: cw, height: ch } = ctx.canvas;
  ctx.clearRect(0, 0, cw, ch);
  ctx.save();

  const grayed = vm.connection !== "open" || vm.snapshot === null;
  ctx.globalAlpha = grayed ? 0.35 : 1.0;

  const toCanvas = (p: number[]) => sensorToCanvas(p, geom, cw, ch);

  // sensor rectangle
  ctx.strokeStyle = "#90a4ae";
  ctx.lineWidth = 2;
  polyline(
    ctx,
    [
      toCanvas([0, 0]),
      toCanvas([0, geom.length]),
      toCanvas([geom.width, geom.length]),
      toCanvas([geom.width, 0]),
    ],
    true,
  );

  const snap = vm.snapshot;
  if (snap !== null) {
    // tightened rectangle, only meaningful when robustification is on
    if (snap.robust_mode !== "off") {
      ctx.strokeStyle = "#26a69a";
      ctx.setLineDash([6, 4]);
      polyline(ctx, geom.tightened.map(toCanvas) as [number, number][], true);
      ctx.setLineDash([]);
    }

    // corner trails then current corners
    ctx.strokeStyle = "#b0bec5";
    ctx.lineWidth = 1;
    for (const trail of vm.trails) {
      if (trail.length > 1) {
        polyline(ctx, trail.map(toCanvas) as [number, number][], false);
      }
    }
    ctx.fillStyle = snap.detection_ok ? "#1565c0" : COLORS.danger;
    for (const corner of snap.corners_px) {
      const [x, y] = toCanvas(corner);
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.fill();
    }
    // marker outline
    ctx.strokeStyle = ctx.fillStyle;
    polyline(ctx, snap.corners_px.map(toCanvas) as [number, number][], true);
  }
  ctx.restore();

  const note = banner(vm, nowMs);
  if (note !== null) {
    ctx.save();
    ctx.fillStyle = note === "marker detection lost" ? COLORS.danger : "#37474f";
    ctx.globalAlpha = 0.9;
    ctx.fillRect(0, 0, cw, 34);
    ctx.fillStyle = "#ffffff";
    ctx.font = "16px system-ui, sans-serif";
    ctx.textBaseline = "middle";
    ctx.fillText(note, 12, 17);
    ctx.restore();
  }
}

export function drawBars(
  ctx: CanvasRenderingContext2D,
  snapshot: Snapshot,
  hSafe: number,
): void {
  const { width: cw, height: ch } = ctx.canvas;
  ctx.clearRect(0, 0, cw, ch);
  const values = [...snapshot.h, snapshot.h_z];
  const levels = barLevels(snapshot, hSafe);
  const top = 8;
  const plotH = ch - top - 18;
  const vMax = Math.max(2 * hSafe, ...values, 1e-6);

  for (let i = 0; i < values.length; i++) {
    const [x, , w] = barRect(i, values.length, cw, plotH);
    const frac = Math.min(1, Math.max(0, values[i] / vMax));
    ctx.fillStyle = COLORS[levels[i]];
    ctx.fillRect(x, top + plotH * (1 - frac), w, plotH * frac);
  }

  // threshold line at h_safe
  const yThresh = top + plotH * (1 - Math.min(1, hSafe / vMax));
  ctx.strokeStyle = "#607d8b";
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.moveTo(0, yThresh);
  ctx.lineTo(cw, yThresh);
  ctx.stroke();
  ctx.setLineDash([]);

  ctx.fillStyle = "#607d8b";
  ctx.font = "11px system-ui, sans-serif";
  ctx.textBaseline = "top";
  ctx.fillText("h00 … h33, hz   (dashed line: h_safe)", 4, ch - 14);
}

export function drawGauge(
  ctx: CanvasRenderingContext2D,
  snapshot: Snapshot,
  betaMax: number,
): void {
  const { width: cw, height: ch } = ctx.canvas;
  ctx.clearRect(0, 0, cw, ch);
  const frac = gaugeFraction(snapshot, betaMax);
  ctx.fillStyle = "#eceff1";
  ctx.fillRect(0, 0, cw, ch);
  ctx.fillStyle = frac > 0.5 ? COLORS.safe : frac > 0 ? COLORS.warn : COLORS.danger;
  ctx.fillRect(0, 0, cw * frac, ch);
  ctx.fillStyle = "#263238";
  ctx.font = "13px system-ui, sans-serif";
  ctx.textBaseline = "middle";
  ctx.fillText(`beta = ${snapshot.beta.toFixed(3)}`, 8, ch / 2);
}
