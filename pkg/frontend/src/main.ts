// Wiring: DOM, websocket, input capture, command loop, render loop.

import {
  COMMAND_PERIOD_MS,
  axesToTwist,
  createInput,
  createSender,
  currentAxes,
  keyDown,
  keyUp,
  senderStep,
  setJoystick,
} from "./input.js";
import { connect } from "./net.js";
import { DEFAULT_GEOMETRY, drawBars, drawGauge, drawImagePlane } from "./render.js";
import {
  createViewModel,
  onConnectionChange,
  onServerFrame,
  panelFrames,
} from "./viewmodel.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
};

const imageCanvas = $<HTMLCanvasElement>("image-plane");
const barsCanvas = $<HTMLCanvasElement>("barrier-bars");
const gaugeCanvas = $<HTMLCanvasElement>("beta-gauge");
const statusLine = $<HTMLSpanElement>("status-line");
const errorLine = $<HTMLSpanElement>("error-line");

const vm = createViewModel();
const input = createInput();
const sender = createSender();

// ---- network ----
const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const link = connect(wsUrl, {
  onFrame: (frame) => onServerFrame(vm, frame, performance.now()),
  onOpen: () => onConnectionChange(vm, "open"),
  onClose: () => onConnectionChange(vm, "closed"),
});

// ---- keyboard ----
window.addEventListener("keydown", (ev) => {
  if (keyDown(input, ev.code)) {
    ev.preventDefault();
  }
});
window.addEventListener("keyup", (ev) => {
  if (keyUp(input, ev.code)) {
    ev.preventDefault();
  }
});
window.addEventListener("blur", () => {
  input.pressed.clear();
  setJoystick(input, 0, 0);
});

// ---- virtual joystick (strafe axes, for touch) ----
const pad = $<HTMLDivElement>("joystick");
const knob = $<HTMLDivElement>("joystick-knob");
let padPointer: number | null = null;

function padAxes(ev: PointerEvent): [number, number] {
  const r = pad.getBoundingClientRect();
  const x = ((ev.clientX - r.left) / r.width) * 2 - 1;
  const y = ((ev.clientY - r.top) / r.height) * 2 - 1;
  return [Math.min(1, Math.max(-1, x)), Math.min(1, Math.max(-1, y))];
}

function moveKnob(x: number, y: number) {
  knob.style.left = `${50 + x * 35}%`;
  knob.style.top = `${50 + y * 35}%`;
}

pad.addEventListener("pointerdown", (ev) => {
  padPointer = ev.pointerId;
  pad.setPointerCapture(ev.pointerId);
  const [x, y] = padAxes(ev);
  setJoystick(input, x, y);
  moveKnob(x, y);
});
pad.addEventListener("pointermove", (ev) => {
  if (ev.pointerId === padPointer) {
    const [x, y] = padAxes(ev);
    setJoystick(input, x, y);
    moveKnob(x, y);
  }
});
const padRelease = (ev: PointerEvent) => {
  if (ev.pointerId === padPointer) {
    padPointer = null;
    setJoystick(input, 0, 0);
    moveKnob(0, 0);
  }
};
pad.addEventListener("pointerup", padRelease);
pad.addEventListener("pointercancel", padRelease);

// ---- command loop: 20 Hz while active, one zero frame on release ----
const vMaxInput = $<HTMLInputElement>("v-max");
const wMaxInput = $<HTMLInputElement>("w-max");
setInterval(() => {
  const twist = axesToTwist(
    currentAxes(input),
    Number(vMaxInput.value),
    Number(wMaxInput.value),
  );
  const frame = senderStep(sender, twist);
  if (frame !== null) {
    link.send(frame);
  }
}, COMMAND_PERIOD_MS);

// ---- parameter panel ----
const panelInputs = {
  sigma: $<HTMLInputElement>("sigma"),
  alpha_gain: $<HTMLInputElement>("alpha-gain"),
  beta_max: $<HTMLInputElement>("beta-max"),
  h_safe: $<HTMLInputElement>("h-safe"),
  robust_mode: $<HTMLSelectElement>("robust-mode"),
  cbf_enabled: $<HTMLInputElement>("cbf-enabled"),
};

function readPanel() {
  return {
    sigma: Number(panelInputs.sigma.value),
    alpha_gain: Number(panelInputs.alpha_gain.value),
    beta_max: Number(panelInputs.beta_max.value),
    h_safe: Number(panelInputs.h_safe.value),
    robust_mode: panelInputs.robust_mode.value,
    cbf_enabled: panelInputs.cbf_enabled.checked,
  };
}

function initPanel() {
  panelInputs.sigma.value = String(vm.panel.sigma);
  panelInputs.alpha_gain.value = String(vm.panel.alpha_gain);
  panelInputs.beta_max.value = String(vm.panel.beta_max);
  panelInputs.h_safe.value = String(vm.panel.h_safe);
  panelInputs.robust_mode.value = vm.panel.robust_mode;
  panelInputs.cbf_enabled.checked = vm.panel.cbf_enabled;
}
initPanel();

function pushPanel() {
  const next = readPanel();
  for (const frame of panelFrames(vm.panel, next)) {
    link.send(frame);
  }
  vm.panel = next;
}
for (const el of Object.values(panelInputs)) {
  el.addEventListener("change", pushPanel);
}

$<HTMLButtonElement>("reset").addEventListener("click", () => {
  link.send({ type: "reset" });
});

// ---- render loop ----
const imageCtx = imageCanvas.getContext("2d")!;
const barsCtx = barsCanvas.getContext("2d")!;
const gaugeCtx = gaugeCanvas.getContext("2d")!;

function paint() {
  const now = performance.now();
  drawImagePlane(imageCtx, vm, DEFAULT_GEOMETRY, now);
  if (vm.snapshot !== null) {
    drawBars(barsCtx, vm.snapshot, vm.panel.h_safe);
    drawGauge(gaugeCtx, vm.snapshot, vm.panel.beta_max);
    statusLine.textContent =
      `t = ${vm.snapshot.t.toFixed(2)} s | ` +
      `robust: ${vm.snapshot.robust_mode} | ` +
      `filter: ${vm.snapshot.cbf_enabled ? "on" : "off"} | ` +
      `detection: ${vm.snapshot.detection_ok ? "ok" : "LOST"}`;
  }
  errorLine.textContent = vm.lastError ?? "";
  requestAnimationFrame(paint);
}
requestAnimationFrame(paint);
