"""Shared-control teleoperation service.

A ``TeleopSession`` owns the simulated world and advances it one control
period at a time; all operator input lands in latest-wins mailboxes that the
next ``tick`` consumes.  The session is deterministic: given the same
sequence of ``tick``/mailbox calls it reproduces the same trajectory, and the
websocket layer only paces it against the wall clock.

Operator twists expire: if no fresh twist arrived within ``HIL_TIMEOUT``
seconds of session time the operator contribution is zeroed, so a dropped
connection degrades to autonomous servoing instead of replaying a stale
command forever.

Websocket protocol (one JSON object per frame):

* client -> server: ``{"type": "hil", "twist": [6 floats]}``,
  ``{"type": "set_param", "name": str, "value": number|str}``,
  ``{"type": "toggle_cbf", "enabled": bool}``, ``{"type": "reset"}``
* server -> client: ``{"type": "snapshot", ...}`` at the control rate, and
  ``{"type": "error", "reason": str}`` for rejected frames.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .barriers import barrier_values
from .sim import Controller, ScenarioConfig, WorldState, observe, observe_estimated, step
from .se3 import rotation_to_vector

HIL_TIMEOUT = 0.5

_NUMERIC_PARAMS = {
    "sigma": ("sigma", lambda v: v >= 0.0, "must be non-negative"),
    "alpha_gain": ("alpha_gain", lambda v: v > 0.0, "must be positive"),
    "zeta": ("zeta", lambda v: v >= 0.0, "must be non-negative"),
    "v_max": ("v_max", lambda v: v > 0.0, "must be positive"),
    "w_max": ("w_max", lambda v: v > 0.0, "must be positive"),
}


class TeleopSession:
    """Deterministic single-operator control session."""

    def __init__(self, cfg: ScenarioConfig, rate_hz: float = 50.0):
        if rate_hz <= 0.0:
            raise ValueError("rate_hz must be positive")
        self.cfg = cfg
        self.dt = 1.0 / rate_hz
        self.t = 0.0
        self.state = WorldState(0.0, cfg.initial_pose)
        self.controller = Controller(cfg)
        self._hil_twist = np.zeros(6)
        self._hil_time = -np.inf
        self._last = None  # snapshot dict from the most recent tick

    # -- mailboxes ---------------------------------------------------------

    def set_hil(self, twist) -> None:
        arr = np.asarray(twist, dtype=float)
        if arr.shape != (6,) or not np.all(np.isfinite(arr)):
            raise ValueError("hil twist must be 6 finite numbers")
        self._hil_twist = arr
        self._hil_time = self.t

    def set_param(self, name: str, value) -> None:
        if name == "beta_max" or name == "h_safe":
            hil = replace(self.cfg.hil, **{name: float(value)})
            self.cfg = replace(self.cfg, hil=hil)
        elif name == "robust_mode":
            if value not in ("off", "frame_shift_only", "full_theta"):
                raise ValueError(f"robust_mode: unknown mode {value!r}")
            self.cfg = replace(self.cfg, robust_mode=str(value))
        elif name in _NUMERIC_PARAMS:
            attr, ok, why = _NUMERIC_PARAMS[name]
            v = float(value)
            if not ok(v):
                raise ValueError(f"{name}: {why}")
            self.cfg = replace(self.cfg, **{attr: v})
        else:
            raise ValueError(f"unknown parameter {name!r}")
        self.controller = Controller(self.cfg)

    def toggle_cbf(self, enabled: bool) -> None:
        self.cfg = replace(self.cfg, cbf_enabled=bool(enabled))
        self.controller = Controller(self.cfg)

    def reset(self) -> None:
        self.t = 0.0
        self.state = WorldState(0.0, self.cfg.initial_pose)
        self._hil_twist = np.zeros(6)
        self._hil_time = -np.inf
        self._last = None

    # -- control -----------------------------------------------------------

    def tick(self, dt: float | None = None) -> dict:
        """Advance one control period and return the state snapshot."""
        dt = self.dt if dt is None else float(dt)
        stale = (self.t - self._hil_time) > HIL_TIMEOUT
        u_hil = np.zeros(6) if stale else self._hil_twist

        est = observe_estimated(self.state, self.cfg)
        detection_ok = observe(self.state, self.cfg) is not None
        u, info = self.controller.compute(est, u_hil)
        if not detection_ok:
            u = np.zeros(6)

        est_state = barrier_values(self.cfg.camera, est, self.cfg.zeta)
        if np.all(est.corners[:, 2] > 0.0):
            corners_px = self.cfg.camera.project(est.corners)
        else:
            corners_px = np.full((4, 2), np.nan)

        self.state = step(self.state, u, dt)
        self.t += dt
        pose = self.state.ee_pose
        self._last = {
            "type": "snapshot",
            "t": self.t,
            "corners_px": [[float(x) for x in row] for row in corners_px],
            "h": [float(x) for x in est_state.h.reshape(-1)],
            "h_z": float(est_state.h_z),
            "beta": float(info["beta"]),
            "u": [float(x) for x in u],
            "u_nom": [float(x) for x in info["u_nom"]],
            "ee_pose": {
                "rotvec": [float(x) for x in rotation_to_vector(pose.rotation)],
                "translation": [float(x) for x in pose.translation],
            },
            "cbf_enabled": self.cfg.cbf_enabled,
            "robust_mode": self.cfg.robust_mode,
            "detection_ok": detection_ok,
        }
        return self._last


def _handle_frame(session: TeleopSession, frame: dict) -> str | None:
    """Apply one client frame to the session; returns an error reason or None."""
    kind = frame.get("type")
    if kind == "hil":
        try:
            session.set_hil(frame.get("twist"))
        except (ValueError, TypeError) as exc:
            return str(exc)
    elif kind == "set_param":
        try:
            session.set_param(frame.get("name", ""), frame.get("value"))
        except (ValueError, TypeError) as exc:
            return str(exc)
    elif kind == "toggle_cbf":
        enabled = frame.get("enabled")
        if not isinstance(enabled, bool):
            return "toggle_cbf: enabled must be a boolean"
        session.toggle_cbf(enabled)
    elif kind == "reset":
        session.reset()
    else:
        return f"unknown frame type {kind!r}"
    return None


def create_app(cfg: ScenarioConfig, rate_hz: float = 50.0):
    """Build the FastAPI application serving the websocket control loop."""
    app = FastAPI(title="fovsafe teleop")
    session = TeleopSession(cfg, rate_hz=rate_hz)
    app.state.session = session

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "t": session.t}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()

        async def reader():
            while True:
                raw = await ws.receive_text()
                try:
                    frame = json.loads(raw)
                    if not isinstance(frame, dict):
                        raise ValueError
                except ValueError:
                    await ws.send_json({"type": "error", "reason": "invalid json frame"})
                    continue
                reason = _handle_frame(session, frame)
                if reason is not None:
                    await ws.send_json({"type": "error", "reason": reason})

        async def ticker():
            while True:
                snapshot = session.tick()
                await ws.send_json(snapshot)
                await asyncio.sleep(session.dt)

        reader_task = asyncio.create_task(reader())
        ticker_task = asyncio.create_task(ticker())
        try:
            done, pending = await asyncio.wait(
                {reader_task, ticker_task}, return_when=asyncio.FIRST_EXCEPTION
            )
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, WebSocketDisconnect):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            reader_task.cancel()
            ticker_task.cancel()

    dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if dist.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(dist), html=True), name="ui")

    return app
