// WebSocket lifecycle with capped-backoff reconnect.  Kept deliberately thin:
// all interpretation happens in protocol.ts / viewmodel.ts.

import { ClientFrame, parseServerFrame, ServerFrame } from "./protocol.js";

export interface NetHandlers {
  onFrame: (frame: ServerFrame) => void;
  onOpen: () => void;
  onClose: () => void;
}

export interface NetLink {
  send: (frame: ClientFrame) => void;
  close: () => void;
}

export function connect(url: string, handlers: NetHandlers): NetLink {
  let ws: WebSocket | null = null;
  let closed = false;
  let retryMs = 500;

  const open = () => {
    ws = new WebSocket(url);
    ws.onopen = () => {
      retryMs = 500;
      handlers.onOpen();
    };
    ws.onmessage = (ev) => {
      const frame = parseServerFrame(String(ev.data));
      if (frame !== null) {
        handlers.onFrame(frame);
      }
    };
    ws.onclose = () => {
      handlers.onClose();
      if (!closed) {
        setTimeout(open, retryMs);
        retryMs = Math.min(retryMs * 2, 8000);
      }
    };
    ws.onerror = () => {
      // onclose follows and owns the retry
    };
  };

  open();

  return {
    send: (frame) => {
      if (ws !== null && ws.readyState === WebSocket.OPEN) {
        ws.send(JSON.stringify(frame));
      }
    },
    close: () => {
      closed = true;
      ws?.close();
    },
  };
}
