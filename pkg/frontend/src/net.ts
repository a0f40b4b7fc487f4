// Websocket session with reconnect backoff. Malformed frames are dropped
// with a console diagnostic; the caller sees only valid snapshots.

import { CommandMessage, parseSnapshot, SnapshotMessage } from "./types.js";

export interface Session {
  send(cmd: CommandMessage): void;
  close(): void;
}

export interface SessionHooks {
  onSnapshot(snap: SnapshotMessage): void;
  onState(state: "connecting" | "open" | "closed"): void;
}

export function connect(url: string, hooks: SessionHooks): Session {
  let ws: WebSocket | null = null;
  let closed = false;
  let retryMs = 500;

  const open = () => {
    hooks.onState("connecting");
    ws = new WebSocket(url);
    ws.onopen = () => {
      retryMs = 500;
      hooks.onState("open");
    };
    ws.onmessage = (ev: MessageEvent) => {
      const snap = parseSnapshot(String(ev.data));
      if (snap) {
        hooks.onSnapshot(snap);
      } else {
        console.debug("dropped non-snapshot frame", ev.data);
      }
    };
    ws.onclose = () => {
      hooks.onState("closed");
      if (!closed) {
        setTimeout(open, retryMs);
        retryMs = Math.min(retryMs * 2, 8000);
      }
    };
    ws.onerror = () => {
      // onclose drives the retry loop
    };
  };

  open();
  return {
    send(cmd: CommandMessage) {
      if (ws && ws.readyState === WebSocket.OPEN) {
        ws.send(JSON.stringify(cmd));
      }
    },
    close() {
      closed = true;
      ws?.close();
    },
  };
}
