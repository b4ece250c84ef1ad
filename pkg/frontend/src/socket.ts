// WebSocket client for the "fedbroker.v1" notification stream.
//
// Handles the auth/subscribe handshake, keeps the caller's cursor, and
// reconnects with `since` after a drop so no change is missed or
// duplicated. A server resync instruction surfaces as a callback; the
// owner re-bootstraps over REST and the stream continues from there.

import type { ChangeFrame, ServerFrame } from "./types";

export interface SocketHandlers {
  onChange: (frame: ChangeFrame) => void;
  onResync: () => void;
  onState?: (state: "connecting" | "open" | "closed") => void;
  // Cursor for reconnects: typically () => store.lastSeq.
  since: () => number | undefined;
}

export interface SocketOptions {
  reconnect?: boolean;
  reconnectDelayMs?: number;
  webSocketImpl?: typeof WebSocket;
}

export class PortalSocket {
  private url: string;
  private token: string;
  private collections: string[] | undefined;
  private handlers: SocketHandlers;
  private options: SocketOptions;
  private ws: WebSocket | null = null;
  private closed = false;

  constructor(
    baseUrl: string,
    token: string,
    collections: string[] | undefined,
    handlers: SocketHandlers,
    options: SocketOptions = {},
  ) {
    this.url = baseUrl.replace(/^http/, "ws").replace(/\/$/, "") + "/api/v1/ws";
    this.token = token;
    this.collections = collections;
    this.handlers = handlers;
    this.options = { reconnect: true, reconnectDelayMs: 500, ...options };
  }

  connect(sinceOverride?: number): void {
    if (this.closed) return;
    const Impl = this.options.webSocketImpl ?? WebSocket;
    this.handlers.onState?.("connecting");
    const ws = new Impl(this.url, ["fedbroker.v1"]);
    this.ws = ws;
    ws.onopen = () => {
      ws.send(JSON.stringify({ action: "auth", token: this.token }));
      const frame: Record<string, unknown> = { action: "subscribe" };
      if (this.collections) frame.collections = this.collections;
      const since = sinceOverride ?? this.handlers.since();
      if (since !== undefined) frame.since = since;
      ws.send(JSON.stringify(frame));
      this.handlers.onState?.("open");
    };
    ws.onmessage = (message: MessageEvent) => {
      let frame: ServerFrame;
      try {
        frame = JSON.parse(String(message.data));
      } catch {
        return;
      }
      if (frame.type === "change") this.handlers.onChange(frame);
      else if (frame.type === "resync") this.handlers.onResync();
      // pings need no answer
    };
    ws.onclose = () => {
      this.handlers.onState?.("closed");
      this.ws = null;
      if (!this.closed && this.options.reconnect) {
        setTimeout(() => this.connect(), this.options.reconnectDelayMs);
      }
    };
    ws.onerror = () => {
      // onclose follows; nothing to do here
    };
  }

  // Drop the connection without disabling reconnection (for tests that
  // force a resume-from-seq cycle).
  drop(): void {
    this.ws?.close();
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
    this.ws = null;
  }
}
