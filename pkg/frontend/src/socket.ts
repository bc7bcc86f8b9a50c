/**
 * Reconnecting WebSocket session with data-age tracking.
 *
 * The state stream is the heartbeat: if nothing arrives for staleMs while
 * the socket looks open, the session reports "disconnected" so the UI never
 * renders silently stale data. Reconnects use exponential backoff and the
 * session survives service restarts without a page reload.
 */

import { Ack, Command, RobotState, parseAck, parseState } from "./schema.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface SocketHandlers {
  onState?: (state: RobotState) => void;
  onAck?: (ack: Ack) => void;
  onStatus?: (status: ConnectionStatus) => void;
  onSend?: (command: Command) => void;
}

/** Subset of the browser WebSocket API the session needs; injectable for tests. */
export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export interface SocketOptions {
  backoffMinMs?: number;
  backoffMaxMs?: number;
  staleMs?: number;
  wsFactory?: WsFactory;
  now?: () => number;
}

const defaultFactory: WsFactory = (url) =>
  new (globalThis as unknown as { WebSocket: new (url: string) => WsLike }).WebSocket(url);

export class TeleopSocket {
  readonly url: string;
  private handlers: SocketHandlers;
  private ws: WsLike | null = null;
  private backoffMs: number;
  private readonly backoffMinMs: number;
  private readonly backoffMaxMs: number;
  private readonly staleMs: number;
  private readonly wsFactory: WsFactory;
  private readonly now: () => number;
  private lastStateAt: number | null = null;
  private watchdog: ReturnType<typeof setInterval> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;
  private status: ConnectionStatus = "disconnected";

  constructor(url: string, handlers: SocketHandlers = {}, options: SocketOptions = {}) {
    this.url = url;
    this.handlers = handlers;
    this.backoffMinMs = options.backoffMinMs ?? 250;
    this.backoffMaxMs = options.backoffMaxMs ?? 5000;
    this.staleMs = options.staleMs ?? 2000;
    this.wsFactory = options.wsFactory ?? defaultFactory;
    this.now = options.now ?? (() => Date.now());
    this.backoffMs = this.backoffMinMs;
  }

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    this.setStatus("connecting");
    let ws: WsLike;
    try {
      ws = this.wsFactory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = this.backoffMinMs;
      this.setStatus("connected");
      this.startWatchdog();
    };
    ws.onmessage = (ev) => this.handleMessage(ev.data);
    ws.onerror = () => {
      /* onclose follows */
    };
    ws.onclose = () => {
      this.ws = null;
      this.stopWatchdog();
      if (!this.closed) {
        this.setStatus("disconnected");
        this.scheduleReconnect();
      }
    };
  }

  private handleMessage(data: unknown): void {
    if (typeof data !== "string") return;
    let raw: unknown;
    try {
      raw = JSON.parse(data);
    } catch {
      return;
    }
    const state = parseState(raw);
    if (state) {
      this.lastStateAt = this.now();
      if (this.status !== "connected") this.setStatus("connected");
      this.handlers.onState?.(state);
      return;
    }
    const ack = parseAck(raw);
    if (ack) this.handlers.onAck?.(ack);
  }

  /** Milliseconds since the newest state frame; null before the first one. */
  ageMs(): number | null {
    return this.lastStateAt === null ? null : this.now() - this.lastStateAt;
  }

  currentStatus(): ConnectionStatus {
    return this.status;
  }

  send(command: Command): boolean {
    if (this.ws === null || this.status !== "connected") return false;
    try {
      this.ws.send(JSON.stringify(command));
    } catch {
      return false;
    }
    this.handlers.onSend?.(command);
    return true;
  }

  close(): void {
    this.closed = true;
    this.stopWatchdog();
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.ws?.close();
    this.ws = null;
    this.setStatus("disconnected");
  }

  private scheduleReconnect(): void {
    if (this.closed || this.reconnectTimer !== null) return;
    const delay = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, this.backoffMaxMs);
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      if (!this.closed) this.open();
    }, delay);
  }

  private startWatchdog(): void {
    this.stopWatchdog();
    this.watchdog = setInterval(() => {
      const age = this.ageMs();
      if (age !== null && age > this.staleMs && this.status === "connected") {
        // The stream is the heartbeat; silence means the service is gone.
        this.setStatus("disconnected");
      }
    }, Math.max(100, this.staleMs / 4));
  }

  private stopWatchdog(): void {
    if (this.watchdog !== null) {
      clearInterval(this.watchdog);
      this.watchdog = null;
    }
  }

  private setStatus(status: ConnectionStatus): void {
    if (status === this.status) return;
    this.status = status;
    this.handlers.onStatus?.(status);
  }
}
