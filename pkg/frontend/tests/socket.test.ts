import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { TeleopSocket } from "../src/socket.js";
import type { ConnectionStatus, WsLike } from "../src/socket.js";

class FakeWs implements WsLike {
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  sent: string[] = [];
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  serverOpen(): void {
    this.onopen?.();
  }

  serverMessage(obj: unknown): void {
    this.onmessage?.({ data: JSON.stringify(obj) });
  }

  serverDrop(): void {
    this.onclose?.();
  }
}

function makeState(seq: number) {
  return {
    v: 1,
    type: "state",
    seq,
    t_ms: seq * 20,
    mode: "idle",
    joints: [1, 2, 3, 4, 5].map((id) => ({ id, ticks: 2048, pos: 0, moving: false })),
    pose: { x: 0, y: 0, z: 0.4, pitch: 0 },
    speed_scale: 1,
    last_cmd_seq: 0,
    fault: null,
  };
}

describe("TeleopSocket", () => {
  let sockets: FakeWs[];
  let statuses: ConnectionStatus[];

  beforeEach(() => {
    vi.useFakeTimers({
      toFake: ["setTimeout", "clearTimeout", "setInterval", "clearInterval", "Date"],
    });
    sockets = [];
    statuses = [];
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  function build(staleMs = 2000) {
    return new TeleopSocket(
      "ws://x/ws",
      {
        onStatus: (status) => statuses.push(status),
      },
      {
        staleMs,
        backoffMinMs: 100,
        backoffMaxMs: 800,
        wsFactory: (url) => {
          const ws = new FakeWs();
          sockets.push(ws);
          return ws;
        },
        now: () => Date.now(),
      },
    );
  }

  it("reports connected after open and state flow", () => {
    const socket = build();
    socket.connect();
    sockets[0]!.serverOpen();
    sockets[0]!.serverMessage(makeState(1));
    expect(socket.currentStatus()).toBe("connected");
    expect(socket.ageMs()).toBe(0);
  });

  it("flips to disconnected within the stale window when states stop", () => {
    const socket = build(2000);
    socket.connect();
    sockets[0]!.serverOpen();
    sockets[0]!.serverMessage(makeState(1));
    vi.advanceTimersByTime(1900);
    expect(socket.currentStatus()).toBe("connected");
    vi.advanceTimersByTime(700); // next watchdog firing is past 2 s of silence
    expect(socket.currentStatus()).toBe("disconnected");
  });

  it("reconnects with exponential backoff after drops", () => {
    const socket = build();
    socket.connect();
    expect(sockets.length).toBe(1);
    sockets[0]!.serverOpen();
    sockets[0]!.serverDrop();
    vi.advanceTimersByTime(99);
    expect(sockets.length).toBe(1);
    vi.advanceTimersByTime(2); // first retry after ~100 ms
    expect(sockets.length).toBe(2);
    sockets[1]!.serverDrop();
    vi.advanceTimersByTime(150);
    expect(sockets.length).toBe(2);
    vi.advanceTimersByTime(60); // second retry after ~200 ms
    expect(sockets.length).toBe(3);
    // A successful session resets the backoff.
    sockets[2]!.serverOpen();
    sockets[2]!.serverDrop();
    vi.advanceTimersByTime(110);
    expect(sockets.length).toBe(4);
  });

  it("resumes the session on the new socket after a restart", () => {
    const socket = build();
    socket.connect();
    sockets[0]!.serverOpen();
    sockets[0]!.serverMessage(makeState(1));
    sockets[0]!.serverDrop();
    vi.advanceTimersByTime(120);
    sockets[1]!.serverOpen();
    sockets[1]!.serverMessage(makeState(2));
    expect(socket.currentStatus()).toBe("connected");
    expect(socket.send({ type: "stop" })).toBe(true);
    expect(sockets[1]!.sent).toEqual(['{"type":"stop"}']);
  });

  it("refuses to send while disconnected", () => {
    const socket = build();
    expect(socket.send({ type: "stop" })).toBe(false);
    socket.connect();
    expect(socket.send({ type: "stop" })).toBe(false); // still connecting
    sockets[0]!.serverOpen();
    expect(socket.send({ type: "stop" })).toBe(true);
  });

  it("close() stops reconnecting", () => {
    const socket = build();
    socket.connect();
    sockets[0]!.serverOpen();
    socket.close();
    vi.advanceTimersByTime(10_000);
    expect(sockets.length).toBe(1);
    expect(socket.currentStatus()).toBe("disconnected");
  });
});
