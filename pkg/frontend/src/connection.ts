// WebSocket subscription with automatic exponential-backoff reconnection.

import type { ConnectionStatus } from './types.js';

export interface ConnectionCallbacks {
  onMessage(message: unknown): void;
  onStatus(status: ConnectionStatus, attempt: number): void;
}

export interface WebSocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  close(): void;
}

type SocketFactory = (url: string) => WebSocketLike;
type Scheduler = (fn: () => void, delayMs: number) => unknown;

export function backoffMs(attempt: number): number {
  return Math.min(1000 * 2 ** attempt, 30_000);
}

export class StreamConnection {
  private socket: WebSocketLike | null = null;
  private attempt = 0;
  private stopped = false;

  constructor(
    private url: string,
    private callbacks: ConnectionCallbacks,
    private socketFactory: SocketFactory = (u) => new WebSocket(u) as unknown as WebSocketLike,
    private scheduler: Scheduler = (fn, ms) => setTimeout(fn, ms),
  ) {}

  connect(): void {
    if (this.stopped) return;
    this.callbacks.onStatus('connecting', this.attempt);
    let socket: WebSocketLike;
    try {
      socket = this.socketFactory(this.url);
    } catch (error) {
      console.warn('live-monitor: connection failed', error);
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.attempt = 0;
      this.callbacks.onStatus('open', 0);
    };
    socket.onmessage = (event) => {
      let parsed: unknown;
      try {
        parsed = JSON.parse(String(event.data));
      } catch (error) {
        console.warn('live-monitor: dropped undecodable frame', error);
        return;
      }
      this.callbacks.onMessage(parsed);
    };
    socket.onclose = () => {
      this.socket = null;
      if (!this.stopped) {
        this.callbacks.onStatus('closed', this.attempt);
        this.scheduleReconnect();
      }
    };
    socket.onerror = () => {
      // onclose follows; nothing to do here
    };
  }

  private scheduleReconnect(): void {
    const delay = backoffMs(this.attempt);
    this.attempt += 1;
    this.scheduler(() => this.connect(), delay);
  }

  close(): void {
    this.stopped = true;
    this.socket?.close();
    this.socket = null;
  }
}
