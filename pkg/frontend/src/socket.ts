// WebSocket client with request tagging, optimistic locking, and reconnect.
//
// Exactly one command may be in flight; further sends are refused until the
// gateway acknowledges (echoed request_id). On disconnect the owner is told
// to raise a blocking overlay and the client retries with a fixed backoff.

import type { Command, GatewayEvent } from './protocol.js';
import { decodeEvent, encodeCommand } from './protocol.js';

// Structural subset of both the browser WebSocket and the ws package.
// Handler parameters are typed loosely so either implementation assigns.
export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: any) => void) | null;
  onclose: ((ev?: any) => void) | null;
  onerror: ((ev?: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface GatewayClientHooks {
  onEvent(event: GatewayEvent): void;
  onConnected(): void;
  onDisconnected(): void;
}

export const RECONNECT_DELAY_MS = 1000;

export class GatewayClient {
  private socket: WebSocketLike | null = null;
  private pendingRequestId: string | null = null;
  private requestCounter = 0;
  private destroyed = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly hooks: GatewayClientHooks,
    private readonly makeSocket: WebSocketFactory,
  ) {}

  connect(): void {
    if (this.destroyed) return;
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => this.hooks.onConnected();
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onerror = () => {
      /* onclose follows; nothing to do here */
    };
    socket.onclose = () => {
      this.socket = null;
      this.pendingRequestId = null;
      this.hooks.onDisconnected();
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.destroyed || this.reconnectTimer !== null) return;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.connect();
    }, RECONNECT_DELAY_MS);
  }

  private handleMessage(data: string): void {
    let event: GatewayEvent;
    try {
      event = decodeEvent(data);
    } catch {
      return; // not a frame we understand; ignore rather than crash the console
    }
    if ('ack' in event && event.ack !== undefined && event.ack === this.pendingRequestId) {
      this.pendingRequestId = null;
    }
    this.hooks.onEvent(event);
  }

  /** True if the command was sent; false while locked or disconnected. */
  send(command: Command): boolean {
    if (this.socket === null || this.pendingRequestId !== null) return false;
    this.requestCounter += 1;
    const requestId = `op-${this.requestCounter}`;
    this.pendingRequestId = requestId;
    this.socket.send(encodeCommand(command, requestId));
    return true;
  }

  get inFlight(): boolean {
    return this.pendingRequestId !== null;
  }

  destroy(): void {
    this.destroyed = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    if (this.socket !== null) {
      const socket = this.socket;
      this.socket = null;
      socket.onclose = null;
      socket.close();
    }
  }
}
