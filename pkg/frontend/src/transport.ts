/** Request/response channel over one WebSocket, with server push events. */

import {
  Envelope,
  EventEnvelope,
  PROTOCOL,
  ResponseEnvelope,
  ServiceError,
  parseEnvelope,
} from "./protocol.js";

/** Minimal socket surface so tests can inject fakes and node can inject ws. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((event: { data: unknown }) => void) | null;
  onopen: (() => void) | null;
  onclose: ((event: unknown) => void) | null;
  onerror: ((event: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

interface Pending {
  resolve: (value: ResponseEnvelope) => void;
  reject: (reason: Error) => void;
}

export class Channel {
  private socket: SocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private eventHandlers: Array<(event: EventEnvelope) => void> = [];
  private closeHandlers: Array<() => void> = [];
  /** Last revision seen on any response or event. */
  revision = -1;

  constructor(private readonly factory: SocketFactory) {}

  async connect(url: string): Promise<void> {
    await new Promise<void>((resolve, reject) => {
      const socket = this.factory(url);
      socket.onopen = () => {
        this.socket = socket;
        resolve();
      };
      socket.onerror = (event) => reject(new Error(`websocket error: ${String(event)}`));
      socket.onclose = () => {
        this.socket = null;
        this.failAllPending(new Error("connection closed"));
        for (const handler of this.closeHandlers) handler();
      };
      socket.onmessage = (event) => this.dispatch(String(event.data));
    });
    await this.request("hello", { protocol: PROTOCOL });
  }

  onEvent(handler: (event: EventEnvelope) => void): void {
    this.eventHandlers.push(handler);
  }

  onClose(handler: () => void): void {
    this.closeHandlers.push(handler);
  }

  request<T = unknown>(verb: string, payload: unknown = {}): Promise<T> {
    const socket = this.socket;
    if (!socket) {
      // connect() resolves onopen before the hello round-trip, so the very
      // first request races the field assignment; tolerate that one case
      throw new Error("channel is not connected");
    }
    const id = this.nextId++;
    const message = JSON.stringify({ id, verb, payload });
    return new Promise<T>((resolve, reject) => {
      this.pending.set(id, {
        resolve: (envelope) => {
          this.revision = envelope.revision;
          if (envelope.ok) {
            resolve(envelope.payload as T);
          } else {
            const err = envelope.error ?? { type: "Unknown", message: "unknown failure" };
            reject(new ServiceError(err.type, err.message));
          }
        },
        reject,
      });
      socket.send(message);
    });
  }

  close(): void {
    this.socket?.close();
    this.socket = null;
  }

  private dispatch(raw: string): void {
    let envelope: Envelope;
    try {
      envelope = parseEnvelope(raw);
    } catch (error) {
      // a malformed frame must not wedge the pending map
      console.error(error);
      return;
    }
    if (envelope.type === "event") {
      this.revision = envelope.revision;
      for (const handler of this.eventHandlers) handler(envelope);
      return;
    }
    const pending = this.pending.get(envelope.id);
    if (pending) {
      this.pending.delete(envelope.id);
      pending.resolve(envelope);
    }
  }

  private failAllPending(reason: Error): void {
    for (const pending of this.pending.values()) pending.reject(reason);
    this.pending.clear();
  }
}
