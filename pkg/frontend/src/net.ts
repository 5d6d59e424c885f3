// WebSocket client for the live-trial service. The socket constructor is
// injectable so headless tests can drive the same code path with the `ws`
// package while the browser uses the native WebSocket.

import {
  decodeServerMessage,
  EndMsg,
  ErrorMsg,
  helloMessage,
  inputMessage,
  keyMessage,
  probeEchoMessage,
  Role,
  ServerMessage,
  startMessage,
  StartMsg,
  Tick,
  Welcome,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientEvents {
  onStart?: (msg: StartMsg) => void;
  onTick?: (msg: Tick) => void;
  onEnd?: (msg: EndMsg) => void;
  onServerError?: (msg: ErrorMsg) => void;
  /** connection lifecycle: surfaced visibly, never swallowed */
  onConnection?: (state: "open" | "closed" | "failed", detail?: string) => void;
}

export class TrialClient {
  private socket: SocketLike | null = null;
  welcome: Welcome | null = null;
  ended = false;

  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly role: Role,
    private readonly events: ClientEvents,
    private readonly socketFactory: SocketFactory,
  ) {}

  connect(): Promise<Welcome> {
    const url = `${this.baseUrl}/ws/${this.sessionId}`;
    const socket = this.socketFactory(url);
    this.socket = socket;
    return new Promise((resolve, reject) => {
      let settled = false;
      socket.onopen = () => {
        socket.send(helloMessage(this.role));
      };
      socket.onerror = () => {
        if (!settled) {
          settled = true;
          reject(new Error("connection failed"));
        }
        this.events.onConnection?.("failed");
      };
      socket.onclose = () => {
        if (!settled) {
          settled = true;
          reject(new Error("closed before welcome"));
        }
        this.events.onConnection?.(
          "closed",
          this.ended ? "trial complete" : "connection lost mid-trial",
        );
      };
      socket.onmessage = (ev) => {
        const message = decodeServerMessage(String(ev.data));
        if (message === null) return;
        if (!settled) {
          if (message.type === "welcome") {
            settled = true;
            this.welcome = message;
            this.events.onConnection?.("open");
            resolve(message);
          } else if (message.type === "error") {
            settled = true;
            reject(new Error(`${message.code}: ${message.text}`));
          }
          return;
        }
        this.dispatch(message);
      };
    });
  }

  private dispatch(message: ServerMessage): void {
    switch (message.type) {
      case "start":
        this.events.onStart?.(message);
        break;
      case "tick":
        this.events.onTick?.(message);
        break;
      case "end":
        this.ended = true;
        this.events.onEnd?.(message);
        break;
      case "error":
        this.events.onServerError?.(message);
        break;
      case "probe":
        // latency probes are echoed immediately
        this.socket?.send(probeEchoMessage(message.nonce));
        break;
      default:
        break;
    }
  }

  start(): void {
    this.socket?.send(startMessage());
  }

  sendKey(t: number, key: 1 | 2 | 3): void {
    this.socket?.send(keyMessage(t, key));
  }

  sendAxis(t: number, axis: number): void {
    this.socket?.send(inputMessage(t, axis));
  }

  close(): void {
    this.socket?.close();
  }
}

/** POST /sessions; returns the new session id. */
export async function createSession(
  httpBase: string,
  body: {
    condition: string;
    operator_source: string;
    master_seed?: number;
    subject?: number;
  },
  fetchImpl: typeof fetch = fetch,
): Promise<string> {
  const resp = await fetchImpl(`${httpBase}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!resp.ok) {
    const detail = await resp.text();
    throw new Error(`session create failed: ${resp.status} ${detail}`);
  }
  const data = (await resp.json()) as { id: string };
  return data.id;
}
