// Wire schema for the live-trial service (protocol version 1).
// JSON text messages over a WebSocket; the shapes here mirror the server.

export const PROTOCOL_VERSION = 1;

export type Role = "operator" | "supervisor";

export interface Welcome {
  type: "welcome";
  session: string;
  role: Role;
  condition: string;
  u_visible: boolean;
  duration: number;
  tick_rate: number;
  protocol: number;
}

export interface StartMsg {
  type: "start";
  config_digest: string;
  duration: number;
}

// The operator tick is deliberately minimal: one anonymous target and the
// cursor. The distractor references and the active index are not part of
// the type because the server never sends them to this role.
export interface OperatorTick {
  type: "tick";
  t: number;
  target: number;
  y: number;
}

export interface SupervisorTick {
  type: "tick";
  t: number;
  r1: number;
  r2: number;
  r3: number;
  y: number;
  selection: number;
  u?: number;
}

export type Tick = OperatorTick | SupervisorTick;

export interface EndMsg {
  type: "end";
  metrics: {
    accuracy: number;
    delay: number | null;
    operator_rms: number;
  };
  log_path: string;
  aborted: boolean;
}

export interface ErrorMsg {
  type: "error";
  code: string;
  text: string;
}

export interface ProbeMsg {
  type: "probe";
  nonce: string;
  server_time: number;
}

export interface PongMsg {
  type: "pong";
  nonce: string;
}

export type ServerMessage =
  | Welcome
  | StartMsg
  | Tick
  | EndMsg
  | ErrorMsg
  | ProbeMsg
  | PongMsg;

export function helloMessage(role: Role): string {
  return JSON.stringify({ type: "hello", role, protocol: PROTOCOL_VERSION });
}

export function startMessage(): string {
  return JSON.stringify({ type: "start" });
}

export function keyMessage(t: number, key: 1 | 2 | 3): string {
  return JSON.stringify({ type: "key", t, key });
}

export function inputMessage(t: number, axis: number): string {
  return JSON.stringify({ type: "input", t, axis });
}

export function probeEchoMessage(nonce: string): string {
  return JSON.stringify({ type: "probe_echo", nonce });
}

function isNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

export function isOperatorTick(m: ServerMessage): m is OperatorTick {
  return m.type === "tick" && "target" in m;
}

export function isSupervisorTick(m: ServerMessage): m is SupervisorTick {
  return m.type === "tick" && "r1" in m;
}

/** Parse a raw frame into a known server message, or null if malformed. */
export function decodeServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const m = data as Record<string, unknown>;
  switch (m.type) {
    case "welcome":
      if (
        typeof m.session === "string" &&
        (m.role === "operator" || m.role === "supervisor") &&
        typeof m.condition === "string" &&
        typeof m.u_visible === "boolean" &&
        isNumber(m.duration) &&
        isNumber(m.tick_rate)
      ) {
        return data as Welcome;
      }
      return null;
    case "start":
      return isNumber(m.duration) ? (data as StartMsg) : null;
    case "tick":
      if (!isNumber(m.t) || !isNumber(m.y)) return null;
      if (isNumber(m.target)) return data as OperatorTick;
      if (isNumber(m.r1) && isNumber(m.r2) && isNumber(m.r3)) {
        return data as SupervisorTick;
      }
      return null;
    case "end":
      return typeof m.metrics === "object" && m.metrics !== null
        ? (data as EndMsg)
        : null;
    case "error":
      return typeof m.code === "string" ? (data as ErrorMsg) : null;
    case "probe":
      return typeof m.nonce === "string" ? (data as ProbeMsg) : null;
    case "pong":
      return typeof m.nonce === "string" ? (data as PongMsg) : null;
    default:
      return null;
  }
}
