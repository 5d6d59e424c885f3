// Page bootstrap: joins (or creates) a session based on the query string and
// runs the render loop for the chosen role.
//
//   /?role=supervisor&session=<id>     join an existing session
//   /?role=supervisor&condition=uVisual  create a model-operator session

import { RenderClock, TickBuffer } from "./interp.js";
import { ArrowAxis, pointerToAxis, SelectionKeys } from "./input.js";
import { createSession, TrialClient } from "./net.js";
import { isSupervisorTick, Role } from "./protocol.js";
import { frameModel, paintFrame } from "./render.js";
import { Viewport } from "./viewport.js";

function statusLine(text: string, bad = false): void {
  const el = document.getElementById("status");
  if (el) {
    el.textContent = text;
    el.className = bad ? "bad" : "";
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const role = (params.get("role") ?? "supervisor") as Role;
  const canvas = document.getElementById("stage") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const view: Viewport = { width: canvas.width, height: canvas.height, range: 1.0 };

  let sessionId = params.get("session");
  if (!sessionId) {
    sessionId = await createSession(location.origin, {
      condition: params.get("condition") ?? "uVisual",
      operator_source: params.get("operator") ?? "model",
    });
    statusLine(`session ${sessionId} created`);
  }

  const buffer = new TickBuffer();
  let clock: RenderClock | null = null;
  let tickPeriod = 1 / 60;
  let selection = 0;
  let trialClock = 0;
  let running = false;

  const client = new TrialClient(
    location.origin.replace(/^http/, "ws"),
    sessionId,
    role,
    {
      onStart: () => {
        running = true;
        statusLine("trial running");
      },
      onTick: (tick) => {
        trialClock = tick.t;
        if (clock === null) clock = new RenderClock(2 * tickPeriod);
        clock.observe(tick.t, performance.now() / 1000);
        const { type: _t, ...values } = tick as unknown as Record<string, number> & {
          type: string;
        };
        buffer.push(tick.t, values as Record<string, number>);
        if (isSupervisorTick(tick)) selection = tick.selection;
      },
      onEnd: (end) => {
        running = false;
        const d = end.metrics.delay;
        statusLine(
          (end.aborted ? "trial ABORTED - partial log " : "trial complete - ") +
            `accuracy ${(end.metrics.accuracy * 100).toFixed(1)}%` +
            (d === null ? "" : `, delay ${d.toFixed(2)} s`) +
            ` - log: ${end.log_path}`,
          end.aborted,
        );
      },
      onServerError: (err) => statusLine(`server: ${err.code} ${err.text}`, true),
      onConnection: (state, detail) => {
        if (state !== "open" && !client.ended) {
          statusLine(`connection ${state}${detail ? `: ${detail}` : ""}`, true);
        }
      },
    },
    (url) => new WebSocket(url) as unknown as import("./net.js").SocketLike,
  );

  const welcome = await client.connect();
  tickPeriod = 1 / welcome.tick_rate;
  statusLine(
    `joined ${welcome.session} as ${welcome.role} (${welcome.condition}) - press Space to start`,
  );

  if (role === "supervisor") {
    const keys = new SelectionKeys(
      (key) => {
        if (!running) return;
        client.sendKey(trialClock, key);
        selection = key;
      },
      () => statusLine("keys: 1 - green, 2 - yellow, 3 - pink", true),
    );
    window.addEventListener("keydown", (e) => keys.keydown(e));
    window.addEventListener("keyup", (e) => keys.keyup(e));
  } else {
    const arrows = new ArrowAxis((axis) => {
      if (running) client.sendAxis(trialClock, axis);
    });
    window.addEventListener("keydown", (e) => arrows.keydown(e));
    let dragging = false;
    canvas.addEventListener("pointerdown", (e) => {
      dragging = true;
      canvas.setPointerCapture(e.pointerId);
    });
    canvas.addEventListener("pointerup", () => (dragging = false));
    canvas.addEventListener("pointermove", (e) => {
      if (dragging && running) {
        const rect = canvas.getBoundingClientRect();
        client.sendAxis(trialClock, pointerToAxis(e.clientX - rect.left, rect.width));
      }
    });
  }

  window.addEventListener("keydown", (e) => {
    if (e.code === "Space" && !running && !client.ended) client.start();
  });

  // render loop with a once-a-second fps readout
  let frames = 0;
  let fpsStamp = performance.now();
  const fpsEl = document.getElementById("fps");
  function frame(): void {
    const nowSec = performance.now() / 1000;
    const t = clock?.renderTime(nowSec);
    const values = t != null ? buffer.sampleAt(t) : buffer.latest?.values ?? null;
    if (values) {
      paintFrame(ctx, view, frameModel(role, view, values, selection));
    }
    frames += 1;
    const now = performance.now();
    if (now - fpsStamp >= 1000 && fpsEl) {
      fpsEl.textContent = `${((frames * 1000) / (now - fpsStamp)).toFixed(0)} fps`;
      frames = 0;
      fpsStamp = now;
    }
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

boot().catch((err) => statusLine(String(err), true));
