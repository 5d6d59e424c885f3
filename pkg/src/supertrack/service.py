"""Real-time session server for live trials.

Each session hosts one trial: a model or human operator drives the tracking
loop while a supervisor watches and presses selection keys. State streams to
browser clients as JSON text messages over a WebSocket; the persisted log is
byte-compatible with the offline pipeline and the end-of-trial metrics are
computed from that log by the same code path.

Wire protocol (versioned, ``PROTOCOL_VERSION``):

  client -> server
    {"type": "hello", "role": "operator"|"supervisor", "protocol": 1}
    {"type": "start"}
    {"type": "key", "t": <trial s>, "key": 1|2|3}
    {"type": "input", "t": <trial s>, "axis": -1..1}
    {"type": "probe_echo", "nonce": str}
    {"type": "ping", "nonce": str}

  server -> client
    {"type": "welcome", "session", "role", "condition", "u_visible",
     "duration", "tick_rate", "protocol"}
    {"type": "start", "config_digest", "duration"}
    {"type": "tick", ...}   role-filtered, see _tick_payload
    {"type": "probe", "nonce", "server_time"}
    {"type": "pong", "nonce"}
    {"type": "end", "metrics", "log_path", "aborted"}
    {"type": "error", "code", "text"}

The operator's tick carries only the single target position and the cursor;
it never names the active reference or includes the other two references.
The supervisor's tick carries the command value only under conditions that
grant command access.
"""

from __future__ import annotations

import asyncio
import json
import statistics
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from . import signals, simcore, trial as trial_mod
from .config import PlatformConfig
from .trial import Condition, TrialSeeds, derive_trial_seeds

PROTOCOL_VERSION = 1
ROLES = ("operator", "supervisor")
QUEUE_LIMIT = 512


@dataclass
class ClientLink:
    role: str
    queue: asyncio.Queue = field(default_factory=lambda: asyncio.Queue(maxsize=QUEUE_LIMIT))
    probe_echoes: dict[str, float] = field(default_factory=dict)
    closed: bool = False

    def send(self, message: dict) -> bool:
        """Queue a message; a full queue marks the consumer for disconnect."""
        if self.closed:
            return False
        try:
            self.queue.put_nowait(message)
            return True
        except asyncio.QueueFull:
            self.close()
            return False

    def close(self) -> None:
        self.closed = True
        try:
            self.queue.put_nowait(None)
        except asyncio.QueueFull:
            try:
                self.queue.get_nowait()
                self.queue.put_nowait(None)
            except (asyncio.QueueEmpty, asyncio.QueueFull):
                pass


@dataclass
class Session:
    id: str
    condition: Condition
    operator_source: str
    seeds: TrialSeeds
    subject: int
    config: PlatformConfig
    state: str = "lobby"
    clients: dict[str, ClientLink] = field(default_factory=dict)
    trial_clock: float = 0.0
    key_events: list[tuple[float, int]] = field(default_factory=list)
    axis_value: float = 0.0
    log_path: str | None = None
    metrics: dict | None = None
    aborted: bool = False
    task: asyncio.Task | None = None

    @property
    def u_visible(self) -> bool:
        return self.condition.display_mode != "none"

    def broadcast(self, message: dict, role: str | None = None) -> None:
        for link_role, link in list(self.clients.items()):
            if role is None or link_role == role:
                link.send(message)


class SessionManager:
    def __init__(self, config: PlatformConfig, out_dir: str | Path):
        self.config = config
        self.out_dir = Path(out_dir)
        self.sessions: dict[str, Session] = {}

    def create_session(self, condition_label: str, operator_source: str,
                       master_seed: int | None = None,
                       subject: int = 0) -> Session:
        condition = Condition.from_label(condition_label)
        if condition.display_mode == "haptic":
            raise UnsupportedMode("haptic display has no hardware backend")
        if operator_source not in ("human", "model"):
            raise ValueError(f"unknown operator source {operator_source!r}")
        if master_seed is None:
            master_seed = self.config.experiment.master_seed
        seeds = derive_trial_seeds(
            master_seed, subject,
            trial_mod.CONDITION_LABELS.index(condition_label),
        )
        session = Session(
            id=uuid.uuid4().hex[:12],
            condition=condition,
            operator_source=operator_source,
            seeds=seeds,
            subject=subject,
            config=self.config,
        )
        self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise KeyError(session_id)
        return self.sessions[session_id]

    def _manifest_path(self) -> Path:
        return self.out_dir / "sessions.json"

    def record_manifest(self, session: Session) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self._manifest_path()
        manifest = {}
        if path.exists():
            manifest = json.loads(path.read_text())
        manifest[session.id] = {
            "log": session.log_path,
            "condition": session.condition.label,
            "operator_source": session.operator_source,
            "config_digest": session.config.digest(),
            "aborted": session.aborted,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }
        path.write_text(json.dumps(manifest, indent=2) + "\n")


class UnsupportedMode(RuntimeError):
    pass


def _tick_payload(session: Session, role: str, t: float, target: float,
                  refs: tuple[float, float, float], y: float, u: float,
                  selection: int) -> dict:
    if role == "operator":
        # the operator sees one anonymous target: no index, no distractors
        return {"type": "tick", "t": t, "target": target, "y": y}
    msg = {
        "type": "tick", "t": t,
        "r1": refs[0], "r2": refs[1], "r3": refs[2],
        "y": y, "selection": selection,
    }
    if session.u_visible:
        msg["u"] = u
    return msg


async def run_live_trial(session: Session, manager: SessionManager) -> None:
    """Pace the loop at wall clock, stream ticks, finalize a TrialLog."""
    cfg = session.config
    grid = cfg.grid
    n = grid.n_samples
    dt = grid.dt
    kp = simcore.derive_operator_gain(cfg.operator)
    kc = cfg.operator.plant_gain
    d = int(round(cfg.operator.delay * grid.sample_rate))

    ref_set = signals.make_reference_set(cfg.signals, session.seeds.reference_seed)
    trace = signals.build_switch_schedule(
        ref_set, cfg.switching, grid.duration, session.seeds.schedule_seed,
        scan_rate=grid.sample_rate,
    )
    times = grid.times()
    refs = signals.reference_matrix(ref_set, times)
    active = signals.active_index_series(trace, times)
    r = refs[active - 1, np.arange(n)]

    u = np.zeros(n)
    y = np.zeros(n)
    e = np.zeros(n)

    session.broadcast({"type": "start", "config_digest": cfg.digest(),
                       "duration": grid.duration})
    time_scale = cfg.service.time_scale
    tick_period = 1.0 / cfg.service.tick_rate
    next_tick = 0.0
    loop = asyncio.get_running_loop()
    wall_start = loop.time()
    model = session.operator_source == "model"
    aborted = False
    bound_roles = set(session.clients)
    last_step = n - 1

    try:
        for i in range(n):
            t = times[i]
            if time_scale > 0:
                lag = wall_start + t / time_scale - loop.time()
                if lag > 0:
                    await asyncio.sleep(lag)
            elif i % 200 == 0:
                await asyncio.sleep(0)  # let inbound messages land
            session.trial_clock = t

            if model:
                e[i] = r[i] - y[i]
                u[i] = kp * e[i - d] if i >= d else 0.0
            else:
                u[i] = cfg.service.axis_gain * session.axis_value
            if i + 1 < n:
                y[i + 1] = y[i] + dt * kc * u[i]

            if t + 1e-12 >= next_tick:
                sel_now = session.key_events[-1][1] if session.key_events else 0
                for role, link in list(session.clients.items()):
                    ok = link.send(_tick_payload(
                        session, role, float(t), float(r[i]),
                        (float(refs[0, i]), float(refs[1, i]), float(refs[2, i])),
                        float(y[i]), float(u[i]), sel_now,
                    ))
                    if not ok:
                        session.clients.pop(role, None)
                while next_tick <= t + 1e-12:
                    next_tick += tick_period

            # a bound role dropping out mid-trial aborts the trial
            if bound_roles - set(session.clients):
                aborted = True
                last_step = i
                break
    except asyncio.CancelledError:
        aborted = True
        last_step = max(0, int(round(session.trial_clock * grid.sample_rate)))

    session.state = "finished"
    session.aborted = aborted
    keep = slice(0, last_step + 1) if aborted else slice(0, n)
    times = times[keep]
    selection = trial_mod._selection_from_keys(session.key_events, times)
    log = trial_mod.TrialLog(
        metadata={
            "subject": session.subject,
            "condition": session.condition.label,
            "reference_seed": session.seeds.reference_seed,
            "schedule_seed": session.seeds.schedule_seed,
            "sample_rate": grid.sample_rate,
            "duration": grid.duration,
            "config_digest": cfg.digest(),
            "operator_source": session.operator_source,
            "session_id": session.id,
            "aborted": aborted,
        },
        columns={
            "t": times, "r1": refs[0][keep], "r2": refs[1][keep],
            "r3": refs[2][keep], "active_index": active[keep],
            "u": u[keep], "y": y[keep], "selection": selection,
        },
    )
    manager.out_dir.mkdir(parents=True, exist_ok=True)
    log_path = manager.out_dir / f"live_{session.id}.csv"
    trial_mod.write_log(log, log_path)
    session.log_path = str(log_path)
    report = trial_mod.report_from_log(log)
    session.metrics = {
        "accuracy": report.accuracy,
        "delay": report.delay,
        "operator_rms": report.operator_rms,
    }
    manager.record_manifest(session)
    session.broadcast({
        "type": "end", "metrics": session.metrics,
        "log_path": session.log_path, "aborted": aborted,
    })


async def latency_probe(session: Session, count: int = 5,
                        timeout: float = 2.0) -> dict:
    """Round-trip statistics from server-initiated probes."""
    rtts_ms: list[float] = []
    loop = asyncio.get_running_loop()
    links = list(session.clients.values())
    if not links:
        return {"samples": 0, "median_ms": None, "p95_ms": None}
    for _ in range(count):
        nonce = uuid.uuid4().hex[:8]
        sent_at = loop.time()
        for link in links:
            link.probe_echoes.pop(nonce, None)
            link.send({"type": "probe", "nonce": nonce, "server_time": sent_at})
        deadline = loop.time() + timeout
        pending = set(id(l) for l in links)
        while pending and loop.time() < deadline:
            await asyncio.sleep(0.001)
            for link in links:
                if id(link) in pending and nonce in link.probe_echoes:
                    rtts_ms.append((link.probe_echoes[nonce] - sent_at) * 1000.0)
                    pending.discard(id(link))
        await asyncio.sleep(0.002)
    if not rtts_ms:
        return {"samples": 0, "median_ms": None, "p95_ms": None,
                "error": "probe timeout"}
    rtts_ms.sort()
    p95_index = min(len(rtts_ms) - 1, int(round(0.95 * (len(rtts_ms) - 1))))
    return {
        "samples": len(rtts_ms),
        "median_ms": statistics.median(rtts_ms),
        "p95_ms": rtts_ms[p95_index],
    }


def _error(code: str, text: str) -> dict:
    return {"type": "error", "code": code, "text": text}


async def _sender(websocket: WebSocket, link: ClientLink) -> None:
    while True:
        message = await link.queue.get()
        if message is None or link.closed:
            break
        await websocket.send_text(json.dumps(message))


async def _handle_message(session: Session, manager: SessionManager,
                          link: ClientLink, role: str, message: dict) -> None:
    kind = message.get("type")
    loop = asyncio.get_running_loop()
    if kind == "ping":
        link.send({"type": "pong", "nonce": message.get("nonce")})
    elif kind == "probe_echo":
        nonce = message.get("nonce")
        if isinstance(nonce, str):
            link.probe_echoes[nonce] = loop.time()
    elif kind == "start":
        if session.state == "running":
            link.send(_error("protocol", "trial already started"))
        elif session.state == "finished":
            link.send(_error("protocol", "trial already finished"))
        else:
            session.state = "running"
            session.task = asyncio.create_task(run_live_trial(session, manager))
    elif kind == "key":
        if session.state != "running" or role != "supervisor":
            link.send(_error("dropped", "key outside a running trial"))
            return
        key = message.get("key")
        if key not in (1, 2, 3):
            link.send(_error("dropped", f"key {key!r} not in 1..3"))
            return
        t = message.get("t")
        if not isinstance(t, (int, float)):
            t = session.trial_clock
        t = min(max(float(t), 0.0), session.config.grid.duration)
        session.key_events.append((t, int(key)))
    elif kind == "input":
        if session.state != "running" or role != "operator":
            link.send(_error("dropped", "input outside a running trial"))
            return
        axis = message.get("axis")
        if isinstance(axis, (int, float)):
            session.axis_value = min(max(float(axis), -1.0), 1.0)
    else:
        link.send(_error("protocol", f"unknown message type {kind!r}"))


def create_app(config: PlatformConfig | None = None,
               out_dir: str | Path = "sessions",
               ui_dir: str | Path | None = None) -> FastAPI:
    manager = SessionManager(config or PlatformConfig(), out_dir)
    app = FastAPI(title="supertrack live-trial service")
    app.state.manager = manager

    @app.post("/sessions")
    async def create_session(body: dict):
        try:
            session = manager.create_session(
                condition_label=body.get("condition", "uOff"),
                operator_source=body.get("operator_source", "model"),
                master_seed=body.get("master_seed"),
                subject=int(body.get("subject", 0)),
            )
        except UnsupportedMode as exc:
            raise HTTPException(status_code=400, detail={
                "code": "unsupported-mode", "text": str(exc)})
        except ValueError as exc:
            raise HTTPException(status_code=400, detail={
                "code": "bad-request", "text": str(exc)})
        return {"id": session.id, "condition": session.condition.label,
                "operator_source": session.operator_source,
                "config_digest": manager.config.digest()}

    @app.get("/sessions")
    async def list_sessions():
        return {
            sid: {"state": s.state, "condition": s.condition.label,
                  "operator_source": s.operator_source,
                  "roles": sorted(s.clients), "log": s.log_path}
            for sid, s in manager.sessions.items()
        }

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        try:
            s = manager.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="no such session")
        return {"id": s.id, "state": s.state, "condition": s.condition.label,
                "operator_source": s.operator_source,
                "roles": sorted(s.clients), "metrics": s.metrics,
                "log": s.log_path, "aborted": s.aborted}

    @app.post("/sessions/{session_id}/probe")
    async def probe(session_id: str, count: int = 5):
        try:
            s = manager.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="no such session")
        return await latency_probe(s, count=count)

    @app.websocket("/ws/{session_id}")
    async def ws_endpoint(websocket: WebSocket, session_id: str):
        await websocket.accept()
        try:
            session = manager.get(session_id)
        except KeyError:
            await websocket.send_text(json.dumps(_error("no-session", session_id)))
            await websocket.close()
            return

        raw = await websocket.receive_text()
        try:
            hello = json.loads(raw)
        except json.JSONDecodeError:
            await websocket.send_text(json.dumps(_error("protocol", "hello must be JSON")))
            await websocket.close()
            return
        role = hello.get("role")
        if hello.get("type") != "hello" or role not in ROLES:
            await websocket.send_text(json.dumps(_error("protocol", "expected hello with a role")))
            await websocket.close()
            return
        if hello.get("protocol") not in (None, PROTOCOL_VERSION):
            await websocket.send_text(json.dumps(_error(
                "version", f"server speaks protocol {PROTOCOL_VERSION}")))
            await websocket.close()
            return
        if role in session.clients:
            await websocket.send_text(json.dumps(_error("role-taken", role)))
            await websocket.close()
            return
        if role == "operator" and session.operator_source == "model":
            await websocket.send_text(json.dumps(_error(
                "role-taken", "operator is the built-in model")))
            await websocket.close()
            return

        link = ClientLink(role=role)
        session.clients[role] = link
        link.send({
            "type": "welcome", "session": session.id, "role": role,
            "condition": session.condition.label,
            "u_visible": session.u_visible,
            "duration": session.config.grid.duration,
            "tick_rate": session.config.service.tick_rate,
            "protocol": PROTOCOL_VERSION,
        })
        sender = asyncio.create_task(_sender(websocket, link))
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    message = json.loads(raw)
                except json.JSONDecodeError:
                    link.send(_error("protocol", "messages must be JSON"))
                    continue
                await _handle_message(session, manager, link, role, message)
        except WebSocketDisconnect:
            pass
        finally:
            # the trial loop notices a missing bound role and aborts itself
            link.close()
            sender.cancel()
            if session.clients.get(role) is link:
                session.clients.pop(role, None)

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
