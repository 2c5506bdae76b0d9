"""Slowed replay service: streams robot state, ingests brake commands live.

One asyncio ticker per session advances the shared refinement integrator at
100 Hz. Commands arrive through a latest-value mailbox (last writer wins per
tick) and state messages are fanned out through per-client queues so a slow
consumer can never stall the ticker. On completion the recorded command
column yields the revised schedule and tolerances through exactly the same
functions the offline path uses, so results agree bit for bit.
"""

from __future__ import annotations

import asyncio
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from . import kin, refine, spline
from .kin import RobotModel
from .refine import (CommandFilterParams, RefinementResult, RefinementTrace,
                     ReplayIntegrator, TimeMap, ToleranceMapParams)

__all__ = ["SessionConfig", "Session", "create_app"]

TICK_DT = 0.01  # 100 Hz service tick
HOLD_TICKS = 25  # command held for 0.25 s after a client drops
DECAY_TICKS = 25  # then ramped to zero over 0.25 s


@dataclass
class SessionConfig:
    trajectory: spline.TimedTrajectory
    tau: np.ndarray
    model: RobotModel
    eta: float = 5.0
    vmin_ratio: float = 0.2
    filter_params: CommandFilterParams = field(default_factory=CommandFilterParams)
    tol_params: ToleranceMapParams = field(default_factory=ToleranceMapParams)
    realtime: bool = True  # False: tick as fast as possible (tests)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        if self.eta <= 1.0:
            raise ValueError("eta must exceed 1")
        if not 0 < self.vmin_ratio <= 1:
            raise ValueError("vmin_ratio must be in (0, 1]")
        if self.tau[0] != 0.0 or self.tau[-1] != 1.0 or np.any(np.diff(self.tau) <= 0):
            raise ValueError("tau must increase strictly from 0 to 1")


class Session:
    def __init__(self, config: SessionConfig, trace_dir: Path | None = None):
        self.id = uuid.uuid4().hex[:12]
        self.config = config
        self.trace_dir = trace_dir
        self.V0r = 1.0 / (config.eta * config.trajectory.duration)
        self.Vminr = config.vmin_ratio * self.V0r
        self.phase = "idle"
        self.result: RefinementResult | None = None
        self.seq = 0
        self.latest_C = 0.0
        self._last_rx_tick: int | None = None
        self._connected = 0
        self._disconnect_tick: int | None = None
        self._rows: list[tuple[float, float, float, float, float]] = []
        self._subscribers: list[asyncio.Queue] = []
        self._task: asyncio.Task | None = None
        self._finalized = False
        self._reset_integrator()

    def _reset_integrator(self):
        self.integ = ReplayIntegrator(
            self.config.filter_params, self.V0r, self.Vminr)
        self._rows = []
        self.seq = 0
        self._finalized = False

    # -- command ingestion ---------------------------------------------------

    def put_command(self, C: float) -> None:
        self.latest_C = float(np.clip(C, -1.0, 0.0))
        self._last_rx_tick = self.integ.k

    def client_attached(self) -> None:
        self._connected += 1
        self._disconnect_tick = None

    def client_detached(self) -> None:
        self._connected = max(0, self._connected - 1)
        if self._connected == 0:
            self._disconnect_tick = self.integ.k

    def _effective_command(self) -> float:
        """Failsafe: hold the last command briefly after a disconnect, then release."""
        if self._connected > 0 or self._last_rx_tick is None:
            return self.latest_C if self._connected > 0 else 0.0
        assert self._disconnect_tick is not None
        dk = self.integ.k - self._disconnect_tick
        if dk <= HOLD_TICKS:
            return self.latest_C
        if dk <= HOLD_TICKS + DECAY_TICKS:
            return self.latest_C * (1.0 - (dk - HOLD_TICKS) / DECAY_TICKS)
        return 0.0

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        if self.phase != "idle":
            raise RuntimeError(f"cannot start from phase {self.phase!r}")
        self._reset_integrator()
        self.phase = "replaying"
        self._task = asyncio.get_running_loop().create_task(self._run())

    def stop(self) -> None:
        """Abort: returns to idle with no result."""
        if self._task is not None:
            self._task.cancel()
            self._task = None
        self.phase = "idle"
        self.result = None
        self._reset_integrator()

    async def _run(self):
        loop = asyncio.get_running_loop()
        t0 = loop.time()
        curve = self.config.trajectory.curve
        while True:
            C = self._effective_command()
            integ = self.integ
            self._rows.append((integ.t, C, integ.R, integ.v, integ.s))
            t, R, v, s = integ.tick(C)
            q = spline.evaluate(curve, s)
            pose = kin.fk(self.config.model, q)
            self._publish({
                "seq": self.seq, "t": t, "s_r": s, "v": v, "R": R,
                "q": q.tolist(), "p": pose.p.tolist(), "theta": pose.theta.tolist(),
            })
            self.seq += 1
            if s >= 1.0:
                # terminal state row; its command value is never consumed
                self._rows.append((t, self._effective_command(), R, v, s))
                self._finalize()
                break
            if self.config.realtime:
                await asyncio.sleep(max(0.0, t0 + integ.k * TICK_DT - loop.time()))
            elif integ.k % 64 == 0:
                await asyncio.sleep(0)

    def _finalize(self):
        if self._finalized:
            return
        self._finalized = True
        rows = np.array(self._rows)
        t, C, R, v, s = rows.T
        tm = TimeMap(t, v, s, self.V0r, self.Vminr, self.integ._braked)
        tau_r = refine.remap_timings(tm, self.config.tau)
        tol = refine.extract_tolerances(R, tm, self.config.tau, self.config.tol_params)
        trace = RefinementTrace(t, C, R, v, s, self.V0r, self.Vminr, self.config.eta)
        self.result = RefinementResult(tau_r, tol, trace)
        self.phase = "done"
        if self.trace_dir is not None:
            self.trace_dir.mkdir(parents=True, exist_ok=True)
            lines = ["t,C,R,v,s_r"]
            for row in rows:
                lines.append(",".join(format(x, ".17g") for x in row))
            (self.trace_dir / f"session_{self.id}.csv").write_text("\n".join(lines) + "\n")

    # -- state fan-out -------------------------------------------------------

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=512)
        self._subscribers.append(q)
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        if q in self._subscribers:
            self._subscribers.remove(q)

    def _publish(self, msg: dict) -> None:
        for q in self._subscribers:
            try:
                q.put_nowait(msg)
            except asyncio.QueueFull:
                # slow consumer: drop its oldest frame, never block the ticker
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:
                    pass
                try:
                    q.put_nowait(msg)
                except asyncio.QueueFull:
                    pass


def _parse_session_body(body: dict) -> SessionConfig:
    try:
        traj = spline.trajectory_from_dict(body["trajectory"])
        tau = np.asarray(body["tau"], dtype=float)
        if "model" in body:
            model = kin.model_from_dict(body["model"])
        else:
            model = kin.load_model(body.get("model_name", "fr3"))
        fp = CommandFilterParams(**body.get("filter", {}))
        tp = ToleranceMapParams(**body.get("tolerance_map", {}))
        return SessionConfig(
            trajectory=traj, tau=tau, model=model,
            eta=float(body.get("eta", 5.0)),
            vmin_ratio=float(body.get("vmin_ratio", 0.2)),
            filter_params=fp, tol_params=tp,
            realtime=bool(body.get("realtime", True)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise HTTPException(status_code=400, detail=f"malformed session request: {e}")


def create_app(trace_dir: str | Path | None = None,
               preloaded: SessionConfig | None = None) -> FastAPI:
    app = FastAPI(title="replay service")
    app.state.sessions = {}
    app.state.trace_dir = Path(trace_dir) if trace_dir else None

    if preloaded is not None:
        session = Session(preloaded, app.state.trace_dir)
        app.state.sessions[session.id] = session
        app.state.preloaded_id = session.id

    @app.post("/sessions")
    async def create_session(body: dict):
        config = _parse_session_body(body)
        session = Session(config, app.state.trace_dir)
        app.state.sessions[session.id] = session
        return {"id": session.id, "V0r": session.V0r, "Vminr": session.Vminr,
                "duration_s": config.trajectory.duration, "eta": config.eta}

    def _get(sid: str) -> Session:
        if sid not in app.state.sessions:
            raise HTTPException(status_code=404, detail="no such session")
        return app.state.sessions[sid]

    @app.post("/sessions/{sid}/start")
    async def start_session(sid: str):
        session = _get(sid)
        try:
            session.start()
        except RuntimeError as e:
            raise HTTPException(status_code=409, detail=str(e))
        return {"phase": session.phase}

    @app.post("/sessions/{sid}/stop")
    async def stop_session(sid: str):
        session = _get(sid)
        session.stop()
        return {"phase": session.phase}

    @app.get("/sessions/{sid}")
    async def session_state(sid: str):
        session = _get(sid)
        return {"phase": session.phase, "t": session.integ.t, "s_r": session.integ.s,
                "eta": session.config.eta, "V0r": session.V0r,
                "duration_s": session.config.trajectory.duration}

    @app.get("/sessions/{sid}/result")
    async def session_result(sid: str):
        session = _get(sid)
        if session.phase != "done" or session.result is None:
            raise HTTPException(status_code=409, detail="session not finished")
        return session.result.to_dict()

    @app.websocket("/sessions/{sid}/stream")
    async def stream(ws: WebSocket, sid: str, rate: int = 100):
        if sid not in app.state.sessions:
            await ws.close(code=4404)
            return
        session = app.state.sessions[sid]
        await ws.accept()
        stride = max(1, round(100 / max(1, min(rate, 100))))
        queue = session.subscribe()
        session.client_attached()
        last_t_client = -np.inf

        async def pump_out():
            while True:
                msg = await queue.get()
                if msg["seq"] % stride == 0 or msg["s_r"] >= 1.0:
                    await ws.send_json(msg)
                if msg["s_r"] >= 1.0:
                    await ws.send_json({"event": "done", "seq": msg["seq"]})

        out_task = asyncio.create_task(pump_out())
        try:
            while True:
                data = await ws.receive_json()
                tc = float(data.get("t_client", 0.0))
                if tc < last_t_client:
                    continue  # stale command
                last_t_client = tc
                session.put_command(float(data.get("C", 0.0)))
        except WebSocketDisconnect:
            pass
        finally:
            out_task.cancel()
            session.client_detached()
            session.unsubscribe(queue)

    return app
