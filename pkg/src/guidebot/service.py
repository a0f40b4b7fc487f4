"""Live simulation bridge: a websocket endpoint that broadcasts world
snapshots at the tick rate and accepts force, goal, mode, and lifecycle
commands from cockpit clients."""

from __future__ import annotations

import asyncio
import json
import logging

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from .astar import astar, inflate
from .force import Wrench2D
from .geometry import Point2D
from .simulator import ModeFlags, ScenarioConfig, Simulation, build_static_grid

log = logging.getLogger("guidebot.service")

QUEUE_SIZE = 16  # per-client snapshot backlog; oldest frames drop first


class SimulationSession:
    """Owns the simulation loop; clients talk to it only through queues."""

    def __init__(self, config: ScenarioConfig, tick_hz: float = 10.0):
        if tick_hz <= 0:
            raise ValueError("tick_hz must be positive")
        self.config = config
        self.tick_hz = tick_hz
        self.sim = Simulation(config)
        self.paused = False
        self.clients: set[asyncio.Queue] = set()
        self._task: asyncio.Task | None = None

    # ----------------------------------------------------------- lifecycle

    async def start(self) -> None:
        self._task = asyncio.create_task(self._loop())

    async def stop(self) -> None:
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass
            self._task = None

    async def _loop(self) -> None:
        period = 1.0 / self.tick_hz
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        while True:
            next_tick += period
            if not self.paused:
                try:
                    self.sim.step()
                except Exception:  # keep serving; surface in the snapshot
                    log.exception("simulation step failed")
            # snapshots flow even while paused so late joiners see the state;
            # sim time only advances on real ticks
            self._broadcast(self.snapshot())
            await asyncio.sleep(max(0.0, next_tick - loop.time()))

    def _broadcast(self, message: dict) -> None:
        text = json.dumps(message)
        for queue in self.clients:
            if queue.full():
                try:
                    queue.get_nowait()  # drop the oldest frame
                except asyncio.QueueEmpty:
                    pass
            queue.put_nowait(text)

    # ------------------------------------------------------------ snapshot

    def snapshot(self) -> dict:
        sim = self.sim
        state = sim.state
        preds = sim.tracker.predictions(sim.config.planner.z_steps, sim.config.dt)
        obstacles = []
        for track, pred in zip(sim.tracker.tracks, preds):
            e = track.ellipse
            obstacles.append(
                {
                    "id": track.id,
                    "x": e.center.x,
                    "y": e.center.y,
                    "a": e.a,
                    "b": e.b,
                    "theta": e.theta,
                    "pred": [{"x": p.center.x, "y": p.center.y} for p in pred[1:]],
                }
            )
        path = []
        planner_path = sim.planner._path
        if planner_path is not None:
            path = [{"x": p.x, "y": p.y} for p in planner_path.waypoints]
        snap = sim.estimator.snapshot
        user = state.user
        h_robot = sim.last_record.hmin_robot if sim.last_record else float("inf")
        h_user = sim.last_record.hmin_user if sim.last_record else float("inf")
        status = sim.last_record.status if sim.last_record else "init"
        return {
            "type": "snapshot",
            "t": state.time,
            "robot": {
                "x": state.robot.x,
                "y": state.robot.y,
                "theta": state.robot.theta,
                "vx": state.velocity.vx,
                "vy": state.velocity.vy,
                "wz": state.velocity.wz,
            },
            "user": {"x": user.x, "y": user.y},
            "obstacles": obstacles,
            "wrench_est": {
                "fx": snap.wrench.fx,
                "fy": snap.wrench.fy,
                "mz": snap.wrench.mz,
            },
            "v_tgt": {
                "vx": snap.v_tgt.vx,
                "vy": snap.v_tgt.vy,
                "wz": snap.v_tgt.wz,
            },
            "h_min": {"robot": _json_num(h_robot), "user": _json_num(h_user)},
            "path": path,
            "status": status,
            "paused": self.paused,
        }

    # ------------------------------------------------------------ commands

    def handle_command(self, msg: dict) -> dict | None:
        """Apply one client command; returns an error reply or None."""
        kind = msg.get("type")
        if kind == "force":
            force = msg.get("force", msg)
            wrench = Wrench2D(
                float(force.get("fx", 0.0)),
                float(force.get("fy", 0.0)),
                float(force.get("mz", 0.0)),
            )
            hold_ms = float(force.get("hold_ms", 250.0))
            self.sim.set_external_wrench(wrench, hold_ms / 1e3)
            return None
        if kind == "goal":
            goal = msg.get("goal", msg)
            point = Point2D(float(goal["x"]), float(goal["y"]))
            if not self._goal_reachable(point):
                return {"type": "error", "detail": "unreachable-goal"}
            self.sim.set_goal(point)
            return None
        if kind == "pause":
            self.paused = True
            return None
        if kind == "resume":
            self.paused = False
            return None
        if kind == "reset":
            self.sim = Simulation(self.config)
            return None
        if kind == "mode":
            mode = msg.get("mode", msg)
            current = self.sim.modes
            self.sim.modes = ModeFlags(
                fc=bool(mode.get("fc", current.fc)),
                gn=bool(mode.get("gn", current.gn)),
                oa=bool(mode.get("oa", current.oa)),
            )
            return None
        return {"type": "error", "detail": f"unknown command type {kind!r}"}

    def _goal_reachable(self, goal: Point2D) -> bool:
        grid = inflate(
            build_static_grid(self.config),
            self.config.planner.robot_radius + self.config.planner.d_safe1,
        )
        try:
            path = astar(grid, self.sim.state.robot.position, goal)
        except ValueError:
            return False
        return path is not None


def _json_num(v: float) -> float:
    # JSON has no Infinity; clamp the "no obstacle" sentinel
    if v == float("inf"):
        return 1e9
    if v == float("-inf"):
        return -1e9
    return v


def create_app(config: ScenarioConfig, tick_hz: float = 10.0) -> FastAPI:
    from contextlib import asynccontextmanager

    session = SimulationSession(config, tick_hz)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        await session.start()
        try:
            yield
        finally:
            await session.stop()

    app = FastAPI(title="guidebot service", lifespan=lifespan)
    app.state.session = session

    @app.get("/health")
    async def health() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue(maxsize=QUEUE_SIZE)
        session.clients.add(queue)

        async def sender() -> None:
            while True:
                await websocket.send_text(await queue.get())

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("command must be a JSON object")
                except (json.JSONDecodeError, ValueError) as exc:
                    await websocket.send_text(
                        json.dumps({"type": "error", "detail": f"bad message: {exc}"})
                    )
                    continue
                reply = session.handle_command(msg)
                if reply is not None:
                    await websocket.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            session.clients.discard(queue)

    return app


def serve_forever(
    config: ScenarioConfig, host: str = "127.0.0.1", port: int = 8700,
    tick_hz: float = 10.0,
) -> None:
    import uvicorn

    uvicorn.run(create_app(config, tick_hz), host=host, port=port, log_level="warning")
