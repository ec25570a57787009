"""Live mode: run a scenario in stepped real time and expose it over a
websocket endpoint for operator consoles.

Outbound frames (JSON objects ``{"type": ..., "payload": ...}``):

* ``snapshot``  full world state, sent on connect and after a reset
* ``record``    every trace record as it is produced
* ``status``    paused flag changes

Inbound frames: ``place_obstacle {x, y, radius, tall}``, ``pause``,
``resume``, ``reset {seed}``.  Commands are queued and applied only at tick
boundaries, so the sim loop stays the world's single writer.  A
place_obstacle always answers with exactly one event record (accepted or
rejected); malformed frames get an ``error`` frame and the session
continues.
"""

from __future__ import annotations

import asyncio
import json
import queue
import threading
import time
from dataclasses import dataclass
from typing import Optional

from websockets.asyncio.server import serve

from .actions import StuckError
from .decision import DecisionState
from .harness import AddObstacle, Scenario, _RunHost
from .protocol import CommandLine, LookReply, SensorLine, requantize
from .sensors import LookOutcome

VIEWER_QUEUE_LIMIT = 1000


class _SessionReset(Exception):
    def __init__(self, seed: int):
        self.seed = seed


@dataclass
class _Command:
    kind: str
    payload: dict
    reply: "asyncio.Queue[dict]"
    loop: asyncio.AbstractEventLoop


class LiveServer:
    def __init__(self, scenario: Scenario, seed: int, port: int,
                 ticks_per_second: float = 50.0, host: str = "127.0.0.1",
                 rules_text: Optional[str] = None):
        self.scenario = scenario
        self.seed = seed
        self.port = port
        self.host = host
        self.tps = ticks_per_second
        self.rules_text = rules_text
        self.paused = False
        self._commands: "queue.Queue[_Command]" = queue.Queue()
        self._viewers: set[tuple[asyncio.Queue, asyncio.AbstractEventLoop]] = set()
        self._viewers_lock = threading.Lock()
        self._stop = threading.Event()
        self._snapshot_lock = threading.Lock()
        self._host: Optional[_RunHost] = None
        self._terminal = False
        self.bound_port: Optional[int] = None
        self._ready = threading.Event()

    # -- broadcast --------------------------------------------------------------

    def _broadcast(self, frame: dict) -> None:
        data = json.dumps(frame)
        with self._viewers_lock:
            viewers = list(self._viewers)
        for q, loop in viewers:
            def push(q=q, loop_=loop):
                if q.qsize() >= VIEWER_QUEUE_LIMIT:
                    q.put_nowait(None)  # overflow: disconnect the viewer
                else:
                    q.put_nowait(data)
            try:
                loop.call_soon_threadsafe(push)
            except RuntimeError:
                pass  # viewer loop already gone

    def snapshot(self) -> dict:
        with self._snapshot_lock:
            host = self._host
            if host is None:
                world_part = None
            else:
                world = host.world
                world_part = {
                    "robot": {"x": world.robot.x, "y": world.robot.y,
                              "heading": world.robot.heading},
                    "obstacles": [{"x": ob.x, "y": ob.y, "radius": ob.radius,
                                   "tall": ob.tall} for ob in world.obstacles],
                    "target": {"x": world.target_x, "y": world.target_y},
                    "reach_radius": world.reach_radius,
                }
            return {
                "scenario": self.scenario.name,
                "seed": self.seed,
                "cycle": host.cycle if host else 0,
                "paused": self.paused,
                "terminal": self._terminal,
                "world": world_part,
            }

    # -- simulation side ----------------------------------------------------------

    def _pump_commands(self) -> None:
        """Drain queued operator commands; runs only at tick and cycle
        boundaries on the sim thread."""
        while True:
            try:
                cmd = self._commands.get_nowait()
            except queue.Empty:
                break
            self._apply_command(cmd)
        while self.paused and not self._stop.is_set():
            time.sleep(0.02)
            try:
                cmd = self._commands.get_nowait()
            except queue.Empty:
                continue
            self._apply_command(cmd)

    def _apply_command(self, cmd: _Command) -> None:
        if cmd.kind == "pause":
            self._set_paused(True)
        elif cmd.kind == "resume":
            self._set_paused(False)
        elif cmd.kind == "place_obstacle":
            p = cmd.payload
            try:
                action = AddObstacle(radius=float(p.get("radius", 0.3)),
                                     tall=bool(p.get("tall", True)),
                                     x=float(p["x"]), y=float(p["y"]))
            except (KeyError, TypeError, ValueError) as err:
                self._reply(cmd, {"type": "error",
                                  "payload": {"message": f"bad place_obstacle: {err}"}})
                return
            assert self._host is not None
            with self._snapshot_lock:
                self._host.fire_event(action, "manual")
        elif cmd.kind == "reset":
            seed = int(cmd.payload.get("seed", self.seed))
            raise _SessionReset(seed)

    def _set_paused(self, value: bool) -> None:
        if self.paused != value:
            self.paused = value
            self._broadcast({"type": "status", "payload": {"paused": value}})

    def _reply(self, cmd: _Command, frame: dict) -> None:
        try:
            cmd.loop.call_soon_threadsafe(cmd.reply.put_nowait, frame)
        except RuntimeError:
            pass

    def _on_tick(self, _world) -> None:
        if self._stop.is_set():
            raise _SessionReset(self.seed)  # unwind; the sim thread exits
        if self.tps and self.tps > 0:
            time.sleep(1.0 / self.tps)
        self._pump_commands()

    def _run_once(self, seed: int) -> None:
        with self._snapshot_lock:
            self._host = _RunHost(self.scenario, seed,
                                  sink=lambda rec: self._broadcast(
                                      {"type": "record", "payload": rec}),
                                  on_tick=self._on_tick)
            self._terminal = False
        self.seed = seed
        self._broadcast({"type": "snapshot", "payload": self.snapshot()})
        host = self._host
        state = DecisionState(rules_text=self.rules_text)
        reason: Optional[str] = None
        try:
            while True:
                self._pump_commands()
                reason = host.poll()
                if reason is not None:
                    break
                record = requantize(SensorLine(host.perception())).record

                def look() -> LookOutcome:
                    return requantize(LookReply(host.looking())).outcome

                command = state.step(record, look)
                host.execute(requantize(CommandLine(command)).command)
        except StuckError:
            reason = "stuck"
        host.finish(reason or "stopped")
        self._terminal = True

    def _sim_thread(self) -> None:
        seed = self.seed
        while not self._stop.is_set():
            try:
                self._run_once(seed)
            except _SessionReset as reset:
                seed = reset.seed
                continue
            # run finished; idle until a reset or shutdown
            while not self._stop.is_set():
                try:
                    cmd = self._commands.get(timeout=0.05)
                except queue.Empty:
                    continue
                try:
                    self._apply_command(cmd)
                except _SessionReset as reset:
                    seed = reset.seed
                    break

    # -- websocket side -------------------------------------------------------------

    async def _handle(self, connection) -> None:
        loop = asyncio.get_running_loop()
        outbox: "asyncio.Queue[Optional[str]]" = asyncio.Queue()
        with self._viewers_lock:
            self._viewers.add((outbox, loop))
        try:
            await connection.send(json.dumps(
                {"type": "snapshot", "payload": self.snapshot()}))

            async def sender() -> None:
                while True:
                    item = await outbox.get()
                    if item is None:
                        await connection.close()
                        return
                    await connection.send(item)

            send_task = asyncio.create_task(sender())
            try:
                async for raw in connection:
                    await self._handle_frame(connection, raw, outbox, loop)
            finally:
                send_task.cancel()
        finally:
            with self._viewers_lock:
                self._viewers.discard((outbox, loop))

    async def _handle_frame(self, connection, raw, outbox, loop) -> None:
        try:
            frame = json.loads(raw)
            kind = frame["type"]
            if kind not in ("place_obstacle", "pause", "resume", "reset"):
                raise ValueError(f"unknown command {kind!r}")
            payload = frame.get("payload", {})
            if not isinstance(payload, dict):
                raise ValueError("payload must be an object")
        except (ValueError, KeyError, TypeError) as err:
            await connection.send(json.dumps(
                {"type": "error", "payload": {"message": str(err)}}))
            return
        reply: "asyncio.Queue[dict]" = asyncio.Queue()
        self._commands.put(_Command(kind, payload, reply, loop))
        # error replies (if any) come back on the viewer's own queue
        asyncio.create_task(self._forward_reply(reply, outbox))

    @staticmethod
    async def _forward_reply(reply: "asyncio.Queue[dict]", outbox) -> None:
        try:
            frame = await asyncio.wait_for(reply.get(), timeout=5.0)
        except asyncio.TimeoutError:
            return
        outbox.put_nowait(json.dumps(frame))

    # -- entry points ------------------------------------------------------------------

    async def _serve(self) -> None:
        async with serve(self._handle, self.host, self.port) as server:
            self.bound_port = server.sockets[0].getsockname()[1]
            self._ready.set()
            sim = threading.Thread(target=self._sim_thread, daemon=True)
            sim.start()
            try:
                while not self._stop.is_set():
                    await asyncio.sleep(0.05)
            finally:
                self._stop.set()
                sim.join(timeout=2.0)

    def serve_forever(self) -> None:
        try:
            asyncio.run(self._serve())
        except KeyboardInterrupt:
            self._stop.set()

    def start_background(self) -> threading.Thread:
        """Run the server on a daemon thread (used by tests); wait until the
        port is bound."""
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        if not self._ready.wait(timeout=5.0):
            raise RuntimeError("live server failed to start")
        return thread

    def stop(self) -> None:
        self._stop.set()


def serve_live(scenario: Scenario, seed: int, port: int,
               ticks_per_second: float = 50.0,
               rules_text: Optional[str] = None, host: str = "127.0.0.1") -> None:
    """Run the live endpoint until interrupted."""
    LiveServer(scenario, seed, port, ticks_per_second, host, rules_text).serve_forever()
