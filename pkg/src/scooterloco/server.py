"""Live session runtime: fixed-rate tick loop, UDP ingest, WebSocket clients.

The tick loop owns the pipeline. UDP and WebSocket contexts reach it only
through queues; clients receive immutable JSON snapshots.
"""
import asyncio
import concurrent.futures
import json
import logging
import math
import queue
import threading
import time

from websockets.asyncio.server import broadcast, serve

from .device import DeviceCalibration, load_trace, run_trace
from .host import Pipeline, session_report, write_outputs
from .mapping import NormalizedInput, Source
from .protocol import FrameReceiver
from .tasks import Session, SessionComplete

log = logging.getLogger(__name__)

COMMANDS = ("start", "pause", "resume", "abort", "inject_input", "set_condition")


class HostRuntime:
    def __init__(self, config, city=None, params=None, calib=DeviceCalibration()):
        self.config = config
        self.city = city or config.load_city()
        self.params = params or config.load_params()
        self.calib = calib
        self.commands = queue.Queue()
        self.frames = queue.Queue()
        self.subscribers = []
        self.state = "idle"
        self.tick_compute_s = []
        self.wall_ticks = 0
        self.condition = config.condition
        self.report = None
        self._trace = load_trace(config.trace_path) if config.input_kind == "trace" else None
        self._new_session()

    def _new_session(self):
        session = Session(self.city, self.config.participant_id, self.condition, self.config.seed)
        self.pipe = Pipeline(self.city, self.params, session, self.calib)
        self._trace_frames = run_trace(self._trace, self.calib) if self._trace is not None else None

    @property
    def session(self):
        return self.pipe.session

    # -- commands -------------------------------------------------------------

    def submit(self, cmd):
        """Thread-safe: queue a command for the tick loop; returns a Future."""
        fut = concurrent.futures.Future()
        self.commands.put((cmd, fut))
        return fut

    def _err(self, name, message, kind="invalid-state"):
        return {"type": "error", "cmd": name, "error": kind, "state": self.state, "message": message}

    def handle_command(self, cmd):
        """Apply one command. Must run on the tick-loop thread."""
        name = cmd.get("cmd") if isinstance(cmd, dict) else None
        if name not in COMMANDS:
            return self._err(name, f"unknown command {name!r}", "unknown-command")
        if name == "start":
            if self.state != "idle":
                return self._err(name, f"cannot start while {self.state}")
            self.state = "running"
        elif name == "pause":
            if self.state != "running":
                return self._err(name, f"cannot pause while {self.state}")
            self.state = "paused"
        elif name == "resume":
            if self.state != "paused":
                return self._err(name, f"cannot resume while {self.state}")
            self.state = "running"
        elif name == "abort":
            if self.state not in ("running", "paused"):
                return self._err(name, f"cannot abort while {self.state}")
            partial = self.session.abort()
            self.state = "aborted"
            self._publish({"type": "event", "kind": "aborted", "time_s": self.pipe.time_s,
                           "goal_id": partial.goal_id if partial else None})
            self._finish()
        elif name == "inject_input":
            if self.config.input_kind != "client":
                return self._err(name, f"input source is {self.config.input_kind}, not client")
            if self.state not in ("running", "paused"):
                return self._err(name, f"cannot inject input while {self.state}")
            try:
                yaw = float(cmd.get("yaw", 0.0))
                slide = float(cmd.get("slide", 0.0))
                inp = NormalizedInput(yaw, slide, Source(self.condition), self.pipe.time_s)
            except (TypeError, ValueError) as exc:
                return self._err(name, str(exc), "invalid-argument")
            self.pipe.feed_input(inp)
        elif name == "set_condition":
            if self.state in ("running", "paused"):
                return self._err(name, "condition cannot change mid-trial")
            try:
                self.condition = Source(cmd.get("condition"))
            except ValueError:
                return self._err(name, f"unknown condition {cmd.get('condition')!r}", "invalid-argument")
            self.state = "idle"
            self._new_session()
        return {"type": "ack", "cmd": name, "state": self.state}

    # -- loop -----------------------------------------------------------------

    def _publish(self, msg):
        for sub in list(self.subscribers):
            try:
                sub(msg)
            except Exception:  # a broken subscriber must not stall the loop
                log.exception("subscriber failed")

    def _drain_commands(self):
        while True:
            try:
                cmd, fut = self.commands.get_nowait()
            except queue.Empty:
                return
            reply = self.handle_command(cmd)
            if fut is not None and not fut.done():
                fut.set_result(reply)

    def _drain_frames(self):
        frames = []
        while True:
            try:
                frames.append(self.frames.get_nowait())
            except queue.Empty:
                return frames

    def _finish(self):
        report = session_report(self.session)
        if self.config.out_dir:
            write_outputs(self.session.logs, self.config.out_dir, report)
        self.report = report

    def tick_once(self, wall_time_s=0.0):
        """One loop iteration: commands, input, simulation, publication."""
        self._drain_commands()
        frames = self._drain_frames()
        events = []
        if self.state == "running":
            if self._trace_frames is not None:
                frame = next(self._trace_frames, None)
                if frame is not None:
                    frames.append(frame)
            self.pipe.feed_frames(frames)
            events = self.pipe.step()
            for ev in events:
                self._publish(ev.to_message())
                if isinstance(ev, SessionComplete):
                    self.state = "complete"
                    self._finish()
        self.wall_ticks += 1
        hz = self.config.snapshot_hz
        if math.floor(self.wall_ticks * hz * self.pipe.dt) != math.floor((self.wall_ticks - 1) * hz * self.pipe.dt):
            self._publish(self.pipe.snapshot(wall_time_s, self.state).to_message())
        return events

    @property
    def done(self):
        return self.state in ("complete", "aborted")

    def run(self, stop=None, speed=1.0, max_wall_s=None):
        """Tick at ``speed`` x real time until the session ends or ``stop``
        is set. Records per-tick compute time."""
        stop = stop or threading.Event()
        period = self.pipe.dt / speed
        t0 = time.perf_counter()
        next_t = t0
        while not stop.is_set() and not self.done:
            started = time.perf_counter()
            self.tick_once(started - t0)
            self.tick_compute_s.append(time.perf_counter() - started)
            if max_wall_s is not None and started - t0 > max_wall_s:
                break
            next_t += period
            delay = next_t - time.perf_counter()
            if delay > 0:
                stop.wait(delay)
            elif delay < -10 * period:
                next_t = time.perf_counter()  # fell far behind; do not burst
        self._drain_commands()
        return self.report or session_report(self.session)


class UdpIngest(threading.Thread):
    """Receives device datagrams and queues decoded frames for the loop."""

    def __init__(self, out_queue, port, host="0.0.0.0"):
        super().__init__(daemon=True)
        self.receiver = FrameReceiver(host, port, timeout=0.05)
        self.port = self.receiver.port
        self.out = out_queue
        self._halt = threading.Event()

    def run(self):
        while not self._halt.is_set():
            frame = self.receiver.recv()
            if frame is not None:
                self.out.put(frame)
        self.receiver.close()

    def stop(self):
        self._halt.set()


class ClientServer:
    """WebSocket endpoint in its own thread and event loop."""

    def __init__(self, runtime, host="127.0.0.1", port=0):
        self.runtime = runtime
        self.host = host
        self.port = port
        self.clients = set()
        self.loop = None
        self._ready = threading.Event()
        self._error = None
        self._thread = threading.Thread(target=self._main, daemon=True)

    def start(self, timeout=5.0):
        self._thread.start()
        self._ready.wait(timeout)
        if self._error is not None:
            raise self._error
        self.runtime.subscribers.append(self.publish)
        return self

    def publish(self, msg):
        if self.loop is not None and self.clients:
            text = json.dumps(msg)
            self.loop.call_soon_threadsafe(broadcast, set(self.clients), text)

    async def _handler(self, ws):
        self.clients.add(ws)
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send(json.dumps({"type": "error", "error": "bad-json"}))
                    continue
                if not isinstance(msg, dict) or msg.get("type") != "command":
                    await ws.send(json.dumps({"type": "error", "error": "not-a-command"}))
                    continue
                reply = await asyncio.wrap_future(self.runtime.submit(msg))
                await ws.send(json.dumps(reply))
        finally:
            self.clients.discard(ws)

    def _main(self):
        self.loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self.loop)
        self._stopped = asyncio.Event()

        async def serve_forever():
            try:
                server = await serve(self._handler, self.host, self.port)
            except OSError as exc:
                self._error = exc
                self._ready.set()
                return
            self.port = server.sockets[0].getsockname()[1]
            self._ready.set()
            async with server:
                await self._stopped.wait()

        self.loop.run_until_complete(serve_forever())

    def stop(self):
        if self.loop is not None and self.loop.is_running():
            self.loop.call_soon_threadsafe(self._stopped.set)
        self._thread.join(timeout=5.0)


def serve_session(config, autostart=False, speed=1.0, stop=None):
    """Run a live session with its sockets. Raises OSError if a port is taken."""
    runtime = HostRuntime(config)
    ingest = None
    if config.input_kind == "udp":
        ingest = UdpIngest(runtime.frames, config.udp_port)
    ws = ClientServer(runtime, "0.0.0.0", config.ws_port)
    try:
        ws.start()
    except OSError:
        if ingest:
            ingest.receiver.close()
        raise
    if ingest:
        ingest.start()
    log.info("session %s/%s: ws port %d%s", config.participant_id, config.condition.value, ws.port,
             f", udp port {ingest.port}" if ingest else "")
    if autostart:
        runtime.submit({"cmd": "start"})
    try:
        return runtime.run(stop, speed)
    finally:
        if ingest:
            ingest.stop()
        ws.stop()

