"""Host-side pipeline and headless drivers.

``Pipeline`` is the single owner of simulation and session state. Each tick
it takes whatever input arrived, normalises it, runs the motion kernel and
advances the trial state machine. Everything else (UDP receive, WebSocket
clients, trace replay, the scripted pilot) only feeds it input.
"""
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .device import DeviceCalibration, DeviceEmulator, load_trace, run_trace
from .mapping import (
    HANDLEBAR_SPAN_DEG,
    MotionParams,
    NormalizedInput,
    Source,
    counts_to_slide,
    handlebar_to_yaw,
    joystick_to_input,
    load_params,
)
from .pilot import Pilot
from .protocol import DEFAULT_PORT, decode_frame, encode_frame
from .sim import AVATAR_RADIUS, DT, AvatarState, Integrator, teleport
from .tasks import (
    Session,
    SessionComplete,
    Teleport,
    TrialComplete,
    condition_orders,
    default_map,
    load_map,
    summary_csv,
    write_logs,
)

log = logging.getLogger(__name__)

STALE_AFTER_S = 0.2
WS_PORT = 47802
SNAPSHOT_HZ = 30.0
MAX_TRIAL_S = 600.0


@dataclass(frozen=True)
class StateSnapshot:
    wall_time_s: float
    sim_time_s: float
    avatar: AvatarState
    input: NormalizedInput
    goal_id: str
    goal_name: str
    trial_state: str
    dwell_elapsed_s: float
    trial_index: int
    trial_total: int
    host_state: str = "running"

    def to_message(self):
        return {
            "type": "snapshot",
            "wall_time_s": self.wall_time_s,
            "sim_time_s": self.sim_time_s,
            "avatar": self.avatar.to_dict(),
            "input": self.input.to_dict(),
            "goal_id": self.goal_id,
            "goal_name": self.goal_name,
            "trial_state": self.trial_state,
            "dwell_elapsed_s": self.dwell_elapsed_s,
            "trial_index": self.trial_index,
            "trial_total": self.trial_total,
            "host_state": self.host_state,
        }


class Pipeline:
    def __init__(self, city, params, session, calib=DeviceCalibration(), dt=DT, radius=AVATAR_RADIUS):
        self.city = city
        self.params = params
        self.calib = calib
        self.session = session
        self.dt = dt
        start = teleport(AvatarState(), city.start)
        self.integ = Integrator(params, city.walls, radius, dt, start)
        self.source = session.condition
        self.last_input = NormalizedInput(0.0, 0.0, self.source)
        self.last_rx_tick = None
        self.ticks = 0
        self.stale = True

    @property
    def time_s(self):
        return self.ticks * self.dt

    @property
    def avatar(self):
        return self.integ.avatar

    def feed_frames(self, frames):
        """Scooter path: latest handlebar reading, belt speed averaged over
        the frames that arrived this tick."""
        if not frames:
            return
        yaw = self.last_input.yaw_input
        for f in frames:
            if f.abs_valid:
                yaw = handlebar_to_yaw(f.handlebar_raw, self.calib)
        delta = sum(f.treadmill_delta for f in frames)
        slide = counts_to_slide(delta, len(frames) * self.calib.period_s, self.calib)
        self.last_input = NormalizedInput(yaw, slide, Source.SCOOTER, self.time_s)
        self.last_rx_tick = self.ticks

    def feed_input(self, inp):
        self.last_input = inp
        self.last_rx_tick = self.ticks

    def effective_input(self):
        if self.last_rx_tick is None or (self.ticks - self.last_rx_tick) * self.dt > STALE_AFTER_S + 1e-9:
            self.stale = True
            return 0.0, 0.0
        self.stale = False
        return self.last_input.yaw_input, self.last_input.slide_input

    def step(self):
        yaw, slide = self.effective_input()
        self.integ.step(yaw, slide)
        events = self.session.tick(self.integ.avatar)
        for ev in events:
            if isinstance(ev, Teleport):
                self.integ.teleport(ev.pose)
        self.ticks += 1
        return events

    def snapshot(self, wall_time_s=0.0, host_state="running"):
        s = self.session
        goal = s.active_goal
        yaw, slide = (0.0, 0.0) if self.stale else (self.last_input.yaw_input, self.last_input.slide_input)
        return StateSnapshot(
            wall_time_s,
            self.time_s,
            self.integ.avatar,
            NormalizedInput(yaw, slide, self.last_input.source, self.last_input.time_s),
            goal.id if goal else "",
            goal.display_name if goal else "",
            "complete" if s.finished else s.state.value,
            s.dwell_elapsed,
            min(s.index + 1, s.n_trials),
            s.n_trials,
            host_state,
        )


# -- headless drivers ---------------------------------------------------------


def _bernoulli_drops(rng, drop_rate):
    if drop_rate <= 0:
        return lambda: False
    return lambda: rng.random() < drop_rate


def run_trace_session(pipe, trace, drop_rate=0.0, rng=None):
    """Replay a device trace, one frame per tick, through the wire codec.
    Stops when the session completes or the trace ends."""
    dropped = _bernoulli_drops(rng or np.random.default_rng(0), drop_rate)
    joystick = pipe.session.condition is Source.JOYSTICK
    rate = pipe.calib.sample_rate_hz
    for k, frame in enumerate(run_trace(trace, pipe.calib)):
        if joystick:
            t0 = k / rate
            deg, _ = trace.sample(t0)
            belt = trace.window_speed(t0, (k + 1) / rate)
            pipe.feed_input(
                joystick_to_input(belt / pipe.calib.max_slide_speed, deg / HANDLEBAR_SPAN_DEG, pipe.time_s)
            )
        elif not dropped():
            pipe.feed_frames([decode_frame(encode_frame(frame))])
        pipe.step()
        if pipe.session.finished:
            break
    if not pipe.session.finished:
        pipe.session.abort()
    return pipe.session


@dataclass
class TraceRecorder:
    """Collects per-tick device commands as step-mode keyframes."""

    rate: float
    rows: list = field(default_factory=list)
    n: int = 0

    def add(self, deg, belt):
        if not self.rows or self.rows[-1][1:] != (deg, belt):
            self.rows.append((self.n / self.rate, deg, belt))
        self.n += 1

    def trace(self):
        from .device import InputTrace

        rows = list(self.rows)
        end = self.n / self.rate
        if rows[-1][0] < end:
            rows.append((end,) + rows[-1][1:])
        return InputTrace(tuple(rows), "step")


def run_pilot_session(pipe, pilot=None, drop_rate=0.0, rng=None, recorder=None, goals=None, max_trial_s=MAX_TRIAL_S):
    """Closed-loop run with the scripted pilot in the participant's place.

    Scooter condition: pilot commands drive the device emulator and each
    frame crosses the wire codec (optionally dropped). Joystick condition:
    the pilot's axes go straight to the joystick mapping.
    """
    pilot = pilot or Pilot(pipe.params)
    dropped = _bernoulli_drops(rng or np.random.default_rng(0), drop_rate)
    emu = DeviceEmulator(pipe.calib)
    joystick = pipe.session.condition is Source.JOYSTICK
    session = pipe.session
    trial_ticks = 0
    limit = int(max_trial_s / pipe.dt)
    remaining = None if goals is None else int(goals)
    while not session.finished:
        goal = session.active_goal
        cmd = pilot(pipe.integ.avatar, pipe.city.guidance[goal.id])
        deg = cmd.yaw_input * HANDLEBAR_SPAN_DEG
        belt = cmd.slide_input * pipe.calib.max_slide_speed
        if recorder is not None:
            recorder.add(deg, belt)
        if joystick:
            pipe.feed_input(joystick_to_input(cmd.slide_input, cmd.yaw_input, pipe.time_s))
        else:
            packet = encode_frame(emu.step(deg, belt))
            if not dropped():
                pipe.feed_frames([decode_frame(packet)])
        events = pipe.step()
        trial_ticks += 1
        if any(isinstance(e, TrialComplete) for e in events):
            trial_ticks = 0
            if remaining is not None:
                remaining -= 1
                if remaining <= 0:
                    break
        elif trial_ticks > limit:
            log.warning("pilot trial %s exceeded %.0f s; aborting", goal.id, max_trial_s)
            session.abort()
    return session


def make_pipeline(city, params, condition, participant_id="P01", seed=0, calib=DeviceCalibration()):
    session = Session(city, participant_id, condition, seed)
    return Pipeline(city, params, session, calib)


def single_goal_session(city, participant_id, condition, goal_id, seed=0):
    session = Session(city, participant_id, condition, seed)
    session.trial_order = [goal_id]
    return session


def simulate_cohort(city, params, n=14, seed=0, calib=DeviceCalibration()):
    """Synthetic counterbalanced cohort driven by the pilot. Each
    participant-condition pair gets its own pace and lookahead."""
    orders = condition_orders(n, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    logs = []
    for i, order in enumerate(orders):
        pid = f"P{i + 1:02d}"
        for block, condition in enumerate(order):
            pace = float(rng.uniform(0.8, 1.0))
            lookahead = float(rng.uniform(6.0, 10.0))
            session_seed = int(np.random.SeedSequence([seed, i, block]).generate_state(1)[0])
            session = Session(city, pid, condition, session_seed)
            pipe = Pipeline(city, params, session, calib)
            run_pilot_session(pipe, Pilot(params, lookahead=lookahead, pace=pace))
            for entry in session.logs:
                entry.block = block
            logs.extend(session.logs)
    return logs


# -- config & outputs -----------------------------------------------------------


class ConfigError(ValueError):
    pass


@dataclass
class SessionConfig:
    map_path: str = None
    params_path: str = None
    condition: Source = Source.SCOOTER
    participant_id: str = "P01"
    seed: int = 0
    input_kind: str = "udp"  # udp | trace | client
    udp_port: int = DEFAULT_PORT
    trace_path: str = None
    ws_port: int = WS_PORT
    snapshot_hz: float = SNAPSHOT_HZ
    out_dir: str = "session_out"

    def __post_init__(self):
        self.condition = Source(self.condition)
        if self.input_kind not in ("udp", "trace", "client"):
            raise ConfigError(f"unknown input source {self.input_kind!r}")
        if self.input_kind == "trace" and not self.trace_path:
            raise ConfigError("trace input needs a trace path")
        if not 0 < self.snapshot_hz <= 1.0 / DT:
            raise ConfigError("snapshot rate must be in (0, tick rate]")

    def load_city(self):
        return load_map(self.map_path) if self.map_path else default_map()

    def load_params(self):
        return load_params(self.params_path) if self.params_path else MotionParams()


def load_config(path, environ=os.environ):
    """JSON config; ``LOCO_UDP_PORT`` / ``LOCO_WS_PORT`` override ports."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be an object")
    base = os.path.dirname(os.path.abspath(path))

    def rel(p):
        return None if p is None else os.path.join(base, p)

    inp = raw.get("input", {"kind": "udp"})
    if isinstance(inp, str):
        inp = {"kind": inp}
    try:
        cfg = SessionConfig(
            map_path=rel(raw.get("map")),
            params_path=rel(raw.get("params")),
            condition=raw.get("condition", "scooter"),
            participant_id=str(raw.get("participant_id", "P01")),
            seed=int(raw.get("seed", 0)),
            input_kind=inp.get("kind", "udp"),
            udp_port=int(inp.get("port", DEFAULT_PORT)),
            trace_path=rel(inp.get("path")),
            ws_port=int(raw.get("ws_port", WS_PORT)),
            snapshot_hz=float(raw.get("snapshot_hz", SNAPSHOT_HZ)),
            out_dir=rel(raw.get("out", "session_out")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if environ.get("LOCO_UDP_PORT"):
        cfg.udp_port = int(environ["LOCO_UDP_PORT"])
    if environ.get("LOCO_WS_PORT"):
        cfg.ws_port = int(environ["LOCO_WS_PORT"])
    return cfg


def session_report(session):
    return {
        "participant_id": session.participant_id,
        "condition": session.condition.value,
        "trial_order": list(session.trial_order),
        "complete": session.finished and not any(e.aborted for e in session.logs),
        "trials": [
            {
                "goal_id": e.goal_id,
                "completion_time_s": e.completion_time_s,
                "aborted": e.aborted,
            }
            for e in session.logs
        ],
    }


def write_outputs(logs, out_dir, report=None):
    os.makedirs(out_dir, exist_ok=True)
    write_logs(logs, os.path.join(out_dir, "trial_logs.jsonl"))
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write(summary_csv(logs))
    if report is not None:
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")


def run_headless(
    trace_path, city, params, condition, seed, out_dir=None, participant_id="P01", calib=DeviceCalibration(), goal_id=None
):
    trace = load_trace(trace_path)
    pipe = make_pipeline(city, params, condition, participant_id, seed, calib)
    if goal_id is not None:
        pipe.session.trial_order = [goal_id]
    session = run_trace_session(pipe, trace)
    report = session_report(session)
    if out_dir:
        write_outputs(session.logs, out_dir, report)
    return report, session.logs


def completion_times(logs):
    return {e.goal_id: e.completion_time_s for e in logs if not e.aborted}
