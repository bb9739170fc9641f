"""Navigation-trial harness: city map, trial state machine, sessions, logs."""
import csv
import enum
import io
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .mapping import Source
from .sim import walls_array

Condition = Source

GOAL_RADIUS = 2.0
DWELL_REQUIRED_S = 2.0
STATIONARY_EPS = 0.05  # m/s
TRACE_HZ = 10.0
TRIALS_PER_CONDITION = 6


class MapError(ValueError):
    pass


@dataclass(frozen=True)
class GoalZone:
    id: str
    display_name: str
    center: tuple
    radius: float = GOAL_RADIUS
    dwell_required: float = DWELL_REQUIRED_S

    def __post_init__(self):
        if not self.radius > 0:
            raise MapError(f"goal {self.id!r}: radius must be positive")
        if self.dwell_required != DWELL_REQUIRED_S:
            raise MapError(f"goal {self.id!r}: dwell must be {DWELL_REQUIRED_S} s")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def contains(self, x, y):
        dx = x - self.center[0]
        dy = y - self.center[1]
        return dx * dx + dy * dy <= self.radius * self.radius

    @property
    def prompt(self):
        return f"Please go to '{self.display_name}'"


def polyline_length(points):
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    return float(np.hypot(*np.diff(pts, axis=0).T).sum())


@dataclass(frozen=True)
class CityMap:
    start: tuple  # (x, y, heading_deg)
    goals: tuple
    walls: np.ndarray
    guidance: dict  # goal id -> (K, 2) array

    def goal(self, goal_id):
        for g in self.goals:
            if g.id == goal_id:
                return g
        raise KeyError(goal_id)

    @property
    def goal_ids(self):
        return [g.id for g in self.goals]

    def path_length(self, goal_id):
        return polyline_length(self.guidance[goal_id])


def _pair(value, what):
    try:
        x, y = (float(v) for v in value)
    except (TypeError, ValueError):
        raise MapError(f"{what}: expected [x, y], got {value!r}") from None
    return x, y


def _start_pose(value):
    if isinstance(value, dict):
        try:
            return float(value["x"]), float(value["y"]), float(value.get("heading", 0.0))
        except (KeyError, TypeError, ValueError):
            raise MapError(f"start: bad pose {value!r}") from None
    try:
        vals = [float(v) for v in value]
    except (TypeError, ValueError):
        raise MapError(f"start: bad pose {value!r}") from None
    if len(vals) == 2:
        vals.append(0.0)
    if len(vals) != 3:
        raise MapError(f"start: bad pose {value!r}")
    return tuple(vals)


def load_map(document):
    """Build a validated ``CityMap`` from a dict, JSON text, or file path."""
    if isinstance(document, (str, os.PathLike)):
        text = str(document)
        if not text.lstrip().startswith("{"):
            with open(document) as fh:
                text = fh.read()
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MapError(f"map is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise MapError("map document must be an object")
    for key in ("start", "goals", "guidance"):
        if key not in document:
            raise MapError(f"map is missing {key!r}")

    start = _start_pose(document["start"])
    goals = []
    for i, g in enumerate(document["goals"]):
        try:
            goals.append(
                GoalZone(
                    str(g["id"]),
                    str(g.get("name", g["id"])),
                    _pair(g["center"], f"goal {g['id']!r} center"),
                    float(g.get("radius", GOAL_RADIUS)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise MapError(f"goal #{i}: missing field {exc}") from None
    if not goals:
        raise MapError("map has no goals")
    ids = [g.id for g in goals]
    if len(set(ids)) != len(ids):
        raise MapError("duplicate goal ids")

    walls = []
    for i, w in enumerate(document.get("walls", [])):
        try:
            walls.append(_pair(w["a"], f"wall #{i} a") + _pair(w["b"], f"wall #{i} b"))
        except (KeyError, TypeError):
            raise MapError(f"wall #{i}: needs 'a' and 'b'") from None

    guidance = {}
    raw_guidance = document["guidance"]
    for g in goals:
        if g.id not in raw_guidance:
            raise MapError(f"goal {g.id!r} has no guidance polyline")
        pts = np.array([_pair(p, f"guidance {g.id!r}") for p in raw_guidance[g.id]], dtype=np.float64)
        if len(pts) < 2:
            raise MapError(f"guidance {g.id!r}: needs at least two points")
        if math.hypot(pts[0, 0] - start[0], pts[0, 1] - start[1]) > 1e-6:
            raise MapError(f"guidance {g.id!r} does not begin at the start pose")
        if not g.contains(*pts[-1]):
            raise MapError(f"guidance {g.id!r} does not end inside its goal zone")
        guidance[g.id] = pts
    return CityMap(start, tuple(goals), walls_array(walls), guidance)


def map_to_document(city):
    return {
        "start": {"x": city.start[0], "y": city.start[1], "heading": city.start[2]},
        "goals": [
            {"id": g.id, "name": g.display_name, "center": list(g.center), "radius": g.radius}
            for g in city.goals
        ],
        "walls": [{"a": [w[0], w[1]], "b": [w[2], w[3]]} for w in city.walls.tolist()],
        "guidance": {gid: pts.tolist() for gid, pts in city.guidance.items()},
    }


def default_map_path():
    return resources.files("scooterloco").joinpath("data/default_map.json")


def default_map():
    return load_map(default_map_path().read_text())


# Grid city: streets run along every multiple of BLOCK on both axes; each
# block is filled by a square building inset STREET_HALF from the centrelines.
BLOCK = 100.0
STREET_HALF = 10.0
GRID_RANGE = range(-4, 4)

# start is the crossing at the origin, facing +x
DEFAULT_ROUTES = {
    "pizzeria": ("Pizzeria", [(0, 0), (200, 0), (200, -150)]),
    "library": ("Library", [(0, 0), (0, 200), (-200, 200)]),
    "bakery": ("Bakery", [(0, 0), (100, 0), (100, 300), (150, 300)]),
    "museum": ("Museum", [(0, 0), (-100, 0), (-100, -300)]),
    "station": ("Train Station", [(0, 0), (300, 0), (300, 100), (350, 100)]),
    "park": ("City Park", [(0, 0), (0, -200), (-200, -200), (-200, -250)]),
}


def build_default_map():
    """Synthesise the bundled grid city (regenerates data/default_map.json)."""
    walls = []
    for i in GRID_RANGE:
        for j in GRID_RANGE:
            x0, x1 = i * BLOCK + STREET_HALF, (i + 1) * BLOCK - STREET_HALF
            y0, y1 = j * BLOCK + STREET_HALF, (j + 1) * BLOCK - STREET_HALF
            corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
            for a, b in zip(corners, corners[1:] + corners[:1]):
                walls.append({"a": list(a), "b": list(b)})
    lo = GRID_RANGE.start * BLOCK - STREET_HALF
    hi = GRID_RANGE.stop * BLOCK + STREET_HALF
    border = [(lo, lo), (hi, lo), (hi, hi), (lo, hi)]
    for a, b in zip(border, border[1:] + border[:1]):
        walls.append({"a": list(a), "b": list(b)})
    doc = {
        "start": {"x": 0.0, "y": 0.0, "heading": 0.0},
        "goals": [],
        "walls": walls,
        "guidance": {},
    }
    for gid, (name, pts) in DEFAULT_ROUTES.items():
        pts = [[float(x), float(y)] for x, y in pts]
        doc["goals"].append({"id": gid, "name": name, "center": pts[-1], "radius": GOAL_RADIUS})
        doc["guidance"][gid] = pts
    return doc


class TrialState(str, enum.Enum):
    PROMPT = "prompt"
    NAVIGATING = "navigating"
    DWELLING = "dwelling"
    COMPLETE = "complete"


@dataclass
class TrialLog:
    participant_id: str
    condition: str
    goal_id: str
    trial_index: int
    start_time_s: float
    end_time_s: float
    completion_time_s: float
    trace: list = field(default_factory=list)  # [t, x, y, heading] at 10 Hz
    aborted: bool = False
    block: int = 0  # position of this condition in the participant's order

    def to_dict(self):
        return {
            "participant_id": self.participant_id,
            "condition": self.condition,
            "goal_id": self.goal_id,
            "trial_index": self.trial_index,
            "start_time_s": self.start_time_s,
            "end_time_s": self.end_time_s,
            "completion_time_s": self.completion_time_s,
            "aborted": self.aborted,
            "block": self.block,
            "trace": self.trace,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d):
        return cls(
            str(d["participant_id"]),
            str(d["condition"]),
            str(d["goal_id"]),
            int(d.get("trial_index", 0)),
            float(d["start_time_s"]),
            float(d["end_time_s"]),
            float(d["completion_time_s"]),
            [list(map(float, row)) for row in d.get("trace", [])],
            bool(d.get("aborted", False)),
            int(d.get("block", 0)),
        )


def write_logs(logs, path):
    with open(path, "w") as fh:
        for entry in logs:
            fh.write(entry.to_json() + "\n")


def read_logs(path):
    with open(path) as fh:
        return [TrialLog.from_dict(json.loads(line)) for line in fh if line.strip()]


def summary_csv(logs):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["participant", "condition", "goal", "completion_s"])
    for entry in logs:
        if not entry.aborted:
            writer.writerow([entry.participant_id, entry.condition, entry.goal_id, repr(entry.completion_time_s)])
    return buf.getvalue()


# -- events -----------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    time_s: float

    kind = "event"

    def to_message(self):
        body = {k: v for k, v in self.__dict__.items()}
        return {"type": "event", "kind": self.kind, **body}


@dataclass(frozen=True)
class TrialPrompt(Event):
    trial_index: int
    goal_id: str
    display_name: str
    text: str

    kind = "trial_prompt"


@dataclass(frozen=True)
class DwellStart(Event):
    goal_id: str

    kind = "dwell_start"


@dataclass(frozen=True)
class DwellReset(Event):
    goal_id: str
    elapsed_s: float

    kind = "dwell_reset"


@dataclass(frozen=True)
class TrialComplete(Event):
    log: TrialLog

    kind = "trial_complete"

    def to_message(self):
        return {
            "type": "event",
            "kind": self.kind,
            "time_s": self.time_s,
            "goal_id": self.log.goal_id,
            "trial_index": self.log.trial_index,
            "completion_time_s": self.log.completion_time_s,
        }


@dataclass(frozen=True)
class Teleport(Event):
    pose: tuple

    kind = "teleport"


@dataclass(frozen=True)
class SessionComplete(Event):
    kind = "session_complete"


@dataclass(frozen=True)
class SessionWarning(Event):
    message: str

    kind = "warning"


# -- sessions ---------------------------------------------------------------


def condition_orders(n, seed):
    """Counterbalanced condition orders for ``n`` participants: half start
    with each condition (differing by one when ``n`` is odd), shuffled."""
    first = [Condition.SCOOTER] * ((n + 1) // 2) + [Condition.JOYSTICK] * (n // 2)
    rng = np.random.default_rng(seed)
    rng.shuffle(first)
    other = {Condition.SCOOTER: Condition.JOYSTICK, Condition.JOYSTICK: Condition.SCOOTER}
    return [(c, other[c]) for c in first]


class Session:
    """One participant in one condition: a fixed order of goals, each run
    through prompt -> navigating -> dwelling -> complete."""

    def __init__(self, city, participant_id, condition, seed, dt=0.01, stationary_eps=STATIONARY_EPS):
        self.city = city
        self.participant_id = str(participant_id)
        self.condition = Condition(condition)
        self.rng_seed = seed
        self.dt = float(dt)
        self.stationary_eps = float(stationary_eps)
        rng = np.random.default_rng(seed)
        ids = city.goal_ids
        self.trial_order = [ids[i] for i in rng.permutation(len(ids))]
        self.index = 0
        self.state = TrialState.PROMPT
        self.ticks = 0
        self.dwell_ticks = 0
        self.trial_start_tick = 0
        self.trial_ticks = 0
        self.trace = []
        self.logs = []
        self.finished = False
        self.trace_every = max(1, round(1.0 / (TRACE_HZ * self.dt)))

    @property
    def n_trials(self):
        return len(self.trial_order)

    @property
    def active_goal(self):
        if self.finished:
            return None
        return self.city.goal(self.trial_order[self.index])

    @property
    def time_s(self):
        return self.ticks * self.dt

    def required_ticks(self, goal):
        return math.ceil(goal.dwell_required / self.dt - 1e-9)

    @property
    def dwell_elapsed(self):
        return self.dwell_ticks * self.dt

    def tick(self, avatar, dt=None):
        if dt is not None and abs(dt - self.dt) > 1e-12:
            raise ValueError(f"session runs at dt={self.dt}, got {dt}")
        if self.finished:
            return [SessionWarning(self.time_s, "tick after session complete ignored")]
        events = []
        t_begin = self.ticks * self.dt
        self.ticks += 1
        now = self.ticks * self.dt
        goal = self.active_goal

        if self.state is TrialState.PROMPT:
            self.trial_start_tick = self.ticks - 1
            self.trial_ticks = 0
            self.trace = []
            events.append(TrialPrompt(t_begin, self.index, goal.id, goal.display_name, goal.prompt))
            self.state = TrialState.NAVIGATING

        if self.trial_ticks % self.trace_every == 0:
            self.trace.append([now, avatar.x, avatar.y, avatar.heading])
        self.trial_ticks += 1

        qualifies = goal.contains(avatar.x, avatar.y) and avatar.speed < self.stationary_eps
        if self.state is TrialState.NAVIGATING and qualifies:
            self.state = TrialState.DWELLING
            self.dwell_ticks = 0
            events.append(DwellStart(now, goal.id))
        if self.state is TrialState.DWELLING:
            if qualifies:
                self.dwell_ticks += 1
            else:
                events.append(DwellReset(now, goal.id, self.dwell_elapsed))
                self.state = TrialState.NAVIGATING
                self.dwell_ticks = 0

        if self.state is TrialState.DWELLING and self.dwell_ticks >= self.required_ticks(goal):
            start = self.trial_start_tick * self.dt
            log = TrialLog(
                self.participant_id,
                self.condition.value,
                goal.id,
                self.index,
                start,
                now,
                (self.ticks - self.trial_start_tick) * self.dt,
                self.trace,
            )
            self.logs.append(log)
            self.state = TrialState.COMPLETE
            events.append(TrialComplete(now, log))
            events.append(Teleport(now, tuple(self.city.start)))
            self.index += 1
            self.dwell_ticks = 0
            if self.index >= len(self.trial_order):
                self.finished = True
                events.append(SessionComplete(now))
            else:
                self.state = TrialState.PROMPT
        return events

    def abort(self):
        """Close the active trial as aborted; returns its partial log."""
        if self.finished:
            return None
        goal = self.active_goal
        now = self.time_s
        start = self.trial_start_tick * self.dt
        log = TrialLog(
            self.participant_id,
            self.condition.value,
            goal.id,
            self.index,
            start,
            now,
            now - start,
            self.trace,
            aborted=True,
        )
        self.logs.append(log)
        self.finished = True
        return log


def make_session(city, participant_id, condition, seed, **kwargs):
    return Session(city, participant_id, condition, seed, **kwargs)


def tick_session(session, avatar, dt=None):
    return session.tick(avatar, dt)
