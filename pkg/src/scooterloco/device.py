"""Software stand-in for the scooter hardware.

The handlebar is read by a 14-bit absolute encoder; the treadmill belt by a
relative encoder whose counts are reported per frame. Frames are produced
at ``sample_rate_hz`` either from a scripted ``InputTrace`` or from live
commands via ``DeviceEmulator``.
"""
import bisect
import math
import threading
import time
from dataclasses import dataclass

import numpy as np

from .protocol import FLAG_ABS_VALID, HANDLEBAR_MAX, EncoderFrame

COUNTS_PER_TURN = HANDLEBAR_MAX + 1
_TIME_EPS = 1e-9


class InvalidTrace(ValueError):
    pass


@dataclass(frozen=True)
class DeviceCalibration:
    center_raw: int = 8192
    counts_per_meter: float = 2000.0
    sample_rate_hz: float = 100.0
    # belt speed that maps to full forward slide input
    max_slide_speed: float = 1.0

    def __post_init__(self):
        if not 0 <= self.center_raw <= HANDLEBAR_MAX:
            raise ValueError(f"center_raw {self.center_raw} outside [0, {HANDLEBAR_MAX}]")
        if not self.counts_per_meter > 0:
            raise ValueError("counts_per_meter must be positive")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if not self.max_slide_speed > 0:
            raise ValueError("max_slide_speed must be positive")

    @property
    def period_s(self):
        return 1.0 / self.sample_rate_hz


def quantize_handlebar(angle_deg, calib=DeviceCalibration()):
    if not math.isfinite(angle_deg):
        raise ValueError(f"handlebar angle must be finite, got {angle_deg}")
    counts = round(angle_deg * COUNTS_PER_TURN / 360.0)
    return (calib.center_raw + counts) % COUNTS_PER_TURN


def belt_to_counts(belt_speed_mps, dt, accumulator=0.0, calib=DeviceCalibration()):
    """Relative-encoder counts for one sample period.

    Returns ``(delta, accumulator)``; the fractional remainder is carried so
    that counts are conserved over time.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    total = accumulator + belt_speed_mps * dt * calib.counts_per_meter
    nearest = round(total)
    if abs(total - nearest) < _TIME_EPS:
        total = float(nearest)
    delta = math.trunc(total)
    return delta, total - delta


@dataclass(frozen=True)
class InputTrace:
    """Keyframes ``(time_s, handlebar_deg, belt_speed_mps)``.

    ``step`` holds each keyframe until the next; ``linear`` interpolates.
    Values before the first / after the last keyframe are held.
    """

    keyframes: tuple
    mode: str = "linear"

    def __post_init__(self):
        if self.mode not in ("step", "linear"):
            raise InvalidTrace(f"unknown interpolation mode {self.mode!r}")
        if len(self.keyframes) == 0:
            raise InvalidTrace("trace is empty")
        kf = tuple(tuple(float(v) for v in row) for row in self.keyframes)
        for row in kf:
            if len(row) != 3:
                raise InvalidTrace(f"keyframe needs 3 values, got {row}")
            if not all(math.isfinite(v) for v in row):
                raise InvalidTrace(f"non-finite keyframe {row}")
        times = [row[0] for row in kf]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidTrace("keyframe times must be strictly increasing")
        object.__setattr__(self, "keyframes", kf)
        object.__setattr__(self, "_times", times)

    @property
    def duration_s(self):
        return self.keyframes[-1][0]

    def _index(self, t):
        return bisect.bisect_right(self._times, t + _TIME_EPS) - 1

    def sample(self, t):
        """(handlebar_deg, belt_speed_mps) at time ``t``."""
        i = self._index(t)
        if i < 0:
            return self.keyframes[0][1], self.keyframes[0][2]
        if self.mode == "step" or i == len(self.keyframes) - 1:
            return self.keyframes[i][1], self.keyframes[i][2]
        t0, a0, b0 = self.keyframes[i]
        t1, a1, b1 = self.keyframes[i + 1]
        f = (t - t0) / (t1 - t0)
        return a0 + f * (a1 - a0), b0 + f * (b1 - b0)

    def belt_distance(self, t0, t1):
        """Exact integral of belt speed over ``[t0, t1]`` in metres."""
        times = self._times
        cuts = [t0] + [t for t in times if t0 < t < t1] + [t1]
        dist = 0.0
        for a, b in zip(cuts, cuts[1:]):
            if self.mode == "step":
                dist += self.sample(a)[1] * (b - a)
            else:
                dist += 0.5 * (self.sample(a)[1] + self.sample(b)[1]) * (b - a)
        return dist

    def window_speed(self, t0, t1):
        """Mean belt speed over a sample window. Inside a single step
        segment this is the segment value itself, so live commands and
        their recorded trace produce identical counts."""
        if self.mode == "step":
            i0 = self._index(t0)
            i1 = self._index(t1 - 2 * _TIME_EPS)
            if i0 == i1:
                return self.sample(t0)[1]
        return self.belt_distance(t0, t1) / (t1 - t0)


def load_trace(path):
    with open(path) as fh:
        return parse_trace(fh.read())


def parse_trace(text):
    mode = "linear"
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("mode:"):
            mode = line.split(":", 1)[1].strip().lower()
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InvalidTrace(f"line {lineno}: expected 3 columns, got {len(parts)}")
        try:
            rows.append(tuple(float(p) for p in parts))
        except ValueError:
            raise InvalidTrace(f"line {lineno}: not a number in {line!r}") from None
    return InputTrace(tuple(rows), mode)


def format_trace(trace, header=None):
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.append(f"mode: {trace.mode}")
    lines.append("# time_s handlebar_deg belt_speed_mps")
    lines.extend(f"{t!r} {a!r} {b!r}" for t, a, b in trace.keyframes)
    return "\n".join(lines) + "\n"


def save_trace(trace, path, header=None):
    with open(path, "w") as fh:
        fh.write(format_trace(trace, header))


class DeviceEmulator:
    """Frame producer state: sequence counter, device clock, belt carry."""

    def __init__(self, calib=DeviceCalibration()):
        self.calib = calib
        self.seq = 0
        self.accumulator = 0.0

    def step(self, handlebar_deg, belt_speed_mps):
        """Emit the frame for the current sample period and advance."""
        k = self.seq
        raw = quantize_handlebar(handlebar_deg, self.calib)
        delta, self.accumulator = belt_to_counts(
            belt_speed_mps, self.calib.period_s, self.accumulator, self.calib
        )
        t_ms = int(round(k * 1000.0 / self.calib.sample_rate_hz)) & 0xFFFFFFFF
        frame = EncoderFrame(k & 0xFFFFFFFF, t_ms, raw, delta, FLAG_ABS_VALID)
        self.seq += 1
        return frame


def run_trace(trace, calib=DeviceCalibration(), duration_s=None):
    """Yield frames for ``trace`` at the calibration's sample rate.

    Frame ``k`` is stamped ``k / rate``; it carries the handlebar sampled at
    that instant and the belt counts for the period that starts there.
    """
    if not isinstance(trace, InputTrace):
        raise InvalidTrace("expected an InputTrace")
    if duration_s is None:
        duration_s = trace.duration_s
    rate = calib.sample_rate_hz
    n = max(0, math.ceil(duration_s * rate - _TIME_EPS))
    emu = DeviceEmulator(calib)
    for k in range(n):
        t0 = k / rate
        t1 = (k + 1) / rate
        deg, _ = trace.sample(t0)
        yield emu.step(deg, trace.window_speed(t0, t1))


def trace_frames(trace, calib=DeviceCalibration(), duration_s=None):
    return list(run_trace(trace, calib, duration_s))


def frames_to_arrays(frames):
    """(raw, delta) int arrays from a frame sequence."""
    raw = np.fromiter((f.handlebar_raw for f in frames), dtype=np.int64)
    delta = np.fromiter((f.treadmill_delta for f in frames), dtype=np.int64)
    return raw, delta


class LiveEmitter(threading.Thread):
    """Timed producer for live use: samples the latest command at the
    device rate and hands each frame to ``sink`` (e.g. ``FrameSender.send``
    or ``queue.put``)."""

    def __init__(self, sink, calib=DeviceCalibration(), speed=1.0):
        super().__init__(daemon=True)
        self.sink = sink
        self.emu = DeviceEmulator(calib)
        self.speed = speed
        self._cmd = (0.0, 0.0)
        self._lock = threading.Lock()
        self._halt = threading.Event()

    def command(self, handlebar_deg, belt_speed_mps):
        with self._lock:
            self._cmd = (float(handlebar_deg), float(belt_speed_mps))

    def stop(self):
        self._halt.set()

    def run(self):
        period = self.emu.calib.period_s / self.speed
        next_t = time.perf_counter()
        while not self._halt.is_set():
            with self._lock:
                deg, speed = self._cmd
            self.sink(self.emu.step(deg, speed))
            next_t += period
            delay = next_t - time.perf_counter()
            if delay > 0:
                self._halt.wait(delay)
