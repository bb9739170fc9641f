"""Raw device input and joystick axes to normalised input and target velocities.

Both sources end in the same ``NormalizedInput`` and pass through the same
``MotionParams``, so the motion profile is identical whichever device
produced the numbers.
"""
import enum
import logging
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import kernels
from .device import COUNTS_PER_TURN, DeviceCalibration
from .protocol import HANDLEBAR_MAX, FieldOutOfRange

log = logging.getLogger(__name__)

HANDLEBAR_SPAN_DEG = 90.0


class Source(str, enum.Enum):
    SCOOTER = "scooter"
    JOYSTICK = "joystick"


class YawMode(str, enum.Enum):
    RATE = "rate"
    DIRECT = "direct"


def _clamp_unit(x):
    return min(1.0, max(-1.0, x))


@dataclass(frozen=True)
class NormalizedInput:
    yaw_input: float = 0.0
    slide_input: float = 0.0
    source: Source = Source.SCOOTER
    time_s: float = 0.0

    def __post_init__(self):
        for name in ("yaw_input", "slide_input"):
            value = float(getattr(self, name))
            if math.isnan(value):
                raise ValueError(f"{name} is NaN")
            object.__setattr__(self, name, _clamp_unit(value))
        object.__setattr__(self, "source", Source(self.source))

    def to_dict(self):
        return {
            "yaw": self.yaw_input,
            "slide": self.slide_input,
            "source": self.source.value,
            "time_s": self.time_s,
        }


NEUTRAL = NormalizedInput()


@dataclass(frozen=True)
class MotionParams:
    max_linear_speed: float = 5.0  # m/s
    max_angular_speed: float = 90.0  # deg/s
    linear_accel_limit: float = 4.0  # m/s^2
    angular_accel_limit: float = 360.0  # deg/s^2
    curve_exponent: float = 1.0
    deadzone: float = 0.05
    yaw_mode: YawMode = YawMode.RATE

    def __post_init__(self):
        object.__setattr__(self, "yaw_mode", YawMode(self.yaw_mode))
        for name in ("max_linear_speed", "max_angular_speed", "linear_accel_limit", "angular_accel_limit"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value}")
        if not (math.isfinite(self.curve_exponent) and self.curve_exponent >= 0):
            raise ValueError(f"curve_exponent must be >= 0, got {self.curve_exponent}")
        if not 0 <= self.deadzone < 1:
            raise ValueError(f"deadzone must be in [0, 1), got {self.deadzone}")

    def as_array(self):
        mode = kernels.YAW_DIRECT if self.yaw_mode is YawMode.DIRECT else kernels.YAW_RATE
        return np.array(
            [
                self.max_linear_speed,
                self.max_angular_speed,
                self.linear_accel_limit,
                self.angular_accel_limit,
                self.curve_exponent,
                self.deadzone,
                mode,
            ],
            dtype=np.float64,
        )


_PARAM_UNITS = {
    "max_linear_speed": "m/s",
    "max_angular_speed": "deg/s",
    "linear_accel_limit": "m/s^2",
    "angular_accel_limit": "deg/s^2",
    "curve_exponent": "dimensionless, applied to slide only",
    "deadzone": "fraction of axis travel",
    "yaw_mode": "rate | direct",
}


def parse_params(text):
    known = {f.name for f in fields(MotionParams)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown parameter {key!r}")
        values[key] = value if key == "yaw_mode" else float(value)
    return MotionParams(**values)


def load_params(path):
    with open(path) as fh:
        return parse_params(fh.read())


def format_params(params):
    lines = ["# motion parameters shared by every input condition"]
    for key, value in asdict(params).items():
        if isinstance(value, enum.Enum):
            value = value.value
        lines.append(f"{key} = {value}  # {_PARAM_UNITS[key]}")
    return "\n".join(lines) + "\n"


def save_params(params, path):
    with open(path, "w") as fh:
        fh.write(format_params(params))


def handlebar_angle(raw, calib=DeviceCalibration()):
    """Signed angle from neutral in degrees, shortest way round."""
    if not 0 <= raw <= HANDLEBAR_MAX:
        raise FieldOutOfRange(f"handlebar_raw={raw} outside [0, {HANDLEBAR_MAX}]")
    diff = (raw - calib.center_raw) % COUNTS_PER_TURN
    if diff >= COUNTS_PER_TURN // 2:
        diff -= COUNTS_PER_TURN
    return diff * 360.0 / COUNTS_PER_TURN


def handlebar_to_yaw(raw, calib=DeviceCalibration()):
    return _clamp_unit(handlebar_angle(raw, calib) / HANDLEBAR_SPAN_DEG)


def counts_to_slide(delta, dt, calib=DeviceCalibration(), max_slide_speed=None):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if max_slide_speed is None:
        max_slide_speed = calib.max_slide_speed
    belt_speed = delta / (calib.counts_per_meter * dt)
    return _clamp_unit(belt_speed / max_slide_speed)


def frame_to_input(frame, calib=DeviceCalibration(), time_s=0.0, dt=None):
    return NormalizedInput(
        handlebar_to_yaw(frame.handlebar_raw, calib),
        counts_to_slide(frame.treadmill_delta, dt or calib.period_s, calib),
        Source.SCOOTER,
        time_s,
    )


def joystick_to_input(left_y, right_x, time_s=0.0):
    """Left stick Y drives translation, right stick X drives yaw."""
    axes = {"left_y": float(left_y), "right_x": float(right_x)}
    for name, value in axes.items():
        if math.isnan(value):
            raise ValueError(f"{name} is NaN")
        if abs(value) > 1.0:
            log.warning("joystick %s=%.4f overshoots [-1, 1]; clamped", name, value)
    return NormalizedInput(axes["right_x"], axes["left_y"], Source.JOYSTICK, time_s)


def deadzone(x, width):
    return kernels.deadzone(float(x), float(width))


def target_velocities(inp, params, heading_deg=0.0, heading_ref_deg=0.0):
    """(v m/s, w deg/s). Heading arguments only matter in direct-heading mode."""
    state = np.array([0.0, 0.0, heading_deg, 0.0, 0.0, heading_ref_deg])
    return kernels.target_velocities(inp.yaw_input, inp.slide_input, state, params.as_array())


def clamp_step(current, target, accel_limit, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not accel_limit > 0:
        raise ValueError("accel_limit must be positive")
    return kernels.clamp_step(float(current), float(target), float(accel_limit), float(dt))
