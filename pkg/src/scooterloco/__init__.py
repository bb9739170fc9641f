"""Scooter-style locomotion stack: device emulation, wire protocol, input
mapping, motion model, trial harness, host runtime and analysis."""
from ._accel import BACKEND
from .device import DeviceCalibration, DeviceEmulator, InputTrace
from .mapping import MotionParams, NormalizedInput, Source, YawMode
from .protocol import EncoderFrame, decode_frame, encode_frame
from .sim import AvatarState, Integrator
from .tasks import CityMap, Session, TrialLog, default_map, load_map

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AvatarState",
    "CityMap",
    "DeviceCalibration",
    "DeviceEmulator",
    "EncoderFrame",
    "InputTrace",
    "Integrator",
    "MotionParams",
    "NormalizedInput",
    "Session",
    "Source",
    "TrialLog",
    "YawMode",
    "decode_frame",
    "default_map",
    "encode_frame",
    "load_map",
]
