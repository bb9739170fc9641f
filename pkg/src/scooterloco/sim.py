"""Planar avatar motion: semi-implicit Euler plus wall sliding.

World frame is top-down and matches game-engine convention: heading 0 points
along +x and heading increases toward +y, i.e. a positive yaw rate turns the
avatar to its right.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels

DT = 0.01
AVATAR_RADIUS = 0.4


@dataclass(frozen=True)
class AvatarState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0  # degrees, [0, 360)
    v: float = 0.0  # m/s along heading
    w: float = 0.0  # deg/s
    heading_ref: float = 0.0  # neutral heading for direct-heading yaw mode

    def __post_init__(self):
        for name in ("x", "y", "heading", "v", "w", "heading_ref"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "heading", kernels.wrap360(float(self.heading)))

    @property
    def speed(self):
        return abs(self.v)

    def to_array(self):
        return np.array([self.x, self.y, self.heading, self.v, self.w, self.heading_ref])

    @classmethod
    def from_array(cls, arr):
        return cls(*(float(a) for a in arr[:6]))

    def to_dict(self):
        return {"x": self.x, "y": self.y, "heading": self.heading, "v": self.v, "w": self.w}


def walls_array(walls):
    """Segments ``((ax, ay), (bx, by))`` or rows ``(ax, ay, bx, by)`` to (M, 4)."""
    if isinstance(walls, np.ndarray):
        arr = np.asarray(walls, dtype=np.float64)
    else:
        rows = []
        for seg in walls:
            flat = np.ravel(np.asarray(seg, dtype=np.float64))
            if flat.size != 4:
                raise ValueError(f"wall segment needs 4 coordinates, got {seg}")
            rows.append(flat)
        arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
    return np.ascontiguousarray(arr.reshape(-1, 4))


NO_WALLS = np.zeros((0, 4))


def integrate_pose(state: AvatarState, dt=DT) -> AvatarState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    arr = state.to_array()
    kernels.integrate_pose(arr, float(dt))
    return AvatarState.from_array(arr)


def resolve_collision(state: AvatarState, walls=NO_WALLS, radius=AVATAR_RADIUS) -> AvatarState:
    arr = state.to_array()
    kernels.resolve_collisions(arr, walls_array(walls), float(radius))
    return AvatarState.from_array(arr)


def teleport(state: AvatarState, pose) -> AvatarState:
    x, y, heading = (float(p) for p in pose)
    return AvatarState(x, y, heading, 0.0, 0.0, kernels.wrap360(heading))


class Integrator:
    """Owns the mutable state array for a tick loop."""

    def __init__(self, params, walls=NO_WALLS, radius=AVATAR_RADIUS, dt=DT, start=AvatarState()):
        self.params = params
        self.params_arr = params.as_array()
        self.walls = walls_array(walls)
        self.radius = float(radius)
        self.dt = float(dt)
        self.state = start.to_array()

    def step(self, yaw, slide):
        kernels.tick(self.state, float(yaw), float(slide), self.params_arr, self.dt, self.walls, self.radius)

    def run(self, inputs):
        """Advance through an (N, 2) array of (yaw, slide); returns (N, 5)."""
        inputs = np.ascontiguousarray(inputs, dtype=np.float64).reshape(-1, 2)
        return kernels.rollout(self.state, inputs, self.params_arr, self.dt, self.walls, self.radius)

    def teleport(self, pose):
        self.state[:] = teleport(self.avatar, pose).to_array()

    @property
    def avatar(self):
        return AvatarState.from_array(self.state)
