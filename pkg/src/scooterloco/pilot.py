"""Scripted pure-pursuit pilot: a headless stand-in for a participant."""
import math

import numpy as np

from . import kernels
from .mapping import MotionParams, NormalizedInput, Source

DEFAULT_LOOKAHEAD = 8.0
SLOW_TURN_DEG = 45.0
FULL_TURN_DEG = 90.0
MIN_TURN_SLIDE = 0.2


def _closest_on_path(pts, x, y):
    best = (math.inf, 0, 0.0)
    for i in range(len(pts) - 1):
        ax, ay = pts[i]
        ex, ey = pts[i + 1][0] - ax, pts[i + 1][1] - ay
        len2 = ex * ex + ey * ey
        t = 0.0 if len2 == 0.0 else min(1.0, max(0.0, ((x - ax) * ex + (y - ay) * ey) / len2))
        dx, dy = ax + t * ex - x, ay + t * ey - y
        d2 = dx * dx + dy * dy
        if d2 < best[0]:
            best = (d2, i, t)
    return best[1], best[2]


def lookahead_point(pts, x, y, lookahead):
    """Farthest point along the path, from the closest point onward, that
    stays within ``lookahead`` of (x, y)."""
    i, t = _closest_on_path(pts, x, y)
    ax, ay = pts[i]
    px = ax + t * (pts[i + 1][0] - ax)
    py = ay + t * (pts[i + 1][1] - ay)
    target = (px, py)
    r2 = lookahead * lookahead
    for j in range(i, len(pts) - 1):
        sx, sy = (px, py) if j == i else pts[j]
        bx, by = pts[j + 1]
        if (bx - x) ** 2 + (by - y) ** 2 <= r2:
            target = (bx, by)
            continue
        # exit point: largest u in [0, 1] with |s + u (b - s) - p| = lookahead
        ex, ey = bx - sx, by - sy
        fx, fy = sx - x, sy - y
        a = ex * ex + ey * ey
        b = 2.0 * (fx * ex + fy * ey)
        c = fx * fx + fy * fy - r2
        disc = b * b - 4.0 * a * c
        if a > 0.0 and disc >= 0.0 and c <= 0.0:
            u = (-b + math.sqrt(disc)) / (2.0 * a)
            u = min(1.0, max(0.0, u))
            target = (sx + u * ex, sy + u * ey)
        break
    return target


def _slide_for_speed(speed, params):
    if speed >= params.max_linear_speed:
        return 1.0
    if speed <= 0.0:
        return 0.0
    frac = (speed / params.max_linear_speed) ** (1.0 / params.curve_exponent) if params.curve_exponent > 0 else 1.0
    return params.deadzone + (1.0 - params.deadzone) * frac


def scripted_pilot(
    avatar,
    path,
    lookahead=DEFAULT_LOOKAHEAD,
    goal_radius=2.0,
    params=MotionParams(),
    pace=1.0,
    brake_fraction=0.8,
    source=Source.SCOOTER,
    time_s=0.0,
):
    """Steer toward the lookahead point; ease off in sharp turns, brake into
    the goal at the end of ``path`` and hold still once inside it."""
    pts = np.asarray(path, dtype=np.float64)
    if len(pts) == 0:
        raise ValueError("path is empty")
    gx, gy = pts[-1]
    to_goal = math.hypot(gx - avatar.x, gy - avatar.y)
    if to_goal <= goal_radius:
        return NormalizedInput(0.0, 0.0, source, time_s)
    if len(pts) == 1:
        tx, ty = gx, gy
    else:
        tx, ty = lookahead_point(pts.tolist(), avatar.x, avatar.y, lookahead)
    dx, dy = tx - avatar.x, ty - avatar.y
    if dx * dx + dy * dy < 1e-12:
        err = 0.0
    else:
        err = kernels.wrap180(math.degrees(math.atan2(dy, dx)) - avatar.heading)
    yaw = max(-1.0, min(1.0, err / FULL_TURN_DEG))

    abs_err = abs(err)
    if abs_err < SLOW_TURN_DEG:
        slide = 1.0
    elif abs_err >= FULL_TURN_DEG:
        slide = MIN_TURN_SLIDE
    else:
        f = (abs_err - SLOW_TURN_DEG) / (FULL_TURN_DEG - SLOW_TURN_DEG)
        slide = 1.0 - f * (1.0 - MIN_TURN_SLIDE)
    slide *= pace
    v_cap = math.sqrt(2.0 * brake_fraction * params.linear_accel_limit * to_goal)
    slide = min(slide, _slide_for_speed(v_cap, params))
    return NormalizedInput(yaw, slide, source, time_s)


class Pilot:
    """Pilot bound to a parameter set; call with (avatar, path)."""

    def __init__(self, params=MotionParams(), lookahead=DEFAULT_LOOKAHEAD, goal_radius=2.0, pace=1.0):
        self.params = params
        self.lookahead = lookahead
        self.goal_radius = goal_radius
        self.pace = pace

    def __call__(self, avatar, path, source=Source.SCOOTER, time_s=0.0):
        return scripted_pilot(
            avatar,
            path,
            self.lookahead,
            self.goal_radius,
            self.params,
            self.pace,
            source=source,
            time_s=time_s,
        )
