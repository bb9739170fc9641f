"""Hot numeric kernels.

Everything the 100 Hz tick loop touches lives here, plus the exact
signed-rank null distribution. With numba available these are compiled
with ``@njit``; otherwise they run as Python, and the two loops that have a
natural vectorised form (wall contact, rank-sum convolution) switch to numpy.

Array layouts
-------------
state  : float64[6]  x, y, heading_deg, v, w_deg, heading_ref_deg
params : float64[7]  max_v, max_w, lin_acc, ang_acc, gamma, deadzone, yaw_mode
walls  : float64[M, 4] ax, ay, bx, by
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

X, Y, HEADING, V, W, HEADING_REF = range(6)
P_MAX_V, P_MAX_W, P_LIN_ACC, P_ANG_ACC, P_GAMMA, P_DEADZONE, P_YAW_MODE = range(7)

YAW_RATE = 0.0
YAW_DIRECT = 1.0

# direct-heading tracking: time constant of the heading servo and the
# handlebar span mapped one-to-one onto heading offset
DIRECT_TAU_S = 0.25
DIRECT_SPAN_DEG = 90.0


@njit(cache=True)
def clamp(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


@njit(cache=True)
def deadzone(x, dz):
    ax = abs(x)
    if ax <= dz:
        return 0.0
    r = (ax - dz) / (1.0 - dz)
    if x < 0.0:
        return -r
    return r


@njit(cache=True)
def wrap360(deg):
    if 0.0 <= deg < 360.0:
        return deg
    r = deg - 360.0 * math.floor(deg / 360.0)
    if r >= 360.0:
        r -= 360.0
    return r


@njit(cache=True)
def wrap180(deg):
    r = wrap360(deg + 180.0) - 180.0
    return r


@njit(cache=True)
def slide_to_speed(slide, params):
    s = deadzone(slide, params[P_DEADZONE])
    if s == 0.0:
        return 0.0
    mag = abs(s) ** params[P_GAMMA]
    if s < 0.0:
        mag = -mag
    return params[P_MAX_V] * mag


@njit(cache=True)
def target_velocities(yaw, slide, state, params):
    v_t = slide_to_speed(slide, params)
    d_yaw = deadzone(yaw, params[P_DEADZONE])
    max_w = params[P_MAX_W]
    if params[P_YAW_MODE] == YAW_DIRECT:
        desired = state[HEADING_REF] + DIRECT_SPAN_DEG * d_yaw
        err = wrap180(desired - state[HEADING])
        w_t = clamp(err / DIRECT_TAU_S, -max_w, max_w)
    else:
        w_t = max_w * d_yaw
    return v_t, w_t


@njit(cache=True)
def clamp_step(current, target, accel_limit, dt):
    step = accel_limit * dt
    delta = target - current
    if delta > step:
        delta = step
    elif delta < -step:
        delta = -step
    return current + delta


@njit(cache=True)
def integrate_pose(state, dt):
    h = wrap360(state[HEADING] + state[W] * dt)
    rad = math.radians(h)
    dist = state[V] * dt
    state[HEADING] = h
    state[X] = state[X] + dist * math.cos(rad)
    state[Y] = state[Y] + dist * math.sin(rad)


@njit(cache=True)
def _push_out(state, ax, ay, bx, by, radius):
    px = state[X]
    py = state[Y]
    ex = bx - ax
    ey = by - ay
    len2 = ex * ex + ey * ey
    t = 0.0
    if len2 > 0.0:
        t = clamp(((px - ax) * ex + (py - ay) * ey) / len2, 0.0, 1.0)
    cx = ax + t * ex
    cy = ay + t * ey
    dx = px - cx
    dy = py - cy
    dist = math.sqrt(dx * dx + dy * dy)
    if dist >= radius:
        return False
    if dist > 1e-12:
        nx = dx / dist
        ny = dy / dist
    elif len2 > 0.0:
        seg = math.sqrt(len2)
        nx = -ey / seg
        ny = ex / seg
    else:
        nx = 1.0
        ny = 0.0
    state[X] = cx + nx * radius
    state[Y] = cy + ny * radius
    rad = math.radians(state[HEADING])
    hx = math.cos(rad)
    hy = math.sin(rad)
    if state[V] * (hx * nx + hy * ny) < 0.0:
        # keep only the along-wall part, then re-project onto the heading
        along = hx * -ny + hy * nx
        if abs(along) < 1e-9:
            along = 0.0
        state[V] = state[V] * along * along
    return True


if USE_NUMBA:

    @njit(cache=True)
    def resolve_collisions(state, walls, radius):
        hits = 0
        for i in range(walls.shape[0]):
            if _push_out(state, walls[i, 0], walls[i, 1], walls[i, 2], walls[i, 3], radius):
                hits += 1
        return hits

else:

    def resolve_collisions(state, walls, radius):
        if walls.shape[0] == 0:
            return 0
        # prefilter vectorised; pushes are at most `radius` each, so walls
        # beyond 3 radii cannot be reached by a chain of contacts
        a = walls[:, 0:2]
        e = walls[:, 2:4] - a
        p = np.array([state[X], state[Y]])
        len2 = np.einsum("ij,ij->i", e, e)
        safe = np.where(len2 > 0.0, len2, 1.0)
        t = np.clip(((p - a) * e).sum(axis=1) / safe, 0.0, 1.0)
        t = np.where(len2 > 0.0, t, 0.0)
        d = p - (a + t[:, None] * e)
        near = np.flatnonzero(np.einsum("ij,ij->i", d, d) < (3.0 * radius) ** 2)
        hits = 0
        for i in near:
            if _push_out(state, walls[i, 0], walls[i, 1], walls[i, 2], walls[i, 3], radius):
                hits += 1
        return hits


@njit(cache=True)
def tick(state, yaw, slide, params, dt, walls, radius):
    """Advance one fixed step: targets, accel clamp, pose, collision."""
    v_t, w_t = target_velocities(yaw, slide, state, params)
    state[V] = clamp_step(state[V], v_t, params[P_LIN_ACC], dt)
    state[W] = clamp_step(state[W], w_t, params[P_ANG_ACC], dt)
    integrate_pose(state, dt)
    resolve_collisions(state, walls, radius)


@njit(cache=True)
def rollout(state, inputs, params, dt, walls, radius):
    """Run ``tick`` over an (N, 2) array of (yaw, slide); returns (N, 5)
    rows of x, y, heading, v, w after each tick. ``state`` is advanced in
    place."""
    n = inputs.shape[0]
    out = np.empty((n, 5))
    for k in range(n):
        tick(state, inputs[k, 0], inputs[k, 1], params, dt, walls, radius)
        for j in range(5):
            out[k, j] = state[j]
    return out


if USE_NUMBA:

    @njit(cache=True)
    def signed_rank_counts(doubled_ranks):
        """Number of sign assignments reaching each doubled rank sum."""
        total = 0
        for r in doubled_ranks:
            total += r
        counts = np.zeros(total + 1, dtype=np.int64)
        counts[0] = 1
        reach = 0
        for r in doubled_ranks:
            reach += r
            for s in range(reach, r - 1, -1):
                counts[s] += counts[s - r]
        return counts

else:

    def signed_rank_counts(doubled_ranks):
        """Number of sign assignments reaching each doubled rank sum."""
        doubled_ranks = np.asarray(doubled_ranks, dtype=np.int64)
        counts = np.zeros(int(doubled_ranks.sum()) + 1, dtype=np.int64)
        counts[0] = 1
        for r in doubled_ranks:
            shifted = np.zeros_like(counts)
            shifted[r:] = counts[: counts.size - r]
            counts = counts + shifted
        return counts


@njit(cache=True)
def count_as_extreme(counts, observed_doubled):
    """Sign patterns whose rank sum is at least as far from the centre as
    the observed one (doubled units, integer arithmetic)."""
    total = counts.shape[0] - 1
    dev = abs(2 * observed_doubled - total)
    n = 0
    for s in range(total + 1):
        if abs(2 * s - total) >= dev:
            n += counts[s]
    return n
