import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scooterloco.mapping import (
    MotionParams,
    NormalizedInput,
    Source,
    YawMode,
    clamp_step,
    counts_to_slide,
    deadzone,
    format_params,
    frame_to_input,
    handlebar_to_yaw,
    joystick_to_input,
    parse_params,
    target_velocities,
)
from scooterloco.protocol import EncoderFrame, FieldOutOfRange

unit = st.floats(-1.0, 1.0)


@pytest.mark.parametrize("raw,yaw", [(8192, 0.0), (12288, 1.0), (10240, 0.5), (4096, -1.0), (0, -1.0)])
def test_handlebar_to_yaw(raw, yaw):
    assert handlebar_to_yaw(raw) == yaw


def test_handlebar_rejects_out_of_range():
    with pytest.raises(FieldOutOfRange):
        handlebar_to_yaw(16384)


@pytest.mark.parametrize("delta,slide", [(0, 0.0), (20, 1.0), (-10, -0.5), (400, 1.0)])
def test_counts_to_slide(delta, slide):
    assert counts_to_slide(delta, 0.01) == slide


def test_frame_to_input():
    inp = frame_to_input(EncoderFrame(0, 0, 10240, 10))
    assert (inp.yaw_input, inp.slide_input, inp.source) == (0.5, 0.5, Source.SCOOTER)


@pytest.mark.parametrize("left_y,right_x,yaw,slide", [(0, 0, 0, 0), (1.0, 0, 0, 1.0), (0, -1.0, -1.0, 0)])
def test_joystick_axes(left_y, right_x, yaw, slide):
    inp = joystick_to_input(left_y, right_x)
    assert (inp.yaw_input, inp.slide_input, inp.source) == (yaw, slide, Source.JOYSTICK)


def test_joystick_overshoot_clamped_and_logged(caplog):
    inp = joystick_to_input(1.2, 0.0)
    assert inp.slide_input == 1.0
    assert "overshoots" in caplog.text


def test_normalized_input_rejects_nan():
    with pytest.raises(ValueError):
        NormalizedInput(math.nan, 0.0)


def test_target_velocity_examples():
    assert target_velocities(NormalizedInput(0, 0), MotionParams()) == (0.0, 0.0)
    p1 = MotionParams(curve_exponent=1.0, deadzone=0.0)
    assert target_velocities(NormalizedInput(0.0, 1.0), p1) == (5.0, 0.0)
    p2 = MotionParams(curve_exponent=2.0, deadzone=0.0)
    assert target_velocities(NormalizedInput(0.5, 0.5), p2) == pytest.approx((1.25, 45.0), abs=1e-12)


def test_backward_slide_gives_negative_speed():
    v, _ = target_velocities(NormalizedInput(0.0, -0.5), MotionParams(deadzone=0.0))
    assert v == -2.5


def test_direct_heading_mode_servos_to_offset():
    p = MotionParams(yaw_mode=YawMode.DIRECT, deadzone=0.0)
    # already at ref + 45 deg with yaw 0.5: no correction needed
    assert target_velocities(NormalizedInput(0.5, 0.0), p, heading_deg=45.0)[1] == 0.0
    _, w = target_velocities(NormalizedInput(0.5, 0.0), p, heading_deg=0.0)
    assert w == 90.0  # 45 / 0.25 s = 180, capped
    _, w = target_velocities(NormalizedInput(0.0, 0.0), p, heading_deg=10.0)
    assert w == -40.0


def test_clamp_step_examples():
    assert clamp_step(0.0, 2.0, 4.0, 0.01) == pytest.approx(0.04)
    assert clamp_step(2.0, 2.0, 4.0, 0.01) == 2.0
    v = 0.0
    for k in range(125):
        v = clamp_step(v, 5.0, 4.0, 0.01)
        if k < 124:
            assert v < 5.0
    assert v == pytest.approx(5.0, abs=1e-12)


def test_clamp_step_rejects_bad_args():
    with pytest.raises(ValueError):
        clamp_step(0, 1, 4.0, 0.0)
    with pytest.raises(ValueError):
        clamp_step(0, 1, -1.0, 0.01)


@given(st.floats(0.0, 0.9), unit)
def test_deadzone_odd_and_bounded(width, x):
    assert deadzone(-x, width) == -deadzone(x, width)
    assert abs(deadzone(x, width)) <= 1.0
    if abs(x) <= width:
        assert deadzone(x, width) == 0.0


@given(unit)
def test_deadzone_zero_is_identity(x):
    assert deadzone(x, 0.0) == x


@given(st.floats(0.0, 0.9), st.floats(-1, 1), st.floats(1e-9, 1e-6))
def test_deadzone_continuous(width, x, h):
    assert abs(deadzone(min(1.0, x + h), width) - deadzone(x, width)) <= h / (1 - width) + 1e-12


@given(unit, unit, unit, st.floats(0.0, 4.0), st.floats(0.0, 0.5))
def test_targets_bounded_and_monotone(yaw, s1, s2, gamma, dz):
    p = MotionParams(curve_exponent=gamma, deadzone=dz)
    lo, hi = sorted((s1, s2))
    v_lo, w_lo = target_velocities(NormalizedInput(yaw, lo), p)
    v_hi, w_hi = target_velocities(NormalizedInput(yaw, hi), p)
    assert v_lo <= v_hi
    assert w_lo == w_hi
    assert abs(v_hi) <= p.max_linear_speed and abs(w_hi) <= p.max_angular_speed


@pytest.mark.parametrize(
    "kwargs",
    [dict(max_linear_speed=0), dict(max_angular_speed=math.inf), dict(curve_exponent=-1), dict(deadzone=1.0),
     dict(yaw_mode="sideways")],
)
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        MotionParams(**kwargs)


def test_params_file_round_trip():
    p = MotionParams(max_linear_speed=4.5, curve_exponent=1.7, yaw_mode=YawMode.DIRECT)
    assert parse_params(format_params(p)) == p


def test_params_file_unknown_key():
    with pytest.raises(ValueError, match="unknown parameter"):
        parse_params("max_linear_speed = 3\nturbo = 1\n")


def test_params_array_layout():
    arr = MotionParams().as_array()
    assert arr.dtype == np.float64 and arr.shape == (7,)
