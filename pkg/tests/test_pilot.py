import pytest

from scooterloco import host
from scooterloco.mapping import MotionParams
from scooterloco.pilot import Pilot, lookahead_point, scripted_pilot
from scooterloco.sim import AvatarState

PATH = [(0.0, 0.0), (100.0, 0.0), (100.0, 100.0)]


def test_aligned_on_path_full_speed():
    cmd = scripted_pilot(AvatarState(10.0, 0.0, 0.0), PATH)
    assert (cmd.yaw_input, cmd.slide_input) == (0.0, 1.0)


def test_target_to_the_side_saturates_and_slows():
    # lookahead point at +90 deg heading offset
    cmd = scripted_pilot(AvatarState(100.0, 10.0, 0.0), PATH)
    assert cmd.yaw_input == 1.0
    assert cmd.slide_input == pytest.approx(0.2)
    cmd = scripted_pilot(AvatarState(100.0, 10.0, 180.0), PATH)
    assert cmd.yaw_input == -1.0


def test_holds_still_in_goal():
    cmd = scripted_pilot(AvatarState(100.0, 99.0, 90.0), PATH)
    assert (cmd.yaw_input, cmd.slide_input) == (0.0, 0.0)


def test_brakes_near_goal():
    far = scripted_pilot(AvatarState(100.0, 50.0, 90.0), PATH)
    near = scripted_pilot(AvatarState(100.0, 97.5, 90.0), PATH)
    assert far.slide_input == 1.0 and 0.0 < near.slide_input < 1.0


def test_lookahead_point_on_segment():
    assert lookahead_point([list(p) for p in PATH], 10.0, 0.0, 8.0) == pytest.approx((18.0, 0.0))
    # corner inside the circle: target continues onto the next leg
    tx, ty = lookahead_point([list(p) for p in PATH], 97.0, 0.0, 8.0)
    assert tx == pytest.approx(100.0) and 0.0 < ty < 8.0


def test_empty_path_rejected():
    with pytest.raises(ValueError):
        scripted_pilot(AvatarState(), [])


@pytest.mark.slow
def test_pizzeria_within_envelope(city):
    params = MotionParams()
    session = host.single_goal_session(city, "P01", "scooter", "pizzeria")
    pipe = host.Pipeline(city, params, session)
    host.run_pilot_session(pipe, Pilot(params))
    (log,) = session.logs
    assert not log.aborted
    assert 60.0 <= log.completion_time_s <= 120.0
