import math
from pathlib import Path

import pytest

import tiba

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"


def test_sizing_matches_the_reference_robot():
    r = tiba.sizing_report()
    assert r["normal_force_per_wheel"] == pytest.approx(318.5)
    assert r["gearbox_output_torque"] == pytest.approx(78.5)
    assert r["max_linear_speed"] == pytest.approx(0.4 * math.pi)
    assert r["feasible"]


def test_sizing_rejects_a_zero_gear_ratio():
    with pytest.raises(tiba.TibaError):
        tiba.sizing_report(gear_ratio=0.0)


def test_sun_sensor_round_trip():
    volts = tiba.solar_synthesize(0.3, -0.1)
    assert sum(volts) == pytest.approx(2.0)
    ax, ay = tiba.solar_estimate(*volts)
    assert ax == pytest.approx(0.3, abs=1e-12)
    assert ay == pytest.approx(-0.1, abs=1e-12)
    with pytest.raises(tiba.InsufficientLight):
        tiba.solar_estimate(0.0, 0.0, 0.0, 0.0)


def test_kinematics_quarter_circle():
    robot = tiba.RobotParams()
    twist = tiba.wheel_speeds_to_twist(tiba.twist_to_wheel_speeds(tiba.Twist(0.5, 0.5), robot), robot)
    p = tiba.integrate_pose(tiba.Pose2D(), twist, math.pi)
    assert (p.x, p.y, p.theta) == pytest.approx((1.0, 1.0, math.pi / 2), abs=1e-9)


def test_wheel_command_frames():
    frame_id, payload = tiba.encode_wheel_command(1.0, -2.5)
    assert frame_id == 0x201
    assert payload == bytes([0xE8, 0x03, 0x00, 0x00, 0x3C, 0xF6, 0xFF, 0xFF])
    assert tiba.decode_wheel_command(payload) == (1.0, -2.5)
    with pytest.raises(tiba.MalformedFrame):
        tiba.decode_wheel_command(payload[:7])


def test_run_and_replay_a_scenario():
    text = (SCENARIOS / "h1.cfg").read_text()
    metrics, log = tiba.run(text, seed=4)
    assert metrics["completion"]
    assert metrics["stem_collisions"] == 0
    assert metrics["cross_track_max"] < 0.3
    assert tiba.metrics(log) == metrics
    identical, replayed = tiba.replay(log)
    assert identical
    assert replayed == metrics


def test_bad_configuration_raises():
    with pytest.raises(tiba.ConfigError):
        tiba.run("nav.mode = autopilot")
    with pytest.raises(tiba.ConfigError):
        tiba.metrics("")
    with pytest.raises(tiba.CorruptLog):
        tiba.metrics("not a log\n")
