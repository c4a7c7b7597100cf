"""Skid-steer tankette simulator for sugarcane row tunnels."""

from ._tiba import (
    ConfigError,
    CorruptLog,
    DivisionByZero,
    IllConditioned,
    InsufficientLight,
    InvalidParams,
    InvalidSpec,
    MalformedFrame,
    NoCorridor,
    NoPath,
    OutOfBounds,
    Pose2D,
    RobotParams,
    TibaError,
    Twist,
    WheelSpeeds,
    decode_wheel_command,
    encode_wheel_command,
    integrate_pose,
    metrics,
    replay,
    run,
    sizing_report,
    solar_estimate,
    solar_synthesize,
    twist_to_wheel_speeds,
    wheel_speeds_to_twist,
)

__all__ = [name for name in dir() if not name.startswith("_")]
