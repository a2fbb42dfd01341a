"""Small shared helpers."""

import math


def wrap_angle(theta_rad: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.fmod(theta_rad + math.pi, 2.0 * math.pi)
    if w < 0.0:
        w += 2.0 * math.pi
    w -= math.pi
    if w == -math.pi:
        w = math.pi
    return w


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x
