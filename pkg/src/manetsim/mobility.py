"""Random-waypoint mobility.

Each node repeatedly draws a uniform target in the field and a uniform
speed, travels straight to it, pauses, and repeats.  The state carries
its own clock in microseconds so it can be advanced exactly to any
instant, independent of how often the kernel samples positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(slots=True)
class WaypointState:
    x: float
    y: float
    target_x: float
    target_y: float
    speed: float          # m/s; 0 means the node never moves
    pause_until_us: float
    t_us: float           # state clock; position is valid at this time


def initial_state(field_x: float, field_y: float, v_min: float, v_max: float,
                  rng: np.random.Generator) -> WaypointState:
    """Uniform starting position, already heading for its first target."""
    x = rng.uniform(0.0, field_x)
    y = rng.uniform(0.0, field_y)
    return initial_state_at(x, y, field_x, field_y, v_min, v_max, rng)


def initial_state_at(x: float, y: float, field_x: float, field_y: float,
                     v_min: float, v_max: float,
                     rng: np.random.Generator) -> WaypointState:
    """Start from a pinned position (scripted topologies)."""
    tx, ty, speed = _draw_leg(field_x, field_y, v_min, v_max, rng)
    return WaypointState(x, y, tx, ty, speed, 0.0, 0.0)


def _draw_leg(field_x, field_y, v_min, v_max, rng):
    tx = rng.uniform(0.0, field_x)
    ty = rng.uniform(0.0, field_y)
    speed = rng.uniform(v_min, v_max)
    return tx, ty, speed


def advance(state: WaypointState, to_us: float, field_x: float, field_y: float,
            v_min: float, v_max: float, pause_us: float,
            rng: np.random.Generator) -> WaypointState:
    """Move the waypoint process forward to absolute time to_us (in place)."""
    while state.t_us < to_us:
        if state.pause_until_us > state.t_us:
            state.t_us = min(state.pause_until_us, to_us)
            continue
        if state.speed <= 0.0:
            state.t_us = to_us
            break
        dx = state.target_x - state.x
        dy = state.target_y - state.y
        dist = (dx * dx + dy * dy) ** 0.5
        travel_us = dist / state.speed * 1e6
        if state.t_us + travel_us <= to_us:
            # reach the target, then pause and pick the next leg
            state.x = state.target_x
            state.y = state.target_y
            state.t_us += travel_us
            state.pause_until_us = state.t_us + pause_us
            state.target_x, state.target_y, state.speed = _draw_leg(
                field_x, field_y, v_min, v_max, rng)
        else:
            frac = (to_us - state.t_us) / travel_us
            state.x += dx * frac
            state.y += dy * frac
            state.t_us = to_us
    return state
