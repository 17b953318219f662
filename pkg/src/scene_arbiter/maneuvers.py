"""Path-tracking drivers that turn a hypothesised behavior into controls.

Both the threat predictor (open-loop rollouts) and the closed-loop simulator
use these, so a predicted lane change and a simulated one follow the same
path and speed law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Polyline, wrap_angle
from .kinematics import ControlInput, ControlLimits, DEFAULT_LIMITS, KinematicState, step_single_track
from .world import Agent, Road


@dataclass(frozen=True)
class ManeuverParams:
    lane_change_duration: float = 3.0
    min_lane_change_length: float = 10.0
    object_stop_decel: float = 2.0
    reduce_speed_decel: float = 2.0
    reduce_speed_floor: float = 0.0
    emergency_decel: float = 4.0
    lookahead_time: float = 0.8
    min_lookahead: float = 4.0
    speed_gain: float = 0.5
    # heading misalignment beyond which an agent is not treated as lane-bound
    lane_alignment_tol: float = math.pi / 4


class PathFollower:
    """Pure-pursuit steering along a polyline plus a simple speed law.

    speed_mode: "hold" (a = 0), "decel" (brake at ``decel`` down to
    ``floor``) or "target" (proportional tracking of ``target_speed``).
    """

    def __init__(self, path: Polyline, speed_mode: str = "hold", decel: float = 0.0,
                 floor: float = 0.0, target_speed: float = 0.0,
                 params: ManeuverParams = ManeuverParams(), limits: ControlLimits = DEFAULT_LIMITS):
        if speed_mode not in ("hold", "decel", "target"):
            raise ValueError(f"unknown speed mode {speed_mode!r}")
        self.path = path
        self.speed_mode = speed_mode
        self.decel = decel
        self.floor = floor
        self.target_speed = target_speed
        self.params = params
        self.limits = limits
        self._hint: int | None = None

    def steering(self, st: KinematicState) -> float:
        s, _, self._hint = self.path.project(st.x, st.y, self._hint)
        lookahead = max(self.params.min_lookahead, self.params.lookahead_time * st.speed)
        tx, ty = self.path.point_at(s + lookahead)
        dx, dy = tx - st.x, ty - st.y
        dist = math.hypot(dx, dy)
        if dist == 0.0:
            return 0.0
        alpha = wrap_angle(math.atan2(dy, dx) - st.heading)
        delta = math.atan2(2.0 * st.wheelbase * math.sin(alpha), dist)
        m = self.limits.max_steering
        return min(max(delta, -m), m)

    def accel(self, st: KinematicState, dt: float) -> float:
        a_max = self.limits.max_accel
        if self.speed_mode == "hold":
            return 0.0
        if self.speed_mode == "decel":
            if st.speed <= self.floor:
                return 0.0
            # floor 0 lets the step's own clamp stop the vehicle
            a = self.decel if self.floor == 0.0 else min(self.decel, (st.speed - self.floor) / dt)
            return -min(a, a_max)
        a = self.params.speed_gain * (self.target_speed - st.speed)
        return min(max(a, -a_max), a_max)

    def control(self, st: KinematicState, dt: float) -> ControlInput:
        return ControlInput(self.steering(st), self.accel(st, dt))


def straight_path(x: float, y: float, heading: float, length: float = 100.0) -> Polyline:
    return Polyline([(x, y), (x + length * math.cos(heading), y + length * math.sin(heading))])


def lane_change_path(src: Polyline, dst: Polyline, x: float, y: float, speed: float,
                     params: ManeuverParams, reach: float) -> Polyline:
    """Smoothstep blend from ``src`` onto ``dst`` starting abreast of (x, y).

    The transition spans ``speed * lane_change_duration`` metres of arc; the
    path continues along ``dst`` until ``reach`` metres past the start.
    """
    s0 = src.project(x, y)[0]
    span = max(params.min_lane_change_length, speed * params.lane_change_duration)
    n_blend = max(8, int(math.ceil(span / 2.0)))
    pts = []
    for j in range(n_blend + 1):
        u = j / n_blend
        w = u * u * (3.0 - 2.0 * u)
        ax, ay = src.point_at(s0 + u * span)
        bx, by = dst.point_at(dst.project(ax, ay)[0])
        pts.append(((1.0 - w) * ax + w * bx, (1.0 - w) * ay + w * by))
    sd = dst.project(*pts[-1])[0]
    tail = max(reach - span, 20.0)
    n_tail = max(2, int(math.ceil(tail / 10.0)))
    for j in range(1, n_tail + 1):
        pts.append(dst.point_at(sd + tail * j / n_tail))
    return Polyline(pts)


def lane_aligned(agent: Agent, road: Road, params: ManeuverParams) -> int | None:
    """Lane index the agent is driving along, or None when off-road/crossing."""
    st = agent.state
    idx = road.lane_of(st.x, st.y)
    if idx is None:
        return None
    line = road.lane(idx).centerline
    s = line.project(st.x, st.y)[0]
    if abs(wrap_angle(st.heading - line.heading_at(s))) > params.lane_alignment_tol:
        return None
    return idx


def object_follower(agent: Agent, behavior: str, road: Road, horizon: float,
                    params: ManeuverParams = ManeuverParams(),
                    limits: ControlLimits = DEFAULT_LIMITS) -> PathFollower | None:
    """Driver for a traffic participant under one of the four object behaviors.

    Returns None when the behavior is impossible (no lane to change into, or
    a lane change attempted by an agent not bound to a lane).
    """
    st = agent.state
    reach = st.speed * horizon + 50.0
    lane_idx = lane_aligned(agent, road, params)
    if lane_idx is None:
        if behavior in ("LaneChangeLeft", "LaneChangeRight"):
            return None
        path = straight_path(st.x, st.y, st.heading, reach)
    else:
        path = road.lane(lane_idx).centerline
    if behavior == "LaneFollow":
        return PathFollower(path, "hold", params=params, limits=limits)
    if behavior == "Stop":
        return PathFollower(path, "decel", decel=params.object_stop_decel, params=params, limits=limits)
    target = lane_idx + (1 if behavior == "LaneChangeLeft" else -1)
    dst = road.lane(target)
    if dst is None:
        return None
    lc = lane_change_path(path, dst.centerline, st.x, st.y, st.speed, params, reach)
    return PathFollower(lc, "hold", params=params, limits=limits)


def ego_follower(ego: Agent, task_path: Polyline, behavior: str, road: Road, horizon: float,
                 params: ManeuverParams = ManeuverParams(),
                 limits: ControlLimits = DEFAULT_LIMITS) -> PathFollower:
    """Driver for the ego under an ego behavior along its task path.

    A lane change toward a lane that does not exist degrades to KeepLane.
    """
    st = ego.state
    if behavior == "ReduceSpeed":
        return PathFollower(task_path, "decel", decel=params.reduce_speed_decel,
                            floor=params.reduce_speed_floor, params=params, limits=limits)
    if behavior == "EmergencyStop":
        return PathFollower(task_path, "decel", decel=params.emergency_decel, params=params, limits=limits)
    if behavior in ("LaneChangeLeft", "LaneChangeRight"):
        here = road.lane_of(st.x, st.y)
        dst = None if here is None else road.lane(here + (1 if behavior == "LaneChangeLeft" else -1))
        if dst is not None:
            reach = st.speed * horizon + 50.0
            path = lane_change_path(task_path, dst.centerline, st.x, st.y, st.speed, params, reach)
            return PathFollower(path, "hold", params=params, limits=limits)
    return PathFollower(task_path, "hold", params=params, limits=limits)


def rollout(state: KinematicState, follower: PathFollower, steps: int, dt: float) -> np.ndarray:
    """Poses (steps + 1, 3) of (x, y, heading), starting with ``state``."""
    out = np.empty((steps + 1, 3))
    out[0] = (state.x, state.y, state.heading)
    st = state
    limits = follower.limits
    for i in range(1, steps + 1):
        st = step_single_track(st, follower.control(st, dt), dt, limits)
        out[i] = (st.x, st.y, st.heading)
    return out
