"""Simulator ground truth: road geometry, agents and closed-loop stepping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

from .geometry import Polyline
from .kinematics import ControlInput, ControlLimits, DEFAULT_LIMITS, KinematicState, step_single_track

EGO_ID = "ego"


@dataclass(frozen=True)
class Lane:
    index: int
    centerline: Polyline
    width: float = 3.5


@dataclass(frozen=True)
class Building:
    id: str
    polygon: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class TrafficSign:
    id: str
    x: float
    y: float
    size: float = 0.8


@dataclass(frozen=True)
class Road:
    """Static map.  Lane index 1 is the rightmost lane."""
    lanes: tuple[Lane, ...] = ()
    buildings: tuple[Building, ...] = ()
    signs: tuple[TrafficSign, ...] = ()

    def lane(self, index: int) -> Lane | None:
        for lane in self.lanes:
            if lane.index == index:
                return lane
        return None

    def lane_of(self, x: float, y: float) -> int | None:
        """Index of the lane whose strip contains (x, y), or None off-road."""
        best = None
        for lane in self.lanes:
            s, lat, _ = lane.centerline.project(x, y)
            if not (0.0 <= s <= lane.centerline.length):
                continue
            if abs(lat) <= 0.5 * lane.width and (best is None or abs(lat) < best[0]):
                best = (abs(lat), lane.index)
        return None if best is None else best[1]

    @property
    def lane_indices(self) -> list[int]:
        return sorted(lane.index for lane in self.lanes)


@dataclass(frozen=True)
class Agent:
    id: str
    kind: str
    state: KinematicState
    length: float = 4.5
    width: float = 1.8
    annotations: Mapping[str, str] = field(default_factory=dict)

    @property
    def size(self) -> tuple[float, float]:
        return (self.length, self.width)


@dataclass(frozen=True)
class WorldState:
    ego: Agent
    participants: tuple[Agent, ...] = ()
    road: Road = Road()
    clock: float = 0.0

    def __post_init__(self):
        for a in (self.ego, *self.participants):
            st = a.state
            if not all(math.isfinite(v) for v in (st.x, st.y, st.heading, st.speed)):
                raise ValueError(f"agent {a.id} has a non-finite state")

    def agent(self, agent_id: str) -> Agent:
        if agent_id == self.ego.id:
            return self.ego
        for a in self.participants:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)


def advance_world(world: WorldState, controls: Mapping[str, ControlInput], dt: float,
                  limits: ControlLimits = DEFAULT_LIMITS) -> WorldState:
    """Step every agent (ego included) by ``dt``; missing controls mean coasting."""
    idle = ControlInput()

    def move(a: Agent) -> Agent:
        u = limits.clip(controls.get(a.id, idle))
        return replace(a, state=step_single_track(a.state, u, dt, limits))

    return replace(
        world,
        ego=move(world.ego),
        participants=tuple(move(a) for a in world.participants),
        clock=world.clock + dt,
    )
