"""Scene objects: typed entities built from a perceived scene plus measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Union

from .geometry import to_local, wrap_angle
from .kinematics import KinematicState

PropertyValue = Union[float, str, bool]


class UnknownKind(KeyError):
    def __init__(self, entity_id: str, kind: str):
        super().__init__(f"entity {entity_id!r} has unregistered kind {kind!r}")
        self.entity_id = entity_id
        self.kind = kind


class DanglingMeasurement(KeyError):
    def __init__(self, entity_id: str):
        super().__init__(f"measurement references unknown object {entity_id!r}")
        self.entity_id = entity_id


class Relation(str, Enum):
    SameLaneAhead = "SameLaneAhead"
    SameLaneBehind = "SameLaneBehind"
    LeftAdjacent = "LeftAdjacent"
    RightAdjacent = "RightAdjacent"
    Crossing = "Crossing"
    OffRoad = "OffRoad"


class RangeBand(str, Enum):
    Near = "Near"
    Far = "Far"


@dataclass(frozen=True)
class Entity:
    """Raw detection: kind tag, pose, extent and free-text annotations."""
    id: str
    kind: str
    x: float
    y: float
    heading: float = 0.0
    length: float = 4.5
    width: float = 1.8
    annotations: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError(f"entity {self.id!r}: extents must be positive")
        if not -math.pi <= self.heading < math.pi:
            raise ValueError(f"entity {self.id!r}: heading outside [-pi, pi)")


@dataclass(frozen=True)
class PerceivedScene:
    entities: tuple[Entity, ...] = ()

    def __post_init__(self):
        ids = [e.id for e in self.entities]
        if len(ids) != len(set(ids)):
            raise ValueError("entity ids must be unique")


@dataclass(frozen=True)
class KindSpec:
    dynamic: bool
    defaults: Mapping[str, PropertyValue] = field(default_factory=dict)


@dataclass(frozen=True)
class KindRegistry:
    kinds: Mapping[str, KindSpec]

    def __post_init__(self):
        if not self.kinds:
            raise ValueError("kind registry must not be empty")

    def __contains__(self, kind: str) -> bool:
        return kind in self.kinds

    def is_dynamic(self, kind: str) -> bool:
        return self.kinds[kind].dynamic

    @classmethod
    def default(cls) -> "KindRegistry":
        return cls({
            "TrafficCar": KindSpec(True, {"turn_signal": "none", "intent": "none"}),
            "Pedestrian": KindSpec(True, {"crossing_intent": False}),
            "Lane": KindSpec(False, {}),
            "TrafficSign": KindSpec(False, {"sign_type": "unknown"}),
            "Building": KindSpec(False, {}),
        })


@dataclass(frozen=True)
class Measurement:
    id: str
    speed: float | None = None
    range: float | None = None
    bearing: float | None = None
    lane: int | None = None
    size: tuple[float, float] | None = None

    def __post_init__(self):
        if self.range is not None and self.range < 0:
            raise ValueError(f"measurement {self.id!r}: negative range")


MeasurementSet = Mapping[str, Measurement]


@dataclass(frozen=True)
class SceneObject:
    id: str
    kind: str
    dynamic: bool
    state: KinematicState
    length: float
    width: float
    lane: int | None = None
    properties: Mapping[str, PropertyValue] = field(default_factory=dict)
    relation: Relation | None = None
    band: RangeBand | None = None
    range: float | None = None


ObjectSet = dict  # id -> SceneObject, insertion-ordered


@dataclass(frozen=True)
class SceneConfig:
    near_threshold: float = 30.0
    lane_width: float = 3.5
    # relative heading window (rad) around +-pi/2 treated as crossing traffic
    crossing_tolerance: float = math.pi / 4


def _coerce(value: str, default: PropertyValue) -> PropertyValue:
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, float):
        return float(value)
    return value


def generate_objects(scene: PerceivedScene, registry: KindRegistry) -> ObjectSet:
    """One SceneObject per entity; relation and range band are left unset."""
    out: ObjectSet = {}
    for e in scene.entities:
        if e.kind not in registry:
            raise UnknownKind(e.id, e.kind)
        spec = registry.kinds[e.kind]
        props: dict[str, PropertyValue] = dict(spec.defaults)
        for key, val in e.annotations.items():
            props[key] = _coerce(val, spec.defaults[key]) if key in spec.defaults else val
        lane = e.annotations.get("lane_index")
        out[e.id] = SceneObject(
            id=e.id,
            kind=e.kind,
            dynamic=spec.dynamic,
            state=KinematicState(e.x, e.y, e.heading, 0.0),
            length=e.length,
            width=e.width,
            lane=int(lane) if lane is not None else None,
            properties=props,
        )
    return out


def relation_to_ego(obj: SceneObject, ego: KinematicState, ego_lane: int | None,
                    cfg: SceneConfig = SceneConfig(), off_road: bool = False) -> Relation:
    """Classify an object's position relative to the ego.

    Lane indices decide the lateral class when both are known; otherwise the
    lateral offset in the ego frame is compared against half a lane width.
    """
    lon, lat = to_local(obj.state.x, obj.state.y, ego.x, ego.y, ego.heading)
    if obj.dynamic:
        if obj.properties.get("crossing_intent") is True:
            return Relation.Crossing
        rel_heading = abs(wrap_angle(obj.state.heading - ego.heading))
        if (obj.state.speed > 0.0 and lon > 0.0
                and abs(rel_heading - math.pi / 2) < cfg.crossing_tolerance):
            return Relation.Crossing
        if off_road:
            return Relation.OffRoad
    if obj.lane is not None and ego_lane is not None:
        offset = obj.lane - ego_lane
    elif abs(lat) <= 0.5 * cfg.lane_width:
        offset = 0
    else:
        offset = 1 if lat > 0 else -1
    if offset == 0:
        return Relation.SameLaneAhead if lon > 0.0 else Relation.SameLaneBehind
    return Relation.LeftAdjacent if offset > 0 else Relation.RightAdjacent


def attach_measurements(objects: ObjectSet, m: MeasurementSet, ego: KinematicState,
                        ego_lane: int | None = None, cfg: SceneConfig = SceneConfig()) -> ObjectSet:
    """Populate kinematics, lane, relation and range band from measurements.

    Objects without a measurement keep speed 0 and get their relation and
    range from pose alone.  A measured dynamic object with no lane while the
    ego is on a lane is off-road.  Idempotent for a fixed measurement set.
    """
    for mid in m:
        if mid not in objects:
            raise DanglingMeasurement(mid)
    out: ObjectSet = {}
    for oid, obj in objects.items():
        meas = m.get(oid)
        st = obj.state
        lane, length, width = obj.lane, obj.length, obj.width
        rng = math.hypot(st.x - ego.x, st.y - ego.y)
        if meas is not None:
            if meas.speed is not None:
                st = replace(st, speed=float(meas.speed))
            if meas.lane is not None:
                lane = meas.lane
            if meas.range is not None:
                rng = float(meas.range)
            if meas.size is not None:
                length, width = meas.size
        obj = replace(obj, state=st, lane=lane, length=length, width=width, range=rng)
        off_road = meas is not None and lane is None and ego_lane is not None
        rel = relation_to_ego(obj, ego, ego_lane, cfg, off_road=off_road)
        band = RangeBand.Near if rng <= cfg.near_threshold else RangeBand.Far
        out[oid] = replace(obj, relation=rel, band=band)
    return out


def partition_static_dynamic(objects: ObjectSet) -> tuple[ObjectSet, ObjectSet]:
    static = {k: o for k, o in objects.items() if not o.dynamic}
    dynamic = {k: o for k, o in objects.items() if o.dynamic}
    return static, dynamic


def dynamic_ids(objects: Iterable[SceneObject]) -> list[str]:
    return [o.id for o in objects if o.dynamic]
