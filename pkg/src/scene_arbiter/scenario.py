"""Scenario files: strict JSON schema, semantic checks, and domain conversion."""

from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .arbiter import DEFAULT_TIE_BREAK, ArbiterConfig
from .behaviors import OBJECT_BEHAVIORS, EgoBehavior, ObjectBehavior
from .geometry import Polyline
from .grid import GridSpec
from .kinematics import ControlBounds, KinematicState
from .links import ANY, SignificanceRubric, TaskTrajectory
from .maneuvers import ManeuverParams
from .scene import SceneConfig
from .threats import BehaviorDistribution, PinnedRow, TimeHorizon
from .world import EGO_ID, Agent, Building, Lane, Road, TrafficSign, WorldState

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    pass


class SchemaError(ScenarioError):
    def __init__(self, path: str, reason: str, line: int | None = None):
        where = f"line {line}" if line is not None else (path or "<root>")
        super().__init__(f"{where}: {reason}")
        self.path = path
        self.reason = reason
        self.line = line


class SemanticError(ScenarioError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StateModel(_Strict):
    x: float
    y: float
    heading: float = 0.0
    speed: float = Field(0.0, ge=0.0)
    wheelbase: float = Field(2.7, gt=0.0)


class TaskModel(_Strict):
    waypoints: list[tuple[float, float]] = Field(min_length=2)
    target_lane: Optional[int] = None
    destination: str = ""
    desired_speed: float = Field(gt=0.0)
    comfort_accel: float = Field(2.0, gt=0.0)


class EgoModel(_Strict):
    state: StateModel
    length: float = Field(4.5, gt=0.0)
    width: float = Field(1.8, gt=0.0)
    task: TaskModel


class LaneModel(_Strict):
    index: int
    centerline: list[tuple[float, float]] = Field(min_length=2)
    width: float = Field(3.5, gt=0.0)


class BuildingModel(_Strict):
    id: str
    polygon: list[tuple[float, float]] = Field(min_length=3)


class SignModel(_Strict):
    id: str
    x: float
    y: float
    size: float = Field(0.8, gt=0.0)
    sign_type: str = "unknown"


class MapModel(_Strict):
    lanes: list[LaneModel] = []
    buildings: list[BuildingModel] = []
    signs: list[SignModel] = []


class PinnedModel(_Strict):
    probabilities: dict[ObjectBehavior, float]
    # null = no impact within the horizon
    impact_times: dict[ObjectBehavior, Optional[float]]


class BoundsModel(_Strict):
    steering_rate_min: float = -0.1
    steering_rate_max: float = 0.1
    speed_min: float = Field(8.0, ge=0.0)
    speed_max: float = Field(14.0, ge=0.0)
    speed_per_step: bool = False


class PolicyModel(_Strict):
    type: Literal["behavior", "sampled", "idle"] = "behavior"
    behavior: ObjectBehavior = ObjectBehavior.LaneFollow
    bounds: Optional[BoundsModel] = None


class ParticipantModel(_Strict):
    id: str
    kind: str = "TrafficCar"
    state: StateModel
    length: float = Field(4.5, gt=0.0)
    width: float = Field(1.8, gt=0.0)
    annotations: dict[str, str] = {}
    policy: PolicyModel = PolicyModel()
    pinned: Optional[PinnedModel] = None


class RubricRuleModel(_Strict):
    relation: str = ANY
    band: str = ANY
    kind: str = ANY
    significance: float = Field(ge=0.0, le=1.0)


class RubricModel(_Strict):
    rules: list[RubricRuleModel] = []
    lane_occupancy: Optional[float] = Field(None, ge=0.0, le=1.0)
    object_pair: Optional[float] = Field(None, ge=0.0, le=1.0)
    full_mesh: Optional[bool] = None
    static_adjacency: Optional[float] = Field(None, ge=0.0)


class ArbiterModel(_Strict):
    theta_accept: float = Field(0.05, ge=0.0)
    tie_break: list[EgoBehavior] = list(DEFAULT_TIE_BREAK)


class HorizonModel(_Strict):
    delta: float = Field(40.0, gt=0.0)
    dt: float = Field(0.1, gt=0.0)


class SceneModel(_Strict):
    near_threshold: float = Field(30.0, ge=0.0)
    s_min: float = Field(0.05, ge=0.0, le=1.0)
    lane_width: float = Field(3.5, gt=0.0)


class ManeuverModel(_Strict):
    lane_change_duration: float = Field(3.0, gt=0.0)
    object_stop_decel: float = Field(2.0, gt=0.0)
    reduce_speed_decel: float = Field(2.0, gt=0.0)
    reduce_speed_floor: float = Field(0.0, ge=0.0)
    emergency_decel: float = Field(4.0, gt=0.0)


class GridModel(_Strict):
    width: int = Field(100, ge=1)
    height: int = Field(100, ge=1)
    resolution: float = Field(0.5, gt=0.0)
    max_range: float = Field(50.0, gt=0.0)
    half_angle: float = Field(math.pi / 2, gt=0.0, le=math.pi)


class Scenario(_Strict):
    schema_version: Literal[1]
    name: str
    mode: Literal["GoldenFixture", "ClosedLoop"]
    notes: str = ""
    seed: int = Field(0, ge=0, lt=2 ** 64)
    duration: float = Field(0.1, gt=0.0)
    map: MapModel = MapModel()
    ego: EgoModel
    participants: list[ParticipantModel] = []
    rubric: RubricModel = RubricModel()
    arbiter: ArbiterModel = ArbiterModel()
    horizon: HorizonModel = HorizonModel()
    scene: SceneModel = SceneModel()
    maneuvers: ManeuverModel = ManeuverModel()
    grid: GridModel = GridModel()

    @property
    def ticks(self) -> int:
        return max(1, int(round(self.duration / self.horizon.dt)))


def _check_semantics(s: Scenario) -> None:
    lane_ids = [lane.index for lane in s.map.lanes]
    if len(lane_ids) != len(set(lane_ids)):
        raise SemanticError("map.lanes", "duplicate lane index")
    if s.ego.task.target_lane is not None and s.ego.task.target_lane not in lane_ids:
        raise SemanticError("ego.task.target_lane", f"lane {s.ego.task.target_lane} is not in the map")
    ids = [p.id for p in s.participants]
    if len(ids) != len(set(ids)):
        raise SemanticError("participants", "duplicate participant id")
    if EGO_ID in ids:
        raise SemanticError("participants", f"id {EGO_ID!r} is reserved")
    try:
        ArbiterConfig(s.arbiter.theta_accept, tuple(s.arbiter.tie_break))
        TimeHorizon(0.0, s.horizon.delta, s.horizon.dt)
    except ValueError as exc:
        raise SemanticError("arbiter/horizon", str(exc)) from None
    for i, p in enumerate(s.participants):
        where = f"participants[{i}]"
        lane = p.annotations.get("lane_index")
        if lane is not None and (not lane.lstrip("-").isdigit() or int(lane) not in lane_ids):
            raise SemanticError(f"{where}.annotations.lane_index", f"lane {lane} is not in the map")
        if p.pinned is not None:
            total = math.fsum(p.pinned.probabilities.values())
            if abs(total - 1.0) > 1e-9:
                raise SemanticError(f"{where}.pinned.probabilities", f"probabilities sum to {total:.2f}")
            if any(not 0.0 <= v <= 1.0 for v in p.pinned.probabilities.values()):
                raise SemanticError(f"{where}.pinned.probabilities", "probability outside [0, 1]")
            if any(t is not None and t <= 0 for t in p.pinned.impact_times.values()):
                raise SemanticError(f"{where}.pinned.impact_times", "impact times must be positive")
        elif s.mode == "GoldenFixture":
            raise SemanticError(f"{where}.pinned", "GoldenFixture mode requires pinned tables")
        if p.policy.type == "sampled" and p.policy.bounds is None:
            raise SemanticError(f"{where}.policy.bounds", "sampled policy needs bounds")
        if p.policy.bounds is not None:
            b = p.policy.bounds
            if b.steering_rate_min > b.steering_rate_max or b.speed_min > b.speed_max:
                raise SemanticError(f"{where}.policy.bounds", "empty bounds")


def parse_scenario(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", exc.msg, exc.lineno) from None
    try:
        s = Scenario.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        path = ".".join(str(p) for p in err["loc"])
        raise SchemaError(path, err["msg"]) from None
    _check_semantics(s)
    return s


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(s.model_dump(mode="json"), indent=2) + "\n"


def scenario_hash(s: Scenario) -> str:
    canon = json.dumps(s.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def bundled_scenarios() -> list[str]:
    pkg = resources.files("scene_arbiter") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_scenario(name_or_path: str | Path) -> Scenario:
    """Load a scenario from a path, or by name from the bundled set."""
    p = Path(name_or_path)
    if p.is_file():
        return parse_scenario(p.read_text(encoding="utf-8"))
    res = resources.files("scene_arbiter") / "scenarios" / f"{name_or_path}.json"
    if not res.is_file():
        raise FileNotFoundError(f"no scenario file or bundled scenario named {name_or_path!r}")
    return parse_scenario(res.read_text(encoding="utf-8"))


# -- conversion to domain objects ------------------------------------------

def _state(m: StateModel) -> KinematicState:
    return KinematicState(m.x, m.y, m.heading, m.speed, m.wheelbase)


def build_road(s: Scenario) -> Road:
    return Road(
        lanes=tuple(Lane(l.index, Polyline(l.centerline), l.width) for l in s.map.lanes),
        buildings=tuple(Building(b.id, tuple(b.polygon)) for b in s.map.buildings),
        signs=tuple(TrafficSign(g.id, g.x, g.y, g.size) for g in s.map.signs),
    )


def build_world(s: Scenario) -> WorldState:
    ego = Agent(EGO_ID, "Ego", _state(s.ego.state), s.ego.length, s.ego.width)
    parts = tuple(Agent(p.id, p.kind, _state(p.state), p.length, p.width, dict(p.annotations))
                  for p in s.participants)
    return WorldState(ego, parts, build_road(s), 0.0)


def build_task(s: Scenario) -> TaskTrajectory:
    t = s.ego.task
    return TaskTrajectory(tuple(t.waypoints), t.target_lane, t.destination, t.desired_speed, t.comfort_accel)


def build_rubric(s: Scenario) -> SignificanceRubric:
    r = s.rubric
    overrides = {(x.relation, x.band, x.kind): x.significance for x in r.rules}
    kw = {k: getattr(r, k) for k in ("lane_occupancy", "object_pair", "full_mesh", "static_adjacency")
          if getattr(r, k) is not None}
    return SignificanceRubric().with_overrides(overrides, **kw)


def build_arbiter_config(s: Scenario) -> ArbiterConfig:
    return ArbiterConfig(s.arbiter.theta_accept, tuple(s.arbiter.tie_break))


def build_horizon(s: Scenario, t_c: float = 0.0) -> TimeHorizon:
    return TimeHorizon(t_c, s.horizon.delta, s.horizon.dt)


def build_scene_config(s: Scenario) -> SceneConfig:
    return SceneConfig(near_threshold=s.scene.near_threshold, lane_width=s.scene.lane_width)


def build_maneuvers(s: Scenario) -> ManeuverParams:
    return ManeuverParams(**s.maneuvers.model_dump())


def build_grid_spec(s: Scenario) -> GridSpec:
    return GridSpec(**s.grid.model_dump())


def build_pinned(s: Scenario) -> dict[str, PinnedRow]:
    out = {}
    for p in s.participants:
        if p.pinned is None:
            continue
        times = {k: (math.inf if p.pinned.impact_times.get(k) is None else float(p.pinned.impact_times[k]))
                 for k in OBJECT_BEHAVIORS}
        out[p.id] = PinnedRow(BehaviorDistribution(p.pinned.probabilities), times)
    return out


def build_bounds(b: BoundsModel, s: Scenario) -> ControlBounds:
    return ControlBounds(b.steering_rate_min, b.steering_rate_max, b.speed_min, b.speed_max,
                         dt=s.horizon.dt, speed_per_step=b.speed_per_step)
