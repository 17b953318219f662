"""Per-object behavior threats: probabilities, impact times, threat levels.

Every significant participant is rolled forward under each of the four
object behaviors and checked for footprint overlap against the ego's own
rollout.  A cell's threat level is ``significance * probability`` when the
impact falls inside the horizon and zero otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .behaviors import OBJECT_BEHAVIORS, EgoBehavior, ObjectBehavior
from .geometry import rects_overlap
from .kinematics import KinematicState
from .links import LinkSet, TaskTrajectory, internal_significance
from .maneuvers import ManeuverParams, ego_follower, object_follower, rollout
from .scene import ObjectSet, RangeBand, Relation, SceneObject
from .world import Agent, Road

INF = math.inf
PROB_TOL = 1e-9


class StaticObject(ValueError):
    def __init__(self, object_id: str):
        super().__init__(f"object {object_id!r} is static; it has no behavior distribution")
        self.object_id = object_id


class MissingLink(KeyError):
    def __init__(self, object_id: str):
        super().__init__(f"significant object {object_id!r} has no internal link")
        self.object_id = object_id


@dataclass(frozen=True)
class TimeHorizon:
    t_c: float = 0.0
    delta: float = 40.0
    dt: float = 0.1

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("horizon span must be positive")
        if not 0 < self.dt <= self.delta:
            raise ValueError("dt must lie in (0, delta]")

    @property
    def steps(self) -> int:
        return int(round(self.delta / self.dt))

    @property
    def interval(self) -> tuple[float, float]:
        return (self.t_c, self.t_c + self.delta)


class BehaviorDistribution(dict):
    """ObjectBehavior -> probability; validated to sum to one."""

    def __init__(self, probs: Mapping):
        super().__init__({k: float(probs.get(k, 0.0)) for k in OBJECT_BEHAVIORS})
        for k, p in self.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability of {k.value} outside [0, 1]: {p}")
        total = math.fsum(self.values())
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total:.2f}, expected 1")


LF, LCR, LCL, STOP = OBJECT_BEHAVIORS

# annotation -> (LaneFollow, LaneChangeRight, LaneChangeLeft, Stop)
CAR_PRIORS = {
    "none": (0.6, 0.1, 0.1, 0.2),
    "right": (0.2, 0.59, 0.01, 0.2),
    "left": (0.2, 0.01, 0.59, 0.2),
    "stop": (0.2, 0.2, 0.1, 0.5),
}
PEDESTRIAN_PRIORS = {
    "crossing": (0.8, 0.0, 0.0, 0.2),
    "none": (0.4, 0.0, 0.0, 0.6),
}


def _prior(obj: SceneObject) -> tuple[float, ...]:
    props = obj.properties
    if obj.kind == "Pedestrian":
        return PEDESTRIAN_PRIORS["crossing" if props.get("crossing_intent") is True else "none"]
    if str(props.get("intent", "none")).lower() == "stop" or props.get("brake_lights") in (True, "on", "true"):
        return CAR_PRIORS["stop"]
    signal = str(props.get("turn_signal", "none")).lower()
    return CAR_PRIORS.get(signal, CAR_PRIORS["none"])


def predict_behavior_distribution(obj: SceneObject, lanes: Sequence[int] | None = None) -> BehaviorDistribution:
    """Annotation-driven behavior prior for a dynamic object.

    With ``lanes`` (the map's lane indices) lane changes toward a lane that
    does not exist are dropped and the remaining mass renormalised.
    """
    if not obj.dynamic:
        raise StaticObject(obj.id)
    probs = dict(zip(OBJECT_BEHAVIORS, _prior(obj)))
    if lanes is not None:
        if obj.lane is None or obj.lane + 1 not in lanes:
            probs[LCL] = 0.0
        if obj.lane is None or obj.lane - 1 not in lanes:
            probs[LCR] = 0.0
        total = math.fsum(probs.values())
        probs = {k: v / total for k, v in probs.items()}
    return BehaviorDistribution(probs)


def _as_agent(obj: SceneObject) -> Agent:
    return Agent(obj.id, obj.kind, obj.state, obj.length, obj.width)


def first_overlap_time(ego_poses: np.ndarray, obj_poses: np.ndarray, ego_size: tuple[float, float],
                       obj_size: tuple[float, float], dt: float) -> float:
    """Earliest sample time t > 0 with footprint overlap, else infinity."""
    hits = np.flatnonzero(rects_overlap(ego_poses[1:], obj_poses[1:], ego_size, obj_size))
    if hits.size == 0:
        return INF
    return (int(hits[0]) + 1) * dt


class ThreatPredictor:
    """Caches ego and object rollouts for one scene snapshot."""

    def __init__(self, ego: Agent, task: TaskTrajectory, horizon: TimeHorizon, road: Road = Road(),
                 params: ManeuverParams = ManeuverParams()):
        self.ego = ego
        self.task = task
        self.task_path = task.path()
        self.horizon = horizon
        self.road = road
        self.params = params
        self._ego_cache: dict[EgoBehavior, np.ndarray] = {}
        self._obj_cache: dict[tuple[str, ObjectBehavior], np.ndarray | None] = {}

    def ego_poses(self, behavior: EgoBehavior) -> np.ndarray:
        if behavior not in self._ego_cache:
            f = ego_follower(self.ego, self.task_path, behavior.value, self.road, self.horizon.delta, self.params)
            self._ego_cache[behavior] = rollout(self.ego.state, f, self.horizon.steps, self.horizon.dt)
        return self._ego_cache[behavior]

    def object_poses(self, obj: SceneObject, k: ObjectBehavior) -> np.ndarray | None:
        key = (obj.id, k)
        if key not in self._obj_cache:
            agent = _as_agent(obj)
            f = object_follower(agent, k.value, self.road, self.horizon.delta, self.params)
            self._obj_cache[key] = None if f is None else rollout(agent.state, f, self.horizon.steps,
                                                                   self.horizon.dt)
        return self._obj_cache[key]

    def impact_time(self, obj: SceneObject, k: ObjectBehavior,
                    ego_behavior: EgoBehavior = EgoBehavior.KeepLane) -> float:
        poses = self.object_poses(obj, ObjectBehavior(k))
        if poses is None:
            return INF
        return first_overlap_time(self.ego_poses(EgoBehavior(ego_behavior)), poses, self.ego.size,
                                  (obj.length, obj.width), self.horizon.dt)


def impact_time(ego: Agent | KinematicState, ego_task: TaskTrajectory, obj: SceneObject, k: ObjectBehavior,
                h: TimeHorizon, road: Road = Road(), ego_behavior: EgoBehavior = EgoBehavior.KeepLane,
                params: ManeuverParams = ManeuverParams(), ego_size: tuple[float, float] = (4.5, 1.8)) -> float:
    """Earliest time in (0, delta] at which ``obj`` under behavior ``k`` hits the ego.

    The ego follows its task trajectory under ``ego_behavior`` (KeepLane means
    constant speed).  Returns ``math.inf`` when no overlap occurs.
    """
    if isinstance(ego, KinematicState):
        ego = Agent("ego", "Ego", ego, *ego_size)
    return ThreatPredictor(ego, ego_task, h, road, params).impact_time(obj, k, ego_behavior)


def counter_behavior(obj: SceneObject, k: ObjectBehavior,
                     lateral: Sequence[EgoBehavior] = (EgoBehavior.LaneChangeLeft, EgoBehavior.LaneChangeRight)
                     ) -> EgoBehavior:
    """Ego behavior expected to remove the threat of ``obj`` doing ``k``.

    ``lateral`` lists the lane changes whose target lane is currently free;
    it only matters for threats from behind, which slowing cannot solve.
    """
    k = ObjectBehavior(k)
    rel = obj.relation
    if rel is Relation.SameLaneBehind:
        return lateral[0] if lateral else EgoBehavior.EmergencyStop
    if rel is Relation.LeftAdjacent:
        return EgoBehavior.ReduceSpeed if k is LCR else EgoBehavior.KeepLane
    if rel is Relation.RightAdjacent:
        return EgoBehavior.ReduceSpeed if k is LCL else EgoBehavior.KeepLane
    if rel is Relation.Crossing:
        # a crossing agent that stops may still be standing in the ego lane
        if k is STOP or obj.band is not RangeBand.Near:
            return EgoBehavior.ReduceSpeed
        return EgoBehavior.EmergencyStop
    if rel is Relation.OffRoad:
        return EgoBehavior.KeepLane if k is STOP else EgoBehavior.ReduceSpeed
    # SameLaneAhead, or relation unknown
    return EgoBehavior.ReduceSpeed


@dataclass(frozen=True)
class ThreatEntry:
    object_id: str
    behavior: ObjectBehavior
    probability: float
    impact_time: float
    threat: float
    counter: EgoBehavior
    active: bool
    significance: float

    def as_dict(self) -> dict:
        return {
            "object": self.object_id,
            "behavior": self.behavior.value,
            "p": self.probability,
            "tau": None if math.isinf(self.impact_time) else self.impact_time,
            "theta": self.threat,
            "beta": self.counter.value,
            "active": self.active,
            "significance": self.significance,
        }


Resimulator = Callable[[EgoBehavior, ThreatEntry], float]


@dataclass
class ThreatMatrix:
    entries: dict[tuple[str, ObjectBehavior], ThreatEntry]
    horizon: TimeHorizon
    objects: dict[str, SceneObject] = field(default_factory=dict)
    resimulate: Resimulator | None = field(default=None, compare=False, repr=False)

    def __iter__(self):
        return iter(self.entries.values())

    def __len__(self):
        return len(self.entries)

    @property
    def object_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for oid, _ in self.entries:
            seen.setdefault(oid, None)
        return list(seen)

    def active_cells(self) -> set[tuple[str, ObjectBehavior]]:
        return {key for key, e in self.entries.items() if e.active}

    def row(self, object_id: str) -> list[ThreatEntry]:
        return [self.entries[(object_id, k)] for k in OBJECT_BEHAVIORS if (object_id, k) in self.entries]

    def as_list(self) -> list[dict]:
        return [e.as_dict() for e in self.entries.values()]


@dataclass(frozen=True)
class PinnedRow:
    """Externally supplied (probability, impact time) row for one object."""
    probabilities: BehaviorDistribution
    impact_times: Mapping[ObjectBehavior, float]


def free_lane_changes(ego_lane: int | None, important: ObjectSet, road: Road) -> tuple[EgoBehavior, ...]:
    if ego_lane is None:
        return ()
    out = []
    for behavior, target in ((EgoBehavior.LaneChangeLeft, ego_lane + 1), (EgoBehavior.LaneChangeRight, ego_lane - 1)):
        if road.lane(target) is None:
            continue
        if any(o.dynamic and o.lane == target and o.band is RangeBand.Near for o in important.values()):
            continue
        out.append(behavior)
    return tuple(out)


def simulate_threats(important: ObjectSet, links: LinkSet, ego: Agent, task: TaskTrajectory, h: TimeHorizon,
                     road: Road = Road(), params: ManeuverParams = ManeuverParams(),
                     pinned: Mapping[str, PinnedRow] | None = None,
                     predictor: ThreatPredictor | None = None) -> ThreatMatrix:
    """Build the |important| x 4 threat matrix.

    Rows in ``pinned`` take probabilities and impact times verbatim instead
    of predicting and simulating them.  The returned matrix can re-simulate
    any cell under a different ego behavior.
    """
    sig = internal_significance(links)
    predictor = predictor or ThreatPredictor(ego, task, h, road, params)
    lanes = road.lane_indices or None
    ego_lane = road.lane_of(ego.state.x, ego.state.y)
    lateral = free_lane_changes(ego_lane, important, road)
    pinned = pinned or {}
    entries: dict[tuple[str, ObjectBehavior], ThreatEntry] = {}
    for oid, obj in important.items():
        if oid not in sig:
            raise MissingLink(oid)
        lam = sig[oid]
        row = pinned.get(oid)
        if row is not None:
            dist = row.probabilities
        else:
            dist = predict_behavior_distribution(obj, lanes)
        for k in OBJECT_BEHAVIORS:
            tau = row.impact_times.get(k, INF) if row is not None else predictor.impact_time(obj, k)
            active = math.isfinite(tau) and tau <= h.delta
            p = dist[k]
            entries[(oid, k)] = ThreatEntry(
                object_id=oid,
                behavior=k,
                probability=p,
                impact_time=tau,
                threat=lam * p if active else 0.0,
                counter=counter_behavior(obj, k, lateral),
                active=active,
                significance=lam,
            )

    def resimulate(candidate: EgoBehavior, entry: ThreatEntry) -> float:
        return predictor.impact_time(important[entry.object_id], entry.behavior, candidate)

    return ThreatMatrix(entries, h, dict(important), resimulate)
