"""Scene network: significance-weighted links and the significant-object filter."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .geometry import Polyline
from .scene import ObjectSet, SceneObject

EGO = "ego"
ANY = "*"


class LinkClass(str, Enum):
    Internal = "Internal"
    External = "External"


@dataclass(frozen=True)
class TaskTrajectory:
    waypoints: tuple[tuple[float, float], ...]
    target_lane: int | None = None
    destination: str = ""
    desired_speed: float = 13.9
    comfort_accel: float = 2.0

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("task trajectory needs at least two waypoints")
        if not self.desired_speed > 0:
            raise ValueError("desired speed must be positive")

    def path(self) -> Polyline:
        return Polyline(self.waypoints)


@dataclass(frozen=True)
class Link:
    source: str
    target: str
    link_class: LinkClass
    significance: float
    rationale: str

    def __post_init__(self):
        if not 0.0 <= self.significance <= 1.0:
            raise ValueError(f"significance {self.significance} outside [0, 1]")
        if (self.link_class is LinkClass.Internal) != (self.source == EGO):
            raise ValueError("internal links must originate at the ego")


LinkSet = dict  # (source, target) -> Link


RubricKey = tuple[str, str, str]  # (relation, band, kind), "*" wildcard

DEFAULT_RULES: dict[RubricKey, float] = {
    ("SameLaneAhead", "Near", ANY): 0.9,
    ("SameLaneAhead", "Far", ANY): 0.6,
    ("SameLaneBehind", ANY, ANY): 0.05,
    ("LeftAdjacent", "Near", ANY): 0.3,
    ("LeftAdjacent", "Far", ANY): 0.15,
    ("RightAdjacent", "Near", ANY): 0.1,
    ("RightAdjacent", "Far", ANY): 0.05,
    ("Crossing", "Near", "Pedestrian"): 0.95,
    ("Crossing", "Far", "Pedestrian"): 0.5,
    ("Crossing", "Near", ANY): 0.8,
    ("Crossing", "Far", ANY): 0.4,
    ("OffRoad", "Near", ANY): 0.05,
    ("OffRoad", "Far", ANY): 0.02,
    # static objects have no behavior models; keep them under the default s_min
    (ANY, ANY, "Lane"): 0.02,
    (ANY, ANY, "TrafficSign"): 0.03,
    (ANY, ANY, "Building"): 0.01,
    (ANY, ANY, ANY): 0.05,
}


@dataclass(frozen=True)
class SignificanceRubric:
    """Lookup table keyed by (relation, band, kind).

    Kind-specific rules win over kind-wildcard rules; within each group the
    more specific relation/band match wins.
    """
    rules: Mapping[RubricKey, float] = field(default_factory=lambda: dict(DEFAULT_RULES))
    lane_occupancy: float = 0.5
    object_pair: float = 0.1
    full_mesh: bool = False
    static_adjacency: float = 10.0

    def __post_init__(self):
        for key, val in self.rules.items():
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"rubric value for {key} outside [0, 1]")

    def with_overrides(self, overrides: Mapping[RubricKey, float], **kw) -> "SignificanceRubric":
        merged = dict(self.rules)
        merged.update(overrides)
        params = dict(lane_occupancy=self.lane_occupancy, object_pair=self.object_pair,
                      full_mesh=self.full_mesh, static_adjacency=self.static_adjacency)
        params.update(kw)
        return SignificanceRubric(merged, **params)

    def lookup(self, relation: str, band: str, kind: str) -> tuple[float, str]:
        for key in ((relation, band, kind), (relation, ANY, kind), (ANY, band, kind), (ANY, ANY, kind),
                    (relation, band, ANY), (relation, ANY, ANY), (ANY, band, ANY), (ANY, ANY, ANY)):
            if key in self.rules:
                return self.rules[key], "/".join(key)
        raise KeyError(f"no rubric rule for {(relation, band, kind)}")

    def score(self, obj: SceneObject) -> tuple[float, str]:
        rel = obj.relation.value if obj.relation is not None else ANY
        band = obj.band.value if obj.band is not None else ANY
        return self.lookup(rel, band, obj.kind)


def _near_task(obj: SceneObject, task: TaskTrajectory, path: Polyline, rubric: SignificanceRubric) -> bool:
    if obj.kind == "Lane" and obj.lane is not None and task.target_lane is not None:
        return abs(obj.lane - task.target_lane) <= 1
    return path.distance_to(obj.state.x, obj.state.y) <= rubric.static_adjacency


def generate_links(objects: ObjectSet, task: TaskTrajectory,
                   rubric: SignificanceRubric = SignificanceRubric()) -> LinkSet:
    """Internal ego links to every dynamic object and to static objects along
    the task; external links from dynamic objects to the lane they occupy
    (plus a dynamic-object mesh when ``rubric.full_mesh`` is set)."""
    path = task.path()
    links: LinkSet = {}
    for oid, obj in objects.items():
        if obj.dynamic or _near_task(obj, task, path, rubric):
            sig, tag = rubric.score(obj)
            links[(EGO, oid)] = Link(EGO, oid, LinkClass.Internal, sig, tag)
    lanes = {o.lane: oid for oid, o in objects.items() if o.kind == "Lane" and o.lane is not None}
    dynamic = [o for o in objects.values() if o.dynamic]
    for obj in dynamic:
        lane_id = lanes.get(obj.lane)
        if lane_id is not None:
            links[(obj.id, lane_id)] = Link(obj.id, lane_id, LinkClass.External,
                                            rubric.lane_occupancy, "occupies-lane")
    if rubric.full_mesh:
        for a in dynamic:
            for b in dynamic:
                if a.id != b.id:
                    links[(a.id, b.id)] = Link(a.id, b.id, LinkClass.External,
                                               rubric.object_pair, "object-pair")
    return links


def internal_significance(links: LinkSet) -> dict[str, float]:
    """Maximal incoming internal-link significance per object."""
    out: dict[str, float] = {}
    for link in links.values():
        if link.link_class is LinkClass.Internal:
            out[link.target] = max(out.get(link.target, 0.0), link.significance)
    return out


def significant_objects(objects: ObjectSet, links: LinkSet, s_min: float = 0.05) -> ObjectSet:
    if not 0.0 <= s_min <= 1.0:
        raise ValueError("s_min must lie in [0, 1]")
    sig = internal_significance(links)
    return {oid: o for oid, o in objects.items() if oid in sig and sig[oid] >= s_min}

