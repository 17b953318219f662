"""Behavior selection over a threat matrix and its textual explanation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .behaviors import OBJECT_BEHAVIORS, EgoBehavior, ObjectBehavior
from .links import LinkSet, internal_significance
from .scene import RangeBand, Relation
from .threats import Resimulator, ThreatEntry, ThreatMatrix

Cell = tuple[str, ObjectBehavior]

DEFAULT_TIE_BREAK = (
    EgoBehavior.ReduceSpeed,
    EgoBehavior.KeepLane,
    EgoBehavior.LaneChangeRight,
    EgoBehavior.LaneChangeLeft,
    EgoBehavior.EmergencyStop,
)

RELATION_WORDS = {
    Relation.SameLaneAhead: "ahead",
    Relation.SameLaneBehind: "behind",
    Relation.LeftAdjacent: "left",
    Relation.RightAdjacent: "right",
    Relation.Crossing: "crossing",
    Relation.OffRoad: "off-road",
}


@dataclass(frozen=True)
class ArbiterConfig:
    theta_accept: float = 0.05
    tie_break: tuple[EgoBehavior, ...] = DEFAULT_TIE_BREAK

    def __post_init__(self):
        if sorted(self.tie_break) != sorted(EgoBehavior) or len(set(self.tie_break)) != len(EgoBehavior):
            raise ValueError("tie-break order must rank every ego behavior exactly once")
        if not 0.0 <= self.theta_accept:
            raise ValueError("theta_accept must be non-negative")


@dataclass(frozen=True)
class Explanation:
    object_id: str
    relation: str
    band: str
    significance: float
    behavior: ObjectBehavior
    probability: float
    impact_time: float
    mitigation: EgoBehavior

    def render(self) -> str:
        tau = "inf" if math.isinf(self.impact_time) else f"{self.impact_time:.1f}"
        return (f"{self.object_id} ({self.relation}, {self.band}; significance {self.significance:.2f}): "
                f"{self.behavior.value} p={self.probability:.2f}, impact {tau} s; "
                f"mitigated by {self.mitigation.value}")


@dataclass(frozen=True)
class Description:
    records: tuple[Explanation, ...]
    summary: str

    @property
    def n_s(self) -> int:
        return len(self.records)

    def render(self) -> str:
        return "\n".join([r.render() for r in self.records] + [self.summary])


@dataclass(frozen=True)
class ArbitrationResult:
    selected: EgoBehavior
    max_threat: tuple[str, ObjectBehavior, float] | None
    resolved: frozenset[Cell]
    unresolved: frozenset[Cell]
    candidates_tried: tuple[EgoBehavior, ...]
    n_above_threshold: int = 0
    description: Description | None = field(default=None, compare=False)

    def as_dict(self) -> dict:
        def cells(cs):
            return [[oid, k.value] for oid, k in sorted(cs, key=lambda c: (c[0], OBJECT_BEHAVIORS.index(c[1])))]

        mt = None
        if self.max_threat is not None:
            oid, k, theta = self.max_threat
            mt = {"object": oid, "behavior": k.value, "theta": theta}
        return {
            "selected": self.selected.value,
            "max_threat": mt,
            "resolved": cells(self.resolved),
            "unresolved": cells(self.unresolved),
            "candidates_tried": [c.value for c in self.candidates_tried],
            "n_above_threshold": self.n_above_threshold,
        }


def _q(x: float) -> float:
    # products equal in exact arithmetic (0.1 * 0.1 vs 0.01) must compare equal
    return float(f"{x:.12g}")


def _rank_key(cfg: ArbiterConfig):
    order = {b: i for i, b in enumerate(cfg.tie_break)}

    def key(e: ThreatEntry):
        return (-_q(e.threat), -e.significance, order[e.counter], e.object_id, OBJECT_BEHAVIORS.index(e.behavior))

    return key


def _static_resolver(candidate: EgoBehavior, entry: ThreatEntry) -> float:
    return math.inf if candidate is entry.counter else entry.impact_time


def select_optimal(threats: ThreatMatrix, cfg: ArbiterConfig = ArbiterConfig(),
                   resimulate: Resimulator | None = None) -> ArbitrationResult:
    """Pick the ego behavior answering the largest above-threshold threat.

    The counter-behavior of the argmax cell is re-simulated against every
    above-threshold cell.  If some stay unresolved, the counter-behavior of
    the worst remaining cell is tried next, then the rest of the tie-break
    order; failing a full resolution, the candidate leaving the smallest
    summed residual threat wins.
    """
    resim = resimulate or threats.resimulate or _static_resolver
    delta = threats.horizon.delta
    key = _rank_key(cfg)
    above = sorted((e for e in threats if e.active and _q(e.threat) > _q(cfg.theta_accept)), key=key)
    if not above:
        return ArbitrationResult(EgoBehavior.KeepLane, None, frozenset(), frozenset(), (EgoBehavior.KeepLane,))

    top = above[0]
    outcomes: dict[EgoBehavior, tuple[frozenset[Cell], frozenset[Cell], list[ThreatEntry]]] = {}
    tried: list[EgoBehavior] = []
    candidate: EgoBehavior | None = top.counter
    selected = None
    while candidate is not None:
        tried.append(candidate)
        resolved, unresolved, left = [], [], []
        for e in above:
            tau = resim(candidate, e)
            if math.isinf(tau) or tau > delta:
                resolved.append((e.object_id, e.behavior))
            else:
                unresolved.append((e.object_id, e.behavior))
                left.append(e)
        outcomes[candidate] = (frozenset(resolved), frozenset(unresolved), left)
        if not left:
            selected = candidate
            break
        candidate = next((e.counter for e in left if e.counter not in tried), None)
        if candidate is None:
            candidate = next((b for b in cfg.tie_break if b not in tried), None)

    if selected is None:
        residual = {b: _q(math.fsum(e.threat for e in outcomes[b][2])) for b in tried}
        selected = min(tried, key=lambda b: (residual[b], tried.index(b)))
    resolved, unresolved, _ = outcomes[selected]
    return ArbitrationResult(
        selected=selected,
        max_threat=(top.object_id, top.behavior, top.threat),
        resolved=resolved,
        unresolved=unresolved,
        candidates_tried=tuple(tried),
        n_above_threshold=len(above),
    )


def _dominant(row: Sequence[ThreatEntry]) -> ThreatEntry:
    if any(e.threat > 0.0 for e in row):
        return min(row, key=lambda e: (-e.threat, OBJECT_BEHAVIORS.index(e.behavior)))
    return min(row, key=lambda e: (-e.probability, OBJECT_BEHAVIORS.index(e.behavior)))


def describe(links: LinkSet, result: ArbitrationResult, threats: ThreatMatrix) -> Description:
    """One explanation line per significant object plus a summary sentence."""
    sig = internal_significance(links)
    records = []
    for oid in threats.object_ids:
        obj = threats.objects.get(oid)
        rel = RELATION_WORDS.get(obj.relation, "unknown") if obj is not None else "unknown"
        band = obj.band.value.lower() if obj is not None and obj.band is not None else "unknown"
        dom = _dominant(threats.row(oid))
        records.append(Explanation(oid, rel, band, sig.get(oid, dom.significance), dom.behavior,
                                   dom.probability, dom.impact_time, dom.counter))
    if result.max_threat is None:
        summary = f"No active threats; {result.selected.value}"
    else:
        oid, k, theta = result.max_threat
        summary = (f"Selected {result.selected.value}: resolves {len(result.resolved)} of "
                   f"{result.n_above_threshold} active threats; dominant threat {oid}/{k.value} "
                   f"(Θ={theta:.2f})")
    return Description(tuple(records), summary)


def arbitrate(links: LinkSet, threats: ThreatMatrix, cfg: ArbiterConfig = ArbiterConfig(),
              resimulate: Resimulator | None = None) -> ArbitrationResult:
    """select_optimal followed by describe, with the description attached."""
    result = select_optimal(threats, cfg, resimulate)
    return replace(result, description=describe(links, result, threats))
