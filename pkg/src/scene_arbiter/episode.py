"""Episode execution: perception, arbitration per tick, closed-loop stepping, traces."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .arbiter import ArbitrationResult, arbitrate
from .behaviors import EgoBehavior
from .geometry import wrap_angle
from .grid import render_grid
from .kinematics import ControlInput, KinematicState, RandomSource, sample_controls
from .links import LinkSet, TaskTrajectory, generate_links, significant_objects
from .maneuvers import PathFollower, lane_change_path, object_follower
from .scenario import (Scenario, build_arbiter_config, build_bounds, build_grid_spec, build_horizon,
                       build_maneuvers, build_pinned, build_rubric, build_scene_config, build_task,
                       build_world, parse_scenario, scenario_hash)
from .scene import (Entity, KindRegistry, Measurement, ObjectSet, PerceivedScene, attach_measurements,
                    generate_objects)
from .threats import ThreatMatrix, simulate_threats
from .world import Agent, WorldState, advance_world

log = logging.getLogger(__name__)


class EpisodeError(RuntimeError):
    def __init__(self, tick: int, cause: Exception):
        super().__init__(f"tick {tick}: {type(cause).__name__}: {cause}")
        self.tick = tick
        self.cause = cause


# -- perception ----------------------------------------------------------------

def perceive(world: WorldState) -> tuple[PerceivedScene, dict[str, Measurement], int | None]:
    """Ground-truth perception: entities and measurements straight from the world."""
    road = world.road
    ego = world.ego.state
    entities: list[Entity] = []
    meas: dict[str, Measurement] = {}
    for a in world.participants:
        st = a.state
        entities.append(Entity(a.id, a.kind, st.x, st.y, wrap_angle(st.heading), a.length, a.width,
                               dict(a.annotations)))
        meas[a.id] = Measurement(
            a.id,
            speed=st.speed,
            range=math.hypot(st.x - ego.x, st.y - ego.y),
            bearing=wrap_angle(math.atan2(st.y - ego.y, st.x - ego.x) - ego.heading),
            lane=road.lane_of(st.x, st.y),
        )
    for lane in road.lanes:
        line = lane.centerline
        s = min(max(line.project(ego.x, ego.y)[0], 0.0), line.length)
        x, y = line.point_at(s)
        lid = f"lane{lane.index}"
        entities.append(Entity(lid, "Lane", x, y, wrap_angle(line.heading_at(s)), line.length, lane.width,
                               {"lane_index": str(lane.index)}))
        meas[lid] = Measurement(lid, lane=lane.index)
    for b in road.buildings:
        xs = [p[0] for p in b.polygon]
        ys = [p[1] for p in b.polygon]
        entities.append(Entity(b.id, "Building", sum(xs) / len(xs), sum(ys) / len(ys), 0.0,
                               max(max(xs) - min(xs), 0.1), max(max(ys) - min(ys), 0.1)))
    for g in road.signs:
        entities.append(Entity(g.id, "TrafficSign", g.x, g.y, 0.0, g.size, g.size))
    return PerceivedScene(tuple(entities)), meas, road.lane_of(ego.x, ego.y)


@dataclass
class TickOutcome:
    objects: ObjectSet
    links: LinkSet
    important: ObjectSet
    threats: ThreatMatrix
    result: ArbitrationResult


def arbitrate_snapshot(s: Scenario, world: WorldState, task: TaskTrajectory,
                       use_pinned: bool | None = None) -> TickOutcome:
    """Run the full object -> link -> threat -> arbitration pipeline on one world snapshot.

    ``use_pinned`` defaults to the scenario mode (pinned tables in GoldenFixture).
    """
    if use_pinned is None:
        use_pinned = s.mode == "GoldenFixture"
    scene, meas, ego_lane = perceive(world)
    objects = generate_objects(scene, KindRegistry.default())
    objects = attach_measurements(objects, meas, world.ego.state, ego_lane, build_scene_config(s))
    links = generate_links(objects, task, build_rubric(s))
    important = significant_objects(objects, links, s.scene.s_min)
    # only dynamic objects carry behavior models
    important = {k: o for k, o in important.items() if o.dynamic}
    threats = simulate_threats(important, links, world.ego, task, build_horizon(s, world.clock), world.road,
                               build_maneuvers(s), pinned=build_pinned(s) if use_pinned else None)
    result = arbitrate(links, threats, build_arbiter_config(s))
    return TickOutcome(objects, links, important, threats, result)


# -- closed-loop control ---------------------------------------------------------

class EgoController:
    """Maps the arbitrated behavior onto controls; lane changes rewrite the task path."""

    def __init__(self, s: Scenario, task: TaskTrajectory):
        self.s = s
        self.params = build_maneuvers(s)
        self.task = task
        self.revision = 0
        self._followers: dict[str, PathFollower] = {}

    def _follower(self, mode: str) -> PathFollower:
        key = f"{self.revision}:{mode}"
        if key not in self._followers:
            path = self.task.path()
            p = self.params
            self._followers = {k: v for k, v in self._followers.items() if k.startswith(f"{self.revision}:")}
            if mode == "ReduceSpeed":
                f = PathFollower(path, "decel", decel=p.reduce_speed_decel, floor=p.reduce_speed_floor, params=p)
            elif mode == "EmergencyStop":
                f = PathFollower(path, "decel", decel=p.emergency_decel, params=p)
            else:
                f = PathFollower(path, "hold", params=p)
            self._followers[key] = f
        return self._followers[key]

    def control(self, ego: Agent, world: WorldState, behavior: EgoBehavior) -> ControlInput:
        dt = self.s.horizon.dt
        if behavior in (EgoBehavior.LaneChangeLeft, EgoBehavior.LaneChangeRight):
            here = world.road.lane_of(ego.state.x, ego.state.y)
            step = 1 if behavior is EgoBehavior.LaneChangeLeft else -1
            dst = None if here is None else world.road.lane(here + step)
            if dst is not None:
                reach = ego.state.speed * self.s.horizon.delta + 50.0
                path = lane_change_path(self.task.path(), dst.centerline, ego.state.x, ego.state.y,
                                        ego.state.speed, self.params, reach)
                self.task = replace(self.task, waypoints=tuple(path.points), target_lane=dst.index)
                self.revision += 1
            behavior = EgoBehavior.KeepLane
        return self._follower(behavior.value).control(ego.state, dt)


class ParticipantController:
    def __init__(self, s: Scenario, world: WorldState):
        self.s = s
        self.params = build_maneuvers(s)
        self.followers: dict[str, PathFollower | None] = {}
        self.sampled = {}
        rng = RandomSource(s.seed)
        for i, (spec, agent) in enumerate(zip(s.participants, world.participants)):
            pol = spec.policy
            if pol.type == "behavior":
                f = object_follower(agent, pol.behavior.value, world.road, s.duration + s.horizon.delta, self.params)
                if f is None:
                    f = object_follower(agent, "LaneFollow", world.road, s.duration + s.horizon.delta, self.params)
                self.followers[agent.id] = f
            elif pol.type == "sampled":
                self.sampled[agent.id] = sample_controls(rng.child(i), build_bounds(pol.bounds, s), s.ticks,
                                                         initial_steering=0.0)

    def control(self, agent: Agent, tick: int) -> ControlInput:
        dt = self.s.horizon.dt
        if agent.id in self.followers:
            return self.followers[agent.id].control(agent.state, dt)
        seq = self.sampled.get(agent.id)
        if seq is not None:
            i = min(tick, len(seq) - 1)
            a = self.params.speed_gain * (float(seq.target_speeds[i]) - agent.state.speed)
            return ControlInput(float(seq.steering[i]), a)
        return ControlInput()


# -- traces ------------------------------------------------------------------------

def _state_dict(a: Agent) -> dict:
    st = a.state
    return {"id": a.id, "x": st.x, "y": st.y, "heading": st.heading, "speed": st.speed}


def _task_dict(t: TaskTrajectory) -> dict:
    return {"waypoints": [list(p) for p in t.waypoints], "target_lane": t.target_lane,
            "destination": t.destination, "desired_speed": t.desired_speed, "comfort_accel": t.comfort_accel}


def _task_from(d: dict) -> TaskTrajectory:
    return TaskTrajectory(tuple(tuple(p) for p in d["waypoints"]), d["target_lane"], d["destination"],
                          d["desired_speed"], d["comfort_accel"])


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


@dataclass
class TraceLog:
    header: dict
    ticks: list[dict] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(_dumps(r) + "\n" for r in [self.header, *self.ticks])

    @classmethod
    def from_jsonl(cls, text: str) -> "TraceLog":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("type") != "header":
            raise ValueError("trace has no header line")
        ticks = rows[1:]
        for a, b in zip(ticks, ticks[1:]):
            if not b["tick"] > a["tick"]:
                raise ValueError("trace ticks are not strictly increasing")
        return cls(rows[0], ticks)

    @classmethod
    def load(cls, path: str | Path) -> "TraceLog":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))

    def scenario(self) -> Scenario:
        return parse_scenario(json.dumps(self.header["scenario_spec"]))

    def tick(self, n: int) -> dict:
        for rec in self.ticks:
            if rec["tick"] == n:
                return rec
        raise KeyError(f"trace has no tick {n}")


def _world_at(s: Scenario, rec: dict) -> WorldState:
    base = build_world(s)
    by_id = {p["id"]: p for p in rec["participants"]}

    def restore(a: Agent, d: dict) -> Agent:
        st = KinematicState(d["x"], d["y"], d["heading"], d["speed"], a.state.wheelbase)
        return replace(a, state=st)

    return replace(base, ego=restore(base.ego, rec["ego"]),
                   participants=tuple(restore(a, by_id[a.id]) for a in base.participants),
                   clock=rec["clock"])


def _reached_destination(ego: Agent, task: TaskTrajectory) -> bool:
    path = task.path()
    return path.project(ego.state.x, ego.state.y)[0] >= path.length


def run_episode(s: Scenario, ticks: int | None = None) -> TraceLog:
    """Run one episode.  GoldenFixture episodes never advance the world."""
    n_ticks = s.ticks if ticks is None else ticks
    world = build_world(s)
    task = build_task(s)
    header = {
        "type": "header",
        "schema_version": s.schema_version,
        "scenario": s.name,
        "mode": s.mode,
        "seed": s.seed,
        "config_hash": scenario_hash(s),
        "scenario_spec": s.model_dump(mode="json"),
    }
    trace = TraceLog(header)
    closed = s.mode == "ClosedLoop"
    ego_ctl = EgoController(s, task) if closed else None
    part_ctl = ParticipantController(s, world) if closed else None
    last_task = None
    for tick in range(n_ticks):
        if ego_ctl is not None:
            task = ego_ctl.task
        try:
            out = arbitrate_snapshot(s, world, task)
        except Exception as exc:
            raise EpisodeError(tick, exc) from exc
        rec = {
            "type": "tick",
            "tick": tick,
            "clock": world.clock,
            "ego": _state_dict(world.ego),
            "participants": [_state_dict(a) for a in world.participants],
            "threats": out.threats.as_list(),
            "result": out.result.as_dict(),
            "description": out.result.description.render(),
        }
        if task is not last_task:
            rec["task"] = _task_dict(task)
            last_task = task
        trace.ticks.append(rec)
        log.debug("tick %d: %s", tick, out.result.selected.value)
        if not closed:
            continue
        if _reached_destination(world.ego, task):
            break
        controls = {world.ego.id: ego_ctl.control(world.ego, world, out.result.selected)}
        for a in world.participants:
            controls[a.id] = part_ctl.control(a, tick)
        try:
            world = advance_world(world, controls, s.horizon.dt)
        except Exception as exc:
            raise EpisodeError(tick, exc) from exc
    return trace


def replay(trace: TraceLog) -> list[tuple[int, dict, dict]]:
    """Re-arbitrate every recorded tick; returns (tick, recorded, replayed) mismatches."""
    s = trace.scenario()
    task = None
    mismatches = []
    for rec in trace.ticks:
        if "task" in rec:
            task = _task_from(rec["task"])
        out = arbitrate_snapshot(s, _world_at(s, rec), task)
        got = out.result.as_dict()
        if got != rec["result"] or out.result.description.render() != rec["description"]:
            mismatches.append((rec["tick"], rec["result"], got))
    return mismatches


def emit_outputs(trace: TraceLog, out_dir: str | Path) -> list[Path]:
    """Write the trace, one PGM occupancy grid per tick, and a TSV plot table."""
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        grid_dir = out / "grids"
        grid_dir.mkdir(exist_ok=True)
        trace_path = out / "trace.jsonl"
        trace_path.write_text(trace.to_jsonl(), encoding="utf-8")
        written.append(trace_path)

        s = trace.scenario()
        spec = build_grid_spec(s)
        ids = [p.id for p in s.participants]
        rows = ["\t".join(["tick", "clock", "theta_max", "selected"] + [f"theta_{i}" for i in ids])]
        for rec in trace.ticks:
            grid = render_grid(_world_at(s, rec), spec)
            gp = grid_dir / f"tick_{rec['tick']:04d}.pgm"
            grid.write_pgm(gp)
            written.append(gp)
            per_obj = {i: 0.0 for i in ids}
            for e in rec["threats"]:
                per_obj[e["object"]] = max(per_obj.get(e["object"], 0.0), e["theta"])
            mt = rec["result"]["max_threat"]
            rows.append("\t".join([str(rec["tick"]), f"{rec['clock']:.3f}",
                                   f"{mt['theta'] if mt else 0.0:.6f}", rec["result"]["selected"]]
                                  + [f"{per_obj[i]:.6f}" for i in ids]))
        plot_path = out / "plot.tsv"
        plot_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        written.append(plot_path)
    except OSError as exc:
        raise IOError(f"cannot write outputs to {out}: {exc}") from exc
    return written

