import math

import numpy as np
import pytest
import shapely

from scene_arbiter.kinematics import KinematicState
from scene_arbiter.links import TaskTrajectory
from scene_arbiter.scenario import build_road, load_scenario
from scene_arbiter.scene import RangeBand, Relation, SceneObject
from scene_arbiter.world import Agent


@pytest.fixture(scope="session")
def golden():
    return load_scenario("fig5_three_car")


@pytest.fixture(scope="session")
def golden_road(golden):
    return build_road(golden)


def make_object(oid="X", x=20.0, y=0.0, heading=0.0, speed=10.0, kind="TrafficCar", lane=None,
                relation=Relation.SameLaneAhead, band=RangeBand.Near, props=None,
                length=4.5, width=1.8, dynamic=True):
    return SceneObject(oid, kind, dynamic, KinematicState(x, y, heading, speed), length, width, lane,
                       props or {}, relation, band, math.hypot(x, y))


def straight_task(length=2000.0, y=0.0):
    return TaskTrajectory(((-10.0, y), (length, y)))


def ego_agent(x=0.0, y=0.0, speed=10.0, heading=0.0):
    return Agent("ego", "Ego", KinematicState(x, y, heading, speed))


def poses_to_polygons(poses, length, width):
    """Shapely footprints for an (n, 3) array of (x, y, heading) poses."""
    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    dx = np.array([length / 2, -length / 2, -length / 2, length / 2])
    dy = np.array([width / 2, width / 2, -width / 2, -width / 2])
    xs = poses[:, :1] + c[:, None] * dx - s[:, None] * dy
    ys = poses[:, 1:2] + s[:, None] * dx + c[:, None] * dy
    return shapely.polygons(np.stack([xs, ys], axis=-1))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
