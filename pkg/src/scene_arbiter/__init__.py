"""Significance-weighted behavior arbitration for an ego vehicle, with a
single-track micro-simulator for closed-loop runs."""

from .arbiter import ArbiterConfig, ArbitrationResult, Description, arbitrate, describe, select_optimal
from .behaviors import EgoBehavior, ObjectBehavior
from .episode import TraceLog, emit_outputs, replay, run_episode
from .grid import GridSpec, OccupancyGrid, render_grid
from .kinematics import (ControlBounds, ControlInput, KinematicState, RandomSource, sample_controls,
                         step_single_track)
from .links import SignificanceRubric, TaskTrajectory, generate_links, significant_objects
from .scenario import Scenario, SchemaError, SemanticError, load_scenario, parse_scenario, serialize_scenario
from .scene import (KindRegistry, PerceivedScene, Relation, RangeBand, attach_measurements, generate_objects,
                    partition_static_dynamic)
from .threats import (BehaviorDistribution, ThreatMatrix, TimeHorizon, counter_behavior, impact_time,
                      predict_behavior_distribution, simulate_threats)
from .world import WorldState, advance_world

__version__ = "0.1.0"
