from enum import Enum


class ObjectBehavior(str, Enum):
    """Hypotheses simulated for every significant traffic participant."""
    LaneFollow = "LaneFollow"
    LaneChangeRight = "LaneChangeRight"
    LaneChangeLeft = "LaneChangeLeft"
    Stop = "Stop"


class EgoBehavior(str, Enum):
    KeepLane = "KeepLane"
    ReduceSpeed = "ReduceSpeed"
    LaneChangeLeft = "LaneChangeLeft"
    LaneChangeRight = "LaneChangeRight"
    EmergencyStop = "EmergencyStop"


OBJECT_BEHAVIORS = tuple(ObjectBehavior)
EGO_BEHAVIORS = tuple(EgoBehavior)
