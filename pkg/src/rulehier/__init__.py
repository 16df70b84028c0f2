"""Motion planning with rule hierarchies expressed as rank-preserving rewards."""

from .dynamics import ControlInput, EgoState, VehicleParams
from .hierarchy import RuleHierarchy, rank, reward_hard, reward_smooth, scale_robustness
from .planner import PlannerConfig, plan_cycle

__version__ = "0.1.0"

__all__ = [
    "ControlInput",
    "EgoState",
    "VehicleParams",
    "RuleHierarchy",
    "rank",
    "reward_hard",
    "reward_smooth",
    "scale_robustness",
    "PlannerConfig",
    "plan_cycle",
]
