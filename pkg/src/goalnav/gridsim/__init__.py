from .world import (
    Action,
    AgentState,
    EpisodeDoneError,
    EpisodeRecord,
    GridEnv,
    RewardConfig,
    UNREACHABLE,
    WorldGenError,
    WorldMap,
    WorldObject,
    distance_field,
    format_world,
    generate_world,
    geodesic,
    parse_world,
)
from .render import detect_oracle, render
from .metrics import spl, success_rate
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "Action", "AgentState", "EpisodeDoneError", "EpisodeRecord", "GridEnv",
    "RewardConfig", "UNREACHABLE", "WorldGenError", "WorldMap", "WorldObject",
    "distance_field", "format_world", "generate_world", "geodesic",
    "parse_world", "detect_oracle", "render", "spl", "success_rate",
    "KERNEL_BACKEND",
]
