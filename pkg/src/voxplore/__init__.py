"""Graph-based autonomous exploration of voxel maps with a headless mission simulator."""

from .config import MissionConfig, load_config, parse_config
from .mission import AbortedMission, Mission, MissionLog, Mode, run_mission
from .voxel_map import Box, MapSnapshot, RobotConfig, VoxelMap, VoxelState
from .world import World, load_world, parse_world

__all__ = [
    "AbortedMission", "Box", "MapSnapshot", "Mission", "MissionConfig", "MissionLog", "Mode",
    "RobotConfig", "VoxelMap", "VoxelState", "World", "load_config", "load_world",
    "parse_config", "parse_world", "run_mission",
]
