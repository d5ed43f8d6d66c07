"""GridShift: grid-based mode-seeking clustering."""

from .engine import ClusterLabeling, EngineConfig, run, run_traced
from .grid import ActiveGridMap, CellRecord, build_active_grid, grid_index, neighborhood

__all__ = [
    "ActiveGridMap",
    "CellRecord",
    "ClusterLabeling",
    "EngineConfig",
    "build_active_grid",
    "grid_index",
    "neighborhood",
    "run",
    "run_traced",
]
