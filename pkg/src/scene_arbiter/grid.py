"""Ego-centric bird's-eye occupancy grids and PGM export."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import points_in_polygon, points_in_rect
from .world import WorldState

FREE, OCCUPIED, UNKNOWN = 0, 1, 2
PGM_LEVELS = np.array([255, 0, 128], dtype=np.uint8)  # indexed by cell code


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry and sensor field of view.

    Columns run along the ego's forward axis and rows from the ego's left
    (row 0) to its right; the ego sits at the grid centre.
    """
    width: int = 100
    height: int = 100
    resolution: float = 0.5
    max_range: float = 50.0
    half_angle: float = math.pi / 2

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("grid resolution must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell")

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Ego-frame (forward, left) coordinates of every cell centre, shape (height, width)."""
        cols = (np.arange(self.width) - self.width / 2 + 0.5) * self.resolution
        rows = (self.height / 2 - np.arange(self.height) - 0.5) * self.resolution
        return np.meshgrid(cols, rows)


@dataclass(frozen=True)
class OccupancyGrid:
    cells: np.ndarray  # (height, width) of FREE / OCCUPIED / UNKNOWN
    resolution: float
    origin: tuple[float, float, float]  # ego pose (x, y, heading)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def counts(self) -> dict[str, int]:
        return {
            "free": int(np.count_nonzero(self.cells == FREE)),
            "occupied": int(np.count_nonzero(self.cells == OCCUPIED)),
            "unknown": int(np.count_nonzero(self.cells == UNKNOWN)),
        }

    def to_pgm(self) -> bytes:
        img = PGM_LEVELS[self.cells]
        header = f"P5\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + img.tobytes()

    def write_pgm(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_pgm())


def render_grid(world: WorldState, spec: GridSpec = GridSpec()) -> OccupancyGrid:
    ego = world.ego.state
    fwd, left = spec.cell_centers()
    in_fov = (np.hypot(fwd, left) <= spec.max_range) & (np.abs(np.arctan2(left, fwd)) <= spec.half_angle)

    c, s = math.cos(ego.heading), math.sin(ego.heading)
    wx = ego.x + c * fwd - s * left
    wy = ego.y + s * fwd + c * left

    occupied = np.zeros(fwd.shape, dtype=bool)
    for a in world.participants:
        st = a.state
        occupied |= points_in_rect(wx, wy, st.x, st.y, st.heading, a.length, a.width)
    for b in world.road.buildings:
        occupied |= points_in_polygon(wx, wy, b.polygon)

    cells = np.full(fwd.shape, UNKNOWN, dtype=np.uint8)
    cells[in_fov] = FREE
    cells[in_fov & occupied] = OCCUPIED
    return OccupancyGrid(cells, spec.resolution, (ego.x, ego.y, ego.heading))
