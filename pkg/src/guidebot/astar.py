"""Global path planning on the occupancy grid: obstacle inflation, 8-connected
A* with the octile heuristic, and arc-length reference sampling for the MPC."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import Point2D, Pose2D, wrap_angle
from .perception import BinaryGrid

SQRT2 = math.sqrt(2.0)
_NEIGHBORS = (
    (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
    (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2),
)


@dataclass(frozen=True)
class GridPath:
    """8-connected cell-center waypoints from start to goal."""

    waypoints: tuple[Point2D, ...]
    cost: float

    def as_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.waypoints])


def inflate(grid: BinaryGrid, radius: float) -> BinaryGrid:
    """Dilate occupied cells by a disc of the given metric radius."""
    if radius <= 0:
        return grid
    r_cells = int(math.ceil(radius / grid.geometry.resolution))
    span = np.arange(-r_cells, r_cells + 1)
    dx, dy = np.meshgrid(span, span)
    footprint = dx * dx + dy * dy <= r_cells * r_cells
    return BinaryGrid(
        ndimage.binary_dilation(grid.values, structure=footprint), grid.geometry
    )


def _octile(dr: int, dc: int) -> float:
    dr, dc = abs(dr), abs(dc)
    return (dr + dc) + (SQRT2 - 2.0) * min(dr, dc)


def astar(grid: BinaryGrid, start: Point2D, goal: Point2D) -> GridPath | None:
    """Minimum-cost 8-connected path between the cells containing start and
    goal (unit straight cost, sqrt(2) diagonals, octile heuristic).

    Raises ValueError when either endpoint is outside the grid or occupied;
    returns None when the goal is unreachable.
    """
    occ = grid.values
    h, w = occ.shape
    cells = []
    for name, p in (("start", start), ("goal", goal)):
        r, c = grid.geometry.cell_of(p.x, p.y)
        if not (0 <= r < h and 0 <= c < w):
            raise ValueError(f"{name} {p} lies outside the grid")
        if occ[r, c]:
            raise ValueError(f"{name} {p} lies on an occupied cell")
        cells.append((r, c))
    (sr, sc), (gr, gc) = cells

    g_cost = {(sr, sc): 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    tie = 0
    frontier = [(_octile(gr - sr, gc - sc), tie, sr, sc)]
    closed = set()
    while frontier:
        _, _, r, c = heapq.heappop(frontier)
        if (r, c) in closed:
            continue
        if (r, c) == (gr, gc):
            break
        closed.add((r, c))
        base = g_cost[(r, c)]
        for dr, dc, step in _NEIGHBORS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or occ[nr, nc]:
                continue
            new_cost = base + step
            if new_cost < g_cost.get((nr, nc), math.inf) - 1e-12:
                g_cost[(nr, nc)] = new_cost
                came[(nr, nc)] = (r, c)
                tie += 1
                heapq.heappush(
                    frontier, (new_cost + _octile(gr - nr, gc - nc), tie, nr, nc)
                )
    else:
        return None
    if (gr, gc) not in g_cost:
        return None
    cells_path = [(gr, gc)]
    while cells_path[-1] != (sr, sc):
        cells_path.append(came[cells_path[-1]])
    cells_path.reverse()
    waypoints = tuple(grid.geometry.cell_center(r, c) for r, c in cells_path)
    return GridPath(waypoints, g_cost[(gr, gc)])


def _project_arclength(seg_start: np.ndarray, seg_vec: np.ndarray,
                       seg_len: np.ndarray, cum: np.ndarray, p: np.ndarray) -> float:
    """Arc length of the closest point on the polyline to p."""
    rel = p - seg_start
    denom = np.maximum(seg_len**2, 1e-12)
    t = np.clip((rel * seg_vec).sum(axis=1) / denom, 0.0, 1.0)
    proj = seg_start + t[:, None] * seg_vec
    d2 = ((proj - p) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    return float(cum[i] + t[i] * seg_len[i])


def reference_from_path(
    path: GridPath, x0: Pose2D, z_steps: int, dt: float, cruise_speed: float
) -> list[Pose2D]:
    """Sample the path at cruise speed from the projection of x0.

    Returns Z poses (for horizon steps 1..Z); each heading is the tangent of
    the containing segment, and sampling saturates at the path end.
    """
    if len(path.waypoints) == 0:
        raise ValueError("path is empty")
    xy = path.as_array()
    if len(xy) == 1:
        pose = Pose2D(xy[0, 0], xy[0, 1], x0.theta)
        return [pose] * z_steps
    seg_vec = np.diff(xy, axis=0)
    seg_len = np.linalg.norm(seg_vec, axis=1)
    keep = seg_len > 1e-12
    seg_start = xy[:-1][keep]
    seg_vec = seg_vec[keep]
    seg_len = seg_len[keep]
    if len(seg_len) == 0:
        pose = Pose2D(xy[0, 0], xy[0, 1], x0.theta)
        return [pose] * z_steps
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    s0 = _project_arclength(seg_start, seg_vec, seg_len, cum[:-1],
                            np.array([x0.x, x0.y]))
    refs = []
    for k in range(1, z_steps + 1):
        s = min(s0 + k * cruise_speed * dt, total)
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(max(i, 0), len(seg_len) - 1)
        t = (s - cum[i]) / seg_len[i]
        p = seg_start[i] + t * seg_vec[i]
        heading = math.atan2(seg_vec[i][1], seg_vec[i][0])
        refs.append(Pose2D(float(p[0]), float(p[1]), wrap_angle(heading)))
    return refs
