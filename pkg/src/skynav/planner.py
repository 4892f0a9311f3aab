"""Occupancy-grid task planning: rasterize, search, compile to actions.

Grids are 6-connected (no diagonals) so every cell step compiles exactly to
the discrete action set: a minimal turn plus MOVE_FORWARD for horizontal
steps, ASCEND/DESCEND for vertical ones. A* tie-breaking is pinned (lower f,
then lower z, then lexicographic x, y) to keep plans byte-reproducible.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .language import SubGoal
from .perception import Detection
from .world import (
    AABB,
    Action,
    CameraModel,
    DEFAULT_CAMERA,
    DEFAULT_CLEARANCE,
    Pose,
    Scene,
    Vec3,
    WorldError,
    apply_action,
    signed_angle,
)

DEFAULT_RESOLUTION = 0.5

Cell = tuple[int, int, int]

_NEIGHBOR_STEPS: tuple[Cell, ...] = (
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


class PlannerError(Exception):
    pass


class Unreachable(PlannerError):
    """No collision-free cell path exists between the endpoints."""


class ValidationFailure(PlannerError):
    """Replay of an assembled plan failed at the given step index."""

    def __init__(self, step_index: int, detail: str):
        super().__init__(f"plan invalid at step {step_index}: {detail}")
        self.step_index = step_index


@dataclass(frozen=True)
class NeedsSearch:
    """Signal that a grounded sub-goal has no matching detection yet."""

    label: str


@dataclass
class OccupancyGrid:
    resolution: float
    origin: Vec3
    dims: tuple[int, int, int]
    occupied: np.ndarray  # bool, shape dims
    _centers: np.ndarray | None = field(default=None, repr=False)

    def cell_center(self, cell: Cell) -> Vec3:
        r = self.resolution
        return Vec3(self.origin.x + (cell[0] + 0.5) * r,
                    self.origin.y + (cell[1] + 0.5) * r,
                    self.origin.z + (cell[2] + 0.5) * r)

    def cell_of(self, p: Vec3) -> Cell:
        r = self.resolution
        cell = (int(math.floor((p.x - self.origin.x) / r)),
                int(math.floor((p.y - self.origin.y) / r)),
                int(math.floor((p.z - self.origin.z) / r)))
        return tuple(min(max(c, 0), n - 1)
                     for c, n in zip(cell, self.dims))  # type: ignore[return-value]

    def in_bounds(self, cell: Cell) -> bool:
        return all(0 <= c < n for c, n in zip(cell, self.dims))

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not bool(self.occupied[cell])

    def centers(self) -> np.ndarray:
        """(N, 3) array of all cell centers in C index order, cached."""
        if self._centers is None:
            nx, ny, nz = self.dims
            ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny),
                                     np.arange(nz), indexing="ij")
            r = self.resolution
            self._centers = np.stack([
                self.origin.x + (ii.ravel() + 0.5) * r,
                self.origin.y + (jj.ravel() + 0.5) * r,
                self.origin.z + (kk.ravel() + 0.5) * r,
            ], axis=1)
        return self._centers


def rasterize(scene: Scene, resolution: float = DEFAULT_RESOLUTION,
              clearance: float = DEFAULT_CLEARANCE) -> OccupancyGrid:
    """Rasterize scene obstacles into a grid covering the scene bounds.

    A cell is occupied iff its clearance-inflated volume strictly overlaps
    some obstacle box, i.e. any pose inside a free cell keeps the whole
    clearance sphere away from every obstacle.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    b = scene.bounds
    extent = (b.max.x - b.min.x, b.max.y - b.min.y, b.max.z - b.min.z)
    dims = tuple(max(1, int(math.floor(e / resolution + 1e-9)))
                 for e in extent)
    occupied = np.zeros(dims, dtype=bool)
    origin = b.min
    for obj in scene.objects:
        if not obj.is_obstacle:
            continue
        box = obj.aabb.inflated(clearance)
        lo = ((box.min.x - origin.x) / resolution,
              (box.min.y - origin.y) / resolution,
              (box.min.z - origin.z) / resolution)
        hi = ((box.max.x - origin.x) / resolution,
              (box.max.y - origin.y) / resolution,
              (box.max.z - origin.z) / resolution)
        idx = []
        empty = False
        for a, bb, n in zip(lo, hi, dims):
            i0 = max(0, int(math.floor(a + 1e-9)))
            i1 = min(n - 1, int(math.ceil(bb - 1e-9)) - 1)
            if i1 < i0:
                empty = True
                break
            idx.append((i0, i1))
        if empty:
            continue
        (i0, i1), (j0, j1), (k0, k1) = idx
        occupied[i0:i1 + 1, j0:j1 + 1, k0:k1 + 1] = True
    return OccupancyGrid(resolution, origin, dims, occupied)


def shortest_path(grid: OccupancyGrid, from_cell: Cell, to_cell: Cell) -> list[Cell]:
    """Minimal 6-connected cell path via A* with a Manhattan heuristic."""
    for name, cell in (("from_cell", from_cell), ("to_cell", to_cell)):
        if not grid.is_free(cell):
            raise ValueError(f"{name} {cell} is not a free cell")
    if from_cell == to_cell:
        return [from_cell]

    def h(c: Cell) -> int:
        return (abs(c[0] - to_cell[0]) + abs(c[1] - to_cell[1])
                + abs(c[2] - to_cell[2]))

    g: dict[Cell, int] = {from_cell: 0}
    came: dict[Cell, Cell] = {}
    # Heap key pins the pop order: lower f, then lower z, then lexicographic
    # (x, y). Stale entries are skipped via the g check.
    open_heap: list[tuple[int, int, int, int]] = [
        (h(from_cell), from_cell[2], from_cell[0], from_cell[1])]
    occupied = grid.occupied
    nx, ny, nz = grid.dims
    while open_heap:
        f, z, x, y = heapq.heappop(open_heap)
        current = (x, y, z)
        gc = g[current]
        if f > gc + h(current):
            continue
        if current == to_cell:
            path = [current]
            while current in came:
                current = came[current]
                path.append(current)
            path.reverse()
            return path
        for dx, dy, dz in _NEIGHBOR_STEPS:
            nxt = (x + dx, y + dy, z + dz)
            if not (0 <= nxt[0] < nx and 0 <= nxt[1] < ny and 0 <= nxt[2] < nz):
                continue
            if occupied[nxt]:
                continue
            tentative = gc + 1
            if tentative < g.get(nxt, 1 << 60):
                g[nxt] = tentative
                came[nxt] = current
                heapq.heappush(open_heap,
                               (tentative + h(nxt), nxt[2], nxt[0], nxt[1]))
    raise Unreachable(f"no path from {from_cell} to {to_cell}")


def path_to_actions(cells: list[Cell], initial_yaw: float,
                    resolution: float) -> list[Action]:
    """Compile a 6-connected cell path into discrete actions.

    Horizontal steps become a minimal turn (when heading changes) plus a
    MOVE_FORWARD; vertical steps become ASCEND/DESCEND. Consecutive co-linear
    translations merge into one action.
    """
    actions: list[Action] = []
    yaw = initial_yaw

    def push(action: Action) -> None:
        if actions and actions[-1].kind == action.kind and action.kind in (
                "MOVE_FORWARD", "ASCEND", "DESCEND"):
            actions[-1] = Action(action.kind, actions[-1].value + action.value)
        else:
            actions.append(action)

    for prev, nxt in zip(cells, cells[1:]):
        dx, dy, dz = (nxt[0] - prev[0], nxt[1] - prev[1], nxt[2] - prev[2])
        if abs(dx) + abs(dy) + abs(dz) != 1:
            raise ValueError(f"path is not 6-connected at {prev}->{nxt}")
        if dz != 0:
            push(Action.ascend(resolution) if dz > 0
                 else Action.descend(resolution))
            continue
        target_yaw = math.atan2(dy, dx)
        delta = signed_angle(target_yaw - yaw)
        if abs(delta) > 1e-12:
            push(Action.turn_left(delta) if delta > 0
                 else Action.turn_right(-delta))
            yaw = target_yaw
        push(Action.move_forward(resolution))
    return actions


@dataclass(frozen=True)
class ActionPlan:
    """Final execution plan: actions annotated with their sub-goal index."""

    steps: tuple[tuple[Action, int], ...]
    estimated_length: float

    def to_json(self) -> dict:
        return {
            "schema": "plan/1",
            "steps": [{**action.to_json(), "subgoal": idx}
                      for action, idx in self.steps],
            "estimated_length": self.estimated_length,
        }


@dataclass(frozen=True)
class PlannerConfig:
    resolution: float = DEFAULT_RESOLUTION
    clearance: float = DEFAULT_CLEARANCE
    camera: CameraModel = DEFAULT_CAMERA
    fly_over_offset: float = 1.5
    #: Margin (rad) kept inside the vertical fov when choosing approach cells.
    view_margin: float = 0.1


def select_target_cell(grid: OccupancyGrid, point: Vec3,
                       config: PlannerConfig,
                       require_view: bool = True) -> Cell:
    """Free cell nearest to a world point, preferring cells that can see it.

    With require_view, cells from which the point sits outside the camera's
    vertical cone (for any heading) are skipped so the drone arrives at a
    vantage it can confirm the target from; if no such cell exists the
    constraint is dropped. Ties break on (distance, z, x, y).
    """
    centers = grid.centers()
    target = np.array(point.as_tuple())
    delta = centers - target
    d2 = (delta * delta).sum(axis=1)
    free = ~grid.occupied.ravel()
    candidates = free.copy()
    if require_view:
        cam = config.camera
        horiz = np.hypot(delta[:, 0], delta[:, 1])
        elevation = np.arctan2(-delta[:, 2], horiz)
        half = cam.vertical_fov / 2.0 - config.view_margin
        in_cone = (np.abs(elevation - cam.pitch) <= half) | (d2 < grid.resolution ** 2)
        in_range = d2 <= (0.9 * cam.max_range) ** 2
        viewing = candidates & in_cone & in_range
        if viewing.any():
            candidates = viewing
    if not candidates.any():
        raise Unreachable("every grid cell is occupied")
    idx = np.nonzero(candidates)[0]
    nx, ny, nz = grid.dims
    xs, rem = np.divmod(idx, ny * nz)
    ys, zs = np.divmod(rem, nz)
    order = np.lexsort((ys, xs, zs, np.round(d2[idx], 9)))
    best = order[0]
    return (int(xs[best]), int(ys[best]), int(zs[best]))


def plan_subgoal(
    subgoal: SubGoal,
    pose: Pose,
    detections: list[Detection],
    grid: OccupancyGrid,
    scene: Scene,
    config: PlannerConfig,
) -> list[Action] | NeedsSearch:
    """Compile one sub-goal into an action segment.

    Grounded sub-goals require a matching detection and return NeedsSearch
    without one (the executive owns the search behavior). Altitude, hover,
    takeoff and plain landing sub-goals compile directly.
    """
    kind = subgoal.kind
    ground = scene.ground_z
    z = pose.position.z
    if kind == "TAKEOFF":
        return [Action.takeoff(subgoal.value)]
    if kind in ("ASCEND_TO", "DESCEND_TO"):
        dz = (ground + subgoal.value) - z
        if dz > 1e-9:
            return [Action.ascend(dz)]
        if dz < -1e-9:
            return [Action.descend(-dz)]
        return []
    if kind == "HOVER":
        return [Action.hover(max(1, round(subgoal.value)))]
    if kind == "LAND":
        return [Action.land()]

    assert subgoal.ref is not None
    matches = [d for d in detections if d.label == subgoal.ref.label]
    if kind == "SEARCH":
        # Complete once anything matching is in view; scanning is not ours.
        return [] if matches else NeedsSearch(subgoal.ref.label)
    if not matches:
        return NeedsSearch(subgoal.ref.label)
    best = min(matches, key=lambda d: (-d.confidence, d.range, d.object_id))
    point = best.world_position(pose)
    if kind == "FLY_OVER":
        point = Vec3(point.x, point.y, point.z + config.fly_over_offset)
    target = select_target_cell(grid, point, config,
                                require_view=(kind != "FLY_OVER"))
    start = grid.cell_of(pose.position)
    path = shortest_path(grid, start, target)
    # Align altitude to the start cell center first so the compiled path
    # flies along cell-center planes and never grazes the ground layer.
    actions: list[Action] = []
    dz = grid.cell_center(start).z - pose.position.z
    if abs(dz) > 1e-9:
        actions.append(Action.ascend(dz) if dz > 0 else Action.descend(-dz))
    actions.extend(path_to_actions(path, pose.yaw, grid.resolution))
    if kind == "LAND_AT":
        actions.append(Action.land())
    return actions


def assemble_mission(
    segments: list[list[Action]],
    scene: Scene,
    start_pose: Pose,
    clearance: float = DEFAULT_CLEARANCE,
) -> ActionPlan:
    """Concatenate per-sub-goal segments and validate by replay.

    The whole plan is replayed through the world kinematics from the start
    pose; any collision or bounds violation raises ValidationFailure with the
    offending step index. estimated_length is the summed translation distance
    observed during the replay.
    """
    steps = tuple((action, idx)
                  for idx, segment in enumerate(segments)
                  for action in segment)
    pose = start_pose
    total = 0.0
    for step_index, (action, _) in enumerate(steps):
        try:
            nxt = apply_action(pose, action, scene, clearance)
        except WorldError as exc:
            raise ValidationFailure(step_index, str(exc)) from exc
        total += nxt.position.dist(pose.position)
        pose = nxt
    return ActionPlan(steps, total)
