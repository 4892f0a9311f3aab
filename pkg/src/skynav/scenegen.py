"""Procedural benchmark scenes and episode suites for the four archetypes.

Each archetype has a fixed object vocabulary and fixed instance counts; only
placement and attribute assignment vary with the seed, so generated scenes
are fully reproducible. Episode construction picks goal objects that are
actually discoverable (line of sight from the scan column at some altitude)
and reachable on the oracle occupancy grid, then derives the instruction,
optimal path length, and success radius for each.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .executive import (
    DEFAULT_TAKEOFF_ALTITUDE,
    EpisodeSpec,
    PipelineConfig,
    bfs_distances,
    build_episode_spec,
    step_seed,
)
from .language import ObjectRef
from .planner import Unreachable, rasterize, select_target_cell
from .world import (
    AABB,
    ARCHETYPES,
    CameraModel,
    Pose,
    Scene,
    SceneObject,
    Vec3,
    visible_objects,
)


class UnknownArchetype(Exception):
    pass


#: Documented label vocabulary per archetype; instance counts are fixed.
ARCHETYPE_VOCAB = {
    "warehouse": ("shelf", "box", "pallet", "forklift", "crate", "drum"),
    "park": ("tree", "bench", "fountain", "statue", "bin"),
    "neighborhood": ("house", "car", "mailbox", "tree", "hydrant"),
    "office": ("desk", "chair", "cabinet", "plant", "monitor", "couch"),
}

_COLORS = ("red", "blue", "green", "yellow", "orange", "white", "black", "gray")

#: Labels never used as navigation goals (too large to approach closely).
_STRUCTURAL_LABELS = {"shelf", "house"}

_INSTRUCTION_TEMPLATES = (
    "take off, fly to the {np}, then land",
    "fly to the {np}",
    "take off, navigate to the {np}, then land",
    "take off, go to the {np} and then land",
    "search for the {np}, then fly to the {np}, then land",
    "take off, head to the {np}",
)


@dataclass
class _Builder:
    rng: random.Random
    bounds: AABB
    start: Vec3
    objects: list[SceneObject]
    counters: dict[str, int]

    def _next_id(self, label: str) -> str:
        n = self.counters.get(label, 0)
        self.counters[label] = n + 1
        return f"{label}-{n}"

    def add(self, label: str, box: AABB, color: str | None = None,
            extra: tuple[str, ...] = (), obstacle: bool = True) -> SceneObject:
        attrs = frozenset(((color,) if color else ()) + extra)
        obj = SceneObject(self._next_id(label), label, attrs, box, obstacle)
        self.objects.append(obj)
        return obj

    def fits(self, box: AABB, margin: float = 0.3,
             start_clear: float = 1.7) -> bool:
        if not self.bounds.contains_box(box):
            return False
        grown = box.inflated(margin)
        if any(o.aabb.overlaps(grown) for o in self.objects):
            return False
        # Keep the takeoff/scan column clear at every altitude.
        cx = min(max(self.start.x, box.min.x), box.max.x)
        cy = min(max(self.start.y, box.min.y), box.max.y)
        dx, dy = self.start.x - cx, self.start.y - cy
        return dx * dx + dy * dy >= start_clear * start_clear

    def scatter(self, label: str, count: int, size: tuple[float, float, float],
                colors: tuple[str, ...] | tuple[None, ...] = (None,),
                z0: float = 0.0, region: AABB | None = None,
                attempts: int = 200) -> None:
        region = region or self.bounds
        sx, sy, sz = size
        for i in range(count):
            color = colors[i % len(colors)]
            for attempt in range(attempts):
                margin = 0.3 if attempt < attempts // 2 else 0.1
                cx = self.rng.uniform(region.min.x + sx / 2 + 0.6,
                                      region.max.x - sx / 2 - 0.6)
                cy = self.rng.uniform(region.min.y + sy / 2 + 0.6,
                                      region.max.y - sy / 2 - 0.6)
                box = _footprint(cx, cy, sx, sy, sz, z0)
                if self.fits(box, margin=margin):
                    self.add(label, box, color)
                    break
            else:
                raise RuntimeError(
                    f"could not place {label} {i} with seed; scene too dense")


def _footprint(cx: float, cy: float, sx: float, sy: float, sz: float,
               z0: float = 0.0) -> AABB:
    return AABB(Vec3(cx - sx / 2, cy - sy / 2, z0),
                Vec3(cx + sx / 2, cy + sy / 2, z0 + sz))


def _palette(rng: random.Random, n: int) -> tuple[str, ...]:
    colors = list(_COLORS)
    rng.shuffle(colors)
    while len(colors) < n:
        colors += colors
    return tuple(colors[:n])


def _build_warehouse(rng: random.Random) -> _Builder:
    bounds = AABB(Vec3(0, 0, 0), Vec3(24, 18, 6))
    b = _Builder(rng, bounds, Vec3(1.75, 9.25, 0), [], {})
    for row, y in enumerate((4.0, 9.5, 15.0)):
        height = rng.uniform(2.4, 3.0)
        for seg, (x0, x1) in enumerate(((5.0, 10.5), (13.0, 18.5))):
            box = AABB(Vec3(x0, y - 0.5, 0), Vec3(x1, y + 0.5, height))
            b.add("shelf", box, "gray", extra=("metal",))
    b.scatter("box", 6, (0.8, 0.8, 0.8), _palette(rng, 6))
    b.scatter("pallet", 3, (1.2, 1.2, 0.3), ("brown", "brown", "blue"))
    b.scatter("forklift", 1, (1.6, 1.0, 2.0), ("yellow",))
    b.scatter("crate", 2, (1.0, 1.0, 1.0), _palette(rng, 2))
    b.scatter("drum", 2, (0.6, 0.6, 0.9), ("blue", "red"))
    return b


def _build_park(rng: random.Random) -> _Builder:
    bounds = AABB(Vec3(0, 0, 0), Vec3(28, 28, 9))
    b = _Builder(rng, bounds, Vec3(2.25, 14.25, 0), [], {})
    b.add("fountain", _footprint(14 + rng.uniform(-2, 2),
                                 14 + rng.uniform(-2, 2), 2.4, 2.4, 1.2),
          "gray", extra=("stone",))
    for _ in range(7):
        height = rng.uniform(3.0, 4.5)
        b.scatter("tree", 1, (0.8, 0.8, height), ("green",))
    b.scatter("bench", 4, (1.6, 0.6, 0.9), ("red", "green", "blue", "brown"))
    b.scatter("statue", 1, (1.0, 1.0, 2.2), ("white",))
    b.scatter("bin", 2, (0.5, 0.5, 1.0), ("black", "green"))
    return b


def _build_neighborhood(rng: random.Random) -> _Builder:
    bounds = AABB(Vec3(0, 0, 0), Vec3(36, 26, 8))
    b = _Builder(rng, bounds, Vec3(2.25, 13.25, 0), [], {})
    house_colors = _palette(rng, 6)
    for i, y in enumerate((5.5, 20.5)):
        for j, x in enumerate((9.0, 18.0, 27.0)):
            jx = rng.uniform(-0.8, 0.8)
            b.add("house", _footprint(x + jx, y, 6.0, 5.0, 4.0),
                  house_colors[i * 3 + j])
    street = AABB(Vec3(4, 9.5, 0), Vec3(34, 16.5, 8))
    b.scatter("car", 4, (4.0, 1.8, 1.5), _palette(rng, 4), region=street)
    b.scatter("mailbox", 3, (0.3, 0.3, 1.1), ("red", "blue", "black"),
              region=street)
    for _ in range(4):
        b.scatter("tree", 1, (0.8, 0.8, rng.uniform(3.0, 4.0)), ("green",))
    b.scatter("hydrant", 1, (0.4, 0.4, 0.8), ("red",), region=street)
    return b


def _build_office(rng: random.Random) -> _Builder:
    bounds = AABB(Vec3(0, 0, 0), Vec3(20, 14, 3))
    b = _Builder(rng, bounds, Vec3(1.25, 7.25, 0), [], {})
    desk_colors = _palette(rng, 6)
    desk_tops: list[AABB] = []
    for i, x in enumerate((6.0, 11.0, 16.0)):
        for j, y in enumerate((3.5, 10.5)):
            jx, jy = rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)
            box = _footprint(x + jx, y + jy, 1.6, 0.8, 0.75)
            b.add("desk", box, desk_colors[i * 2 + j])
            desk_tops.append(box)
    chair_colors = _palette(rng, 6)
    for i, desk in enumerate(desk_tops):
        side = 1 if desk.center.y < 7 else -1
        box = _footprint(desk.center.x, desk.center.y + side * 1.1,
                         0.5, 0.5, 0.9)
        if b.fits(box, margin=0.1):
            b.add("chair", box, chair_colors[i])
        else:
            b.scatter("chair", 1, (0.5, 0.5, 0.9), (chair_colors[i],))
    for i in rng.sample(range(len(desk_tops)), 3):
        desk = desk_tops[i]
        b.add("monitor",
              _footprint(desk.center.x, desk.center.y, 0.5, 0.15, 0.4,
                         z0=desk.max.z),
              "black")
    b.scatter("cabinet", 2, (0.9, 0.5, 1.8), ("gray", "white"))
    b.scatter("plant", 2, (0.4, 0.4, 1.2), ("green",))
    b.scatter("couch", 1, (1.8, 0.8, 0.8), ("blue",))
    return b


_BUILDERS = {
    "warehouse": _build_warehouse,
    "park": _build_park,
    "neighborhood": _build_neighborhood,
    "office": _build_office,
}


def generate_scene(archetype: str, seed: int) -> Scene:
    """Deterministically generate a scene of the given archetype."""
    if archetype not in ARCHETYPES:
        raise UnknownArchetype(f"unknown archetype {archetype!r}")
    rng = random.Random(step_seed(seed, archetype))
    builder = _BUILDERS[archetype](rng)
    return Scene(
        name=f"{archetype}-{seed}",
        bounds=builder.bounds,
        objects=tuple(builder.objects),
        start_pose=Pose(builder.start, 0.0),
        archetype=archetype,
    )


# ---------------------------------------------------------------------------
# Episode suites
# ---------------------------------------------------------------------------

def _scan_altitudes(scene: Scene, config: PipelineConfig) -> list[float]:
    alts = []
    z = scene.ground_z + DEFAULT_TAKEOFF_ALTITUDE
    for _ in range(config.scan_max_ascents + 1):
        if z > scene.bounds.max.z:
            break
        alts.append(z)
        z += config.scan_ascend
    return alts


def _sees(scene: Scene, camera: CameraModel, eye: Vec3,
          obj_id: str, center: Vec3) -> bool:
    import math

    yaw = math.atan2(center.y - eye.y, center.x - eye.x)
    for obj, _, _, _ in visible_objects(Pose(eye, yaw), camera, scene):
        if obj.id == obj_id:
            return True
    return False


def goal_candidates(scene: Scene, config: PipelineConfig,
                    grid=None, dist_field=None) -> list[SceneObject]:
    """Objects suitable as navigation goals for this scene.

    A candidate must be compact, sit low enough to land beside, have line of
    sight from the start scan column at some altitude, be reachable on the
    oracle grid, and be observable from its own approach cell.
    """
    if grid is None:
        grid = rasterize(scene, config.resolution, config.clearance)
    start = scene.start_pose.position
    start_cell = grid.cell_of(
        Vec3(start.x, start.y, scene.ground_z + DEFAULT_TAKEOFF_ALTITUDE))
    if dist_field is None:
        dist_field = (bfs_distances(grid, start_cell)
                      if grid.is_free(start_cell) else {})
    alts = _scan_altitudes(scene, config)
    pcfg = config.planner()
    out = []
    for obj in sorted(scene.objects, key=lambda o: o.id):
        if obj.label in _STRUCTURAL_LABELS:
            continue
        c = obj.aabb.center
        half_x = (obj.aabb.max.x - obj.aabb.min.x) / 2
        half_y = (obj.aabb.max.y - obj.aabb.min.y) / 2
        if c.z > 2.3 or max(half_x, half_y) > 1.8:
            continue
        if not any(_sees(scene, config.camera, Vec3(start.x, start.y, z),
                         obj.id, c) for z in alts):
            continue
        try:
            target = select_target_cell(grid, c, pcfg)
        except Unreachable:
            continue
        if target not in dist_field:
            continue
        arrival = grid.cell_center(target)
        if not _sees(scene, config.camera, arrival, obj.id, c):
            continue
        out.append(obj)
    return out


def _noun_phrase(obj: SceneObject, scene: Scene, rng: random.Random) -> str:
    colors = sorted(a for a in obj.attributes if a in _COLORS)
    same_label = sum(1 for o in scene.objects if o.label == obj.label)
    if colors and (same_label > 1 or rng.random() < 0.5):
        return f"{colors[0]} {obj.label}"
    return obj.label


def make_episodes(
    scene: Scene,
    count: int,
    seed: int,
    config: PipelineConfig,
    max_steps: int = 250,
) -> list[EpisodeSpec]:
    """Build a deterministic episode suite over the scene's goal candidates."""
    grid = rasterize(scene, config.resolution, config.clearance)
    start = scene.start_pose.position
    start_cell = grid.cell_of(
        Vec3(start.x, start.y, scene.ground_z + DEFAULT_TAKEOFF_ALTITUDE))
    dist_field = (bfs_distances(grid, start_cell)
                  if grid.is_free(start_cell) else {})
    candidates = goal_candidates(scene, config, grid, dist_field)
    if not candidates:
        raise ValueError(f"scene {scene.name} has no reachable goal objects")
    rng = random.Random(step_seed(seed, f"episodes:{scene.name}"))
    specs = []
    for i in range(count):
        obj = candidates[i % len(candidates)]
        np_text = _noun_phrase(obj, scene, rng)
        template = _INSTRUCTION_TEMPLATES[i % len(_INSTRUCTION_TEMPLATES)]
        instruction = template.format(np=np_text)
        words = np_text.split()
        goal = ObjectRef(label=words[-1], attributes=frozenset(words[:-1]))
        specs.append(build_episode_spec(
            scene, instruction, config,
            seed=step_seed(seed, f"{scene.name}:{i}"),
            max_steps=max_steps, goal=goal,
            grid=grid, dist_field=dist_field))
    return specs
