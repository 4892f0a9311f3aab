"""Deterministic 3D world model: scenes, discrete drone kinematics, camera visibility.

All spatial quantities are meters, all angles radians. The drone body is a
sphere of configurable clearance radius; obstacles are axis-aligned boxes.
Every operation here is a pure function over immutable inputs, so the module
is safe to use from any number of parallel episode workers.
"""

from __future__ import annotations

import json
import math
import weakref
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

SCENE_SCHEMA = "scene/1"
ARCHETYPES = ("warehouse", "park", "neighborhood", "office")

#: Discrete action vocabulary. This enumeration is the planner's entire
#: command set; parameterized kinds carry one positive scalar.
ACTION_KINDS = (
    "TAKEOFF",
    "LAND",
    "HOVER",
    "MOVE_FORWARD",
    "TURN_LEFT",
    "TURN_RIGHT",
    "ASCEND",
    "DESCEND",
)

_PARAM_UNITS = {
    "TAKEOFF": "altitude_m",
    "HOVER": "steps",
    "MOVE_FORWARD": "meters",
    "TURN_LEFT": "radians",
    "TURN_RIGHT": "radians",
    "ASCEND": "meters",
    "DESCEND": "meters",
}

DEFAULT_CLEARANCE = 0.3
OCCLUSION_SAMPLES = 16
_GROUND_EPS = 1e-6


class WorldError(Exception):
    """Base class for kinematics and scene errors."""


class CollisionError(WorldError):
    """Swept motion path intersects a clearance-inflated obstacle box."""


class OutOfBoundsError(WorldError):
    """Resulting position would leave the scene bounds."""


class InvalidFromGround(WorldError):
    """Motion action other than TAKEOFF attempted while landed."""


class SceneFormatError(WorldError):
    """Scene document does not match the scene/1 schema."""


def wrap_angle(angle: float) -> float:
    """Normalize an angle to [0, 2*pi)."""
    a = math.fmod(angle, TWO_PI)
    return a + TWO_PI if a < 0 else a


def signed_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(angle, TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValueError(f"non-finite component in {self!r}")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def dist(self, other: "Vec3") -> float:
        return (self - other).norm()

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "z": self.z}

    @staticmethod
    def from_json(doc: dict) -> "Vec3":
        return Vec3(float(doc["x"]), float(doc["y"]), float(doc["z"]))


@dataclass(frozen=True)
class AABB:
    """Axis-aligned box, min <= max componentwise."""

    min: Vec3
    max: Vec3

    def __post_init__(self) -> None:
        if (self.min.x > self.max.x or self.min.y > self.max.y
                or self.min.z > self.max.z):
            raise ValueError(f"inverted box {self!r}")

    @property
    def center(self) -> Vec3:
        return Vec3(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
            0.5 * (self.min.z + self.max.z),
        )

    def inflated(self, margin: float) -> "AABB":
        m = Vec3(margin, margin, margin)
        return AABB(self.min - m, self.max + m)

    def contains(self, p: Vec3) -> bool:
        return (self.min.x <= p.x <= self.max.x
                and self.min.y <= p.y <= self.max.y
                and self.min.z <= p.z <= self.max.z)

    def contains_box(self, other: "AABB") -> bool:
        return self.contains(other.min) and self.contains(other.max)

    def overlaps(self, other: "AABB") -> bool:
        """Strict interior overlap; shared faces do not count."""
        return (self.min.x < other.max.x and other.min.x < self.max.x
                and self.min.y < other.max.y and other.min.y < self.max.y
                and self.min.z < other.max.z and other.min.z < self.max.z)

    def to_json(self) -> dict:
        return {"min": self.min.to_json(), "max": self.max.to_json()}

    @staticmethod
    def from_json(doc: dict) -> "AABB":
        return AABB(Vec3.from_json(doc["min"]), Vec3.from_json(doc["max"]))


@dataclass(frozen=True)
class Pose:
    """Drone state: position plus heading. Yaw is normalized to [0, 2*pi)."""

    position: Vec3
    yaw: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    def to_json(self) -> dict:
        return {"position": self.position.to_json(), "yaw": self.yaw}

    @staticmethod
    def from_json(doc: dict) -> "Pose":
        return Pose(Vec3.from_json(doc["position"]), float(doc["yaw"]))


@dataclass(frozen=True)
class SceneObject:
    id: str
    label: str
    attributes: frozenset[str]
    aabb: AABB
    is_obstacle: bool

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "attributes": sorted(self.attributes),
            "aabb": self.aabb.to_json(),
            "is_obstacle": self.is_obstacle,
        }

    @staticmethod
    def from_json(doc: dict) -> "SceneObject":
        return SceneObject(
            id=str(doc["id"]),
            label=str(doc["label"]),
            attributes=frozenset(str(a) for a in doc.get("attributes", [])),
            aabb=AABB.from_json(doc["aabb"]),
            is_obstacle=bool(doc["is_obstacle"]),
        )


# eq=False keeps identity hashing so scenes can key the visibility cache.
@dataclass(frozen=True, eq=False)
class Scene:
    name: str
    bounds: AABB
    objects: tuple[SceneObject, ...]
    start_pose: Pose
    archetype: str

    @property
    def ground_z(self) -> float:
        return self.bounds.min.z

    def obstacles(self) -> tuple[SceneObject, ...]:
        return tuple(o for o in self.objects if o.is_obstacle)

    def labels(self) -> tuple[str, ...]:
        """Sorted vocabulary of object labels present in the scene."""
        return tuple(sorted({o.label for o in self.objects}))

    def to_json(self) -> dict:
        return {
            "schema": SCENE_SCHEMA,
            "name": self.name,
            "archetype": self.archetype,
            "bounds": self.bounds.to_json(),
            "start_pose": self.start_pose.to_json(),
            "objects": [o.to_json() for o in self.objects],
        }

    @staticmethod
    def from_json(doc: dict) -> "Scene":
        if not isinstance(doc, dict):
            raise SceneFormatError("scene document must be a JSON object")
        schema = doc.get("schema")
        if schema != SCENE_SCHEMA:
            raise SceneFormatError(f"unsupported scene schema {schema!r}")
        try:
            return Scene(
                name=str(doc["name"]),
                bounds=AABB.from_json(doc["bounds"]),
                objects=tuple(SceneObject.from_json(o) for o in doc["objects"]),
                start_pose=Pose.from_json(doc["start_pose"]),
                archetype=str(doc["archetype"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneFormatError(f"malformed scene document: {exc}") from exc

    def digest(self) -> str:
        import hashlib

        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_scene(path: str) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return Scene.from_json(json.load(fh))


def save_scene(scene: Scene, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class Action:
    """One discrete UAV command; `value` is the kind's scalar parameter."""

    kind: str
    value: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind == "LAND":
            if self.value is not None:
                raise ValueError("LAND takes no parameter")
        else:
            if self.value is None or not self.value > 0:
                raise ValueError(f"{self.kind} requires a positive parameter")
            if self.kind == "HOVER" and self.value != int(self.value):
                raise ValueError("HOVER step count must be integral")

    @staticmethod
    def takeoff(altitude: float) -> "Action":
        return Action("TAKEOFF", float(altitude))

    @staticmethod
    def land() -> "Action":
        return Action("LAND")

    @staticmethod
    def hover(steps: int) -> "Action":
        return Action("HOVER", float(steps))

    @staticmethod
    def move_forward(distance: float) -> "Action":
        return Action("MOVE_FORWARD", float(distance))

    @staticmethod
    def turn_left(angle: float) -> "Action":
        return Action("TURN_LEFT", float(angle))

    @staticmethod
    def turn_right(angle: float) -> "Action":
        return Action("TURN_RIGHT", float(angle))

    @staticmethod
    def ascend(distance: float) -> "Action":
        return Action("ASCEND", float(distance))

    @staticmethod
    def descend(distance: float) -> "Action":
        return Action("DESCEND", float(distance))

    def to_json(self) -> dict:
        if self.kind == "LAND":
            return {"action": self.kind, "args": {}}
        unit = _PARAM_UNITS[self.kind]
        value = int(self.value) if self.kind == "HOVER" else self.value
        return {"action": self.kind, "args": {unit: value}}

    @staticmethod
    def from_json(doc: dict) -> "Action":
        kind = doc["action"]
        args = doc.get("args", {})
        if kind == "LAND":
            return Action.land()
        if kind not in _PARAM_UNITS:
            raise ValueError(f"unknown action kind {kind!r}")
        return Action(kind, float(args[_PARAM_UNITS[kind]]))


@dataclass(frozen=True)
class CameraModel:
    """Monocular camera, rigidly mounted with a fixed pitch tilt."""

    horizontal_fov: float = 1.6
    vertical_fov: float = 1.4
    max_range: float = 20.0
    pitch: float = -0.35

    def __post_init__(self) -> None:
        if not (0.0 < self.horizontal_fov < math.pi):
            raise ValueError("horizontal_fov must be in (0, pi)")
        if not (0.0 < self.vertical_fov < math.pi):
            raise ValueError("vertical_fov must be in (0, pi)")
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")


DEFAULT_CAMERA = CameraModel()


def is_landed(pose: Pose, scene: Scene) -> bool:
    return pose.position.z <= scene.ground_z + _GROUND_EPS


def segment_hits_box(p0: Vec3, p1: Vec3, box: AABB) -> bool:
    """Slab test: does the closed segment p0->p1 touch the closed box?"""
    tmin, tmax = 0.0, 1.0
    for a0, a1, lo, hi in (
        (p0.x, p1.x, box.min.x, box.max.x),
        (p0.y, p1.y, box.min.y, box.max.y),
        (p0.z, p1.z, box.min.z, box.max.z),
    ):
        d = a1 - a0
        if abs(d) < 1e-12:
            if a0 < lo or a0 > hi:
                return False
            continue
        t1 = (lo - a0) / d
        t2 = (hi - a0) / d
        if t1 > t2:
            t1, t2 = t2, t1
        tmin = max(tmin, t1)
        tmax = min(tmax, t2)
        if tmin > tmax:
            return False
    return True


def sphere_hits_box(center: Vec3, radius: float, box: AABB) -> bool:
    """Closest-point test between a sphere and a box."""
    dx = max(box.min.x - center.x, 0.0, center.x - box.max.x)
    dy = max(box.min.y - center.y, 0.0, center.y - box.max.y)
    dz = max(box.min.z - center.z, 0.0, center.z - box.max.z)
    return dx * dx + dy * dy + dz * dz <= radius * radius


def _sweep_collides(p0: Vec3, p1: Vec3, scene: Scene, clearance: float) -> str | None:
    for obj in scene.objects:
        if not obj.is_obstacle:
            continue
        if segment_hits_box(p0, p1, obj.aabb.inflated(clearance)):
            return obj.id
    return None


def apply_action(pose: Pose, action: Action, scene: Scene,
                 clearance: float = DEFAULT_CLEARANCE) -> Pose:
    """Apply one discrete action with straight-line kinematics.

    The caller guarantees `pose` itself is collision-free. Raises
    InvalidFromGround for motion attempted while landed, OutOfBoundsError if
    the resulting position leaves the scene bounds, and CollisionError if the
    swept straight-line path touches any clearance-inflated obstacle box.
    """
    p = pose.position
    landed = is_landed(pose, scene)
    if landed and action.kind not in ("TAKEOFF", "HOVER"):
        raise InvalidFromGround(
            f"{action.kind} while landed; only TAKEOFF and HOVER are valid")

    if action.kind == "HOVER":
        return pose
    if action.kind == "TURN_LEFT":
        return Pose(p, pose.yaw + action.value)
    if action.kind == "TURN_RIGHT":
        return Pose(p, pose.yaw - action.value)

    if action.kind == "MOVE_FORWARD":
        target = Vec3(p.x + action.value * math.cos(pose.yaw),
                      p.y + action.value * math.sin(pose.yaw), p.z)
    elif action.kind == "ASCEND":
        target = Vec3(p.x, p.y, p.z + action.value)
    elif action.kind == "DESCEND":
        target = Vec3(p.x, p.y, p.z - action.value)
    elif action.kind == "TAKEOFF":
        target = Vec3(p.x, p.y, scene.ground_z + action.value)
    elif action.kind == "LAND":
        target = Vec3(p.x, p.y, scene.ground_z)
    else:  # pragma: no cover - exhaustive over ACTION_KINDS
        raise ValueError(action.kind)

    if not scene.bounds.contains(target):
        raise OutOfBoundsError(
            f"{action.kind} would leave bounds at ({target.x:.2f}, "
            f"{target.y:.2f}, {target.z:.2f})")
    hit = _sweep_collides(p, target, scene, clearance)
    if hit is not None:
        raise CollisionError(f"{action.kind} sweeps through obstacle {hit!r}")
    return Pose(target, pose.yaw)


# Per-scene numpy views used by the visibility query; keyed by scene identity.
_scene_arrays: "weakref.WeakKeyDictionary[Scene, tuple]" = weakref.WeakKeyDictionary()


def _arrays_for(scene: Scene):
    cached = _scene_arrays.get(scene)
    if cached is not None:
        return cached
    centers = np.array([o.aabb.center.as_tuple() for o in scene.objects],
                       dtype=float).reshape(len(scene.objects), 3)
    obstacles = [o for o in scene.objects if o.is_obstacle]
    lo = np.array([o.aabb.min.as_tuple() for o in obstacles],
                  dtype=float).reshape(len(obstacles), 3)
    hi = np.array([o.aabb.max.as_tuple() for o in obstacles],
                  dtype=float).reshape(len(obstacles), 3)
    obstacle_ids = np.array([o.id for o in obstacles])
    cached = (centers, lo, hi, obstacle_ids)
    _scene_arrays[scene] = cached
    return cached


def visible_objects(
    pose: Pose, camera: CameraModel, scene: Scene,
) -> list[tuple[SceneObject, float, float, float]]:
    """Ground-truth visibility: objects whose box center falls in the frustum.

    Returns (object, bearing, elevation, range) tuples sorted by range then
    id. Bearing is relative to the drone heading, elevation relative to the
    horizontal plane; the frustum test applies the camera pitch. Occlusion is
    decided by sampling 16 interior points of the camera-to-center ray
    against obstacle boxes.
    """
    if not scene.objects:
        return []
    centers, lo, hi, obstacle_ids = _arrays_for(scene)
    eye = np.array(pose.position.as_tuple())
    delta = centers - eye
    horiz = np.hypot(delta[:, 0], delta[:, 1])
    rng = np.sqrt((delta * delta).sum(axis=1))
    bearing = np.arctan2(delta[:, 1], delta[:, 0]) - pose.yaw
    bearing = np.arctan2(np.sin(bearing), np.cos(bearing))
    elevation = np.arctan2(delta[:, 2], horiz)

    in_frustum = (
        (rng > 1e-9)
        & (rng <= camera.max_range)
        & (np.abs(bearing) <= camera.horizontal_fov / 2.0)
        & (np.abs(elevation - camera.pitch) <= camera.vertical_fov / 2.0)
    )
    candidates = np.nonzero(in_frustum)[0]
    if candidates.size == 0:
        return []

    out = []
    n_obs = lo.shape[0]
    if n_obs:
        ts = (np.arange(1, OCCLUSION_SAMPLES + 1) / (OCCLUSION_SAMPLES + 1.0))
        for idx in candidates:
            pts = eye + np.outer(ts, delta[idx])  # (S, 3)
            inside = ((pts[:, None, :] >= lo[None, :, :])
                      & (pts[:, None, :] <= hi[None, :, :])).all(axis=2)
            # An obstacle never occludes itself.
            blocked_by = inside.any(axis=0)
            obj = scene.objects[idx]
            if obj.is_obstacle:
                blocked_by = blocked_by & (obstacle_ids != obj.id)
            if not blocked_by.any():
                out.append((obj, float(bearing[idx]), float(elevation[idx]),
                            float(rng[idx])))
    else:
        for idx in candidates:
            out.append((scene.objects[idx], float(bearing[idx]),
                        float(elevation[idx]), float(rng[idx])))
    out.sort(key=lambda item: (item[3], item[0].id))
    return out


def validate_scene(scene: Scene) -> list[str]:
    """Return human-readable invariant violations; empty means well-formed."""
    violations: list[str] = []
    if scene.archetype not in ARCHETYPES:
        violations.append(f"unknown archetype {scene.archetype!r}")
    seen: set[str] = set()
    for obj in scene.objects:
        if not obj.id:
            violations.append("object with empty id")
        elif obj.id in seen:
            violations.append(f"duplicate object id {obj.id!r}")
        else:
            seen.add(obj.id)
        if not obj.label:
            violations.append(f"object {obj.id!r} has an empty label")
        if not scene.bounds.contains_box(obj.aabb):
            violations.append(f"object {obj.id!r} extends outside scene bounds")
    start = scene.start_pose.position
    if not scene.bounds.contains(start):
        violations.append("start pose outside scene bounds")
    for obj in scene.objects:
        if obj.is_obstacle and sphere_hits_box(start, DEFAULT_CLEARANCE, obj.aabb):
            violations.append(f"start pose collides with obstacle {obj.id!r}")
    return violations
