"""Detector emulation over ground-truth visibility, plus a real-backend client.

Detection quality is a parameterized error model (vocabulary gate, miss
rate, angular localization noise, false positives) rather than a neural
network. Four shipped profiles bracket the behavior of a closed-vocabulary
detector, a coarse open-vocabulary segmenter, and a precise open-vocabulary
detector. Everything is deterministic given the seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import httpx

from .language import ObjectRef, Relation
from .world import CameraModel, Pose, Scene, SceneObject, Vec3, visible_objects

DETECT_SCHEMA = "detect/1"

#: Confidences below this are discarded; spurious detections often fall here.
DEFAULT_MIN_CONFIDENCE = 0.35

#: 'near' relation threshold on center-to-center distance.
NEAR_DISTANCE = 3.0


class PerceptionError(Exception):
    pass


class BackendUnavailable(PerceptionError):
    pass


class SchemaViolation(PerceptionError):
    pass


@dataclass(frozen=True)
class DetectionQuery:
    ref: ObjectRef


@dataclass(frozen=True)
class Detection:
    """Grounded localization of a queried label from the current pose.

    Bearing is relative to the drone heading, elevation to the horizontal
    plane, both radians; range in meters.
    """

    object_id: str
    label: str
    bearing: float
    elevation: float
    range: float
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be within [0, 1]")
        if not self.range > 0:
            raise ValueError("range must be positive")

    def world_position(self, pose: Pose) -> Vec3:
        """Back-project to world coordinates from the observing pose."""
        horiz = self.range * math.cos(self.elevation)
        heading = pose.yaw + self.bearing
        return Vec3(
            pose.position.x + horiz * math.cos(heading),
            pose.position.y + horiz * math.sin(heading),
            pose.position.z + self.range * math.sin(self.elevation),
        )

    def to_json(self) -> dict:
        return {
            "object_id": self.object_id,
            "label": self.label,
            "bearing": self.bearing,
            "elevation": self.elevation,
            "range": self.range,
            "confidence": self.confidence,
        }


@dataclass(frozen=True)
class FidelityProfile:
    """Detector error model. vocabulary=None means open vocabulary."""

    name: str
    vocabulary: frozenset[str] | None
    miss_rate: float
    localization_sigma: float
    false_positive_rate: float

    def __post_init__(self) -> None:
        for p in (self.miss_rate, self.false_positive_rate):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must be within [0, 1]")
        if self.localization_sigma < 0:
            raise ValueError("localization_sigma must be non-negative")


COCO_LABELS = frozenset({
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train",
    "truck", "boat", "traffic light", "fire hydrant", "stop sign",
    "parking meter", "bench", "bird", "cat", "dog", "horse", "sheep", "cow",
    "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella", "handbag",
    "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
    "baseball bat", "baseball glove", "skateboard", "surfboard",
    "tennis racket", "bottle", "wine glass", "cup", "fork", "knife", "spoon",
    "bowl", "banana", "apple", "sandwich", "orange", "broccoli", "carrot",
    "hot dog", "pizza", "donut", "cake", "chair", "couch", "potted plant",
    "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote",
    "keyboard", "cell phone", "microwave", "oven", "toaster", "sink",
    "refrigerator", "book", "clock", "vase", "scissors", "teddy bear",
    "hair drier", "toothbrush",
})

ORACLE = FidelityProfile("ORACLE", None, 0.0, 0.0, 0.0)
CLOSED_VOCAB_80 = FidelityProfile("CLOSED_VOCAB_80", COCO_LABELS, 0.1, 0.02, 0.0)
OPEN_VOCAB_COARSE = FidelityProfile("OPEN_VOCAB_COARSE", None, 0.15, 0.15, 0.0)
OPEN_VOCAB_PRECISE = FidelityProfile("OPEN_VOCAB_PRECISE", None, 0.05, 0.03, 0.0)

PROFILES = {p.name: p for p in
            (ORACLE, CLOSED_VOCAB_80, OPEN_VOCAB_COARSE, OPEN_VOCAB_PRECISE)}


def _horizontal(v: Vec3) -> tuple[float, float]:
    return (v.x, v.y)


def relation_holds(relation: Relation, target: SceneObject, scene: Scene,
                   pose: Pose) -> bool:
    """Evaluate a spatial relation on ground-truth geometry.

    near: anchor center within NEAR_DISTANCE. left_of/right_of: sign of the
    2D cross product of the drone-to-anchor and drone-to-target directions.
    behind/in_front_of: sign of the target's offset from the anchor along the
    drone-to-anchor direction.
    """
    anchors = [o for o in scene.objects
               if o.id != target.id
               and o.label == relation.anchor.label
               and relation.anchor.attributes <= o.attributes]
    t = target.aabb.center
    p = pose.position
    for anchor in anchors:
        a = anchor.aabb.center
        if relation.kind == "near":
            if t.dist(a) <= NEAR_DISTANCE:
                return True
            continue
        ax, ay = a.x - p.x, a.y - p.y
        if relation.kind in ("left_of", "right_of"):
            cross = ax * (t.y - p.y) - ay * (t.x - p.x)
            if (cross > 0) == (relation.kind == "left_of") and cross != 0:
                return True
            continue
        norm = math.hypot(ax, ay)
        if norm < 1e-9:
            continue
        along = (ax * (t.x - a.x) + ay * (t.y - a.y)) / norm
        if relation.kind == "behind" and along > 0:
            return True
        if relation.kind == "in_front_of" and along < 0:
            return True
    return False


def ref_matches(ref: ObjectRef, obj: SceneObject, scene: Scene,
                pose: Pose) -> bool:
    if obj.label != ref.label or not ref.attributes <= obj.attributes:
        return False
    if ref.relation is None:
        return True
    return relation_holds(ref.relation, obj, scene, pose)


def detect(
    pose: Pose,
    camera: CameraModel,
    scene: Scene,
    queries: list[DetectionQuery],
    profile: FidelityProfile,
    rng_seed: int,
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
) -> list[Detection]:
    """Simulate grounded detection for each query against the visible set.

    Closed-vocabulary profiles yield nothing for out-of-vocabulary labels.
    Each ground-truth match is dropped with probability miss_rate, angular
    coordinates are perturbed with zero-mean Gaussian noise of the profile's
    sigma, and a spurious in-frustum detection of the queried label is
    appended with probability false_positive_rate.
    """
    rng = random.Random(rng_seed)
    visible = visible_objects(pose, camera, scene)
    out: list[Detection] = []
    for query in queries:
        ref = query.ref
        if profile.vocabulary is not None and ref.label not in profile.vocabulary:
            continue
        for obj, bearing, elevation, rng_m in visible:
            if not ref_matches(ref, obj, scene, pose):
                continue
            if rng.random() < profile.miss_rate:
                continue
            if profile.localization_sigma > 0:
                bearing = bearing + rng.gauss(0.0, profile.localization_sigma)
                elevation = elevation + rng.gauss(0.0, profile.localization_sigma)
            confidence = rng.uniform(0.55, 1.0)
            det = Detection(obj.id, obj.label, bearing, elevation, rng_m,
                            confidence)
            if det.confidence >= min_confidence:
                out.append(det)
        if profile.false_positive_rate > 0 and rng.random() < profile.false_positive_rate:
            det = Detection(
                object_id=f"spurious::{ref.label}",
                label=ref.label,
                bearing=rng.uniform(-camera.horizontal_fov / 2,
                                    camera.horizontal_fov / 2),
                elevation=camera.pitch + rng.uniform(-camera.vertical_fov / 2,
                                                     camera.vertical_fov / 2),
                range=rng.uniform(0.5, camera.max_range),
                confidence=rng.uniform(0.2, 0.8),
            )
            if det.confidence >= min_confidence:
                out.append(det)
    return out


# ---------------------------------------------------------------------------
# Real-backend wire protocol
# ---------------------------------------------------------------------------

def detect_request(image_id: str, queries: list[DetectionQuery]) -> dict:
    return {
        "schema": DETECT_SCHEMA,
        "image_id": image_id,
        "queries": [q.ref.label for q in queries],
    }


def _decode_remote(doc: dict, camera: CameraModel) -> list[Detection]:
    if not isinstance(doc, dict):
        raise SchemaViolation("response must be a JSON object")
    unknown = set(doc) - {"schema", "detections"}
    if unknown:
        raise SchemaViolation(f"unknown fields {sorted(unknown)}")
    if doc.get("schema") != DETECT_SCHEMA:
        raise SchemaViolation(f"unsupported schema {doc.get('schema')!r}")
    raw = doc.get("detections")
    if not isinstance(raw, list):
        raise SchemaViolation("detections must be a list")
    out = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or set(entry) != {"label", "bbox",
                                                         "confidence"}:
            raise SchemaViolation(f"detection {i} has wrong fields")
        bbox = entry["bbox"]
        if (not isinstance(bbox, list) or len(bbox) != 4
                or not all(isinstance(v, (int, float)) for v in bbox)):
            raise SchemaViolation(f"detection {i} bbox must be [x0,y0,x1,y1]")
        x0, y0, x1, y1 = map(float, bbox)
        if not (0.0 <= x0 <= x1 <= 1.0 and 0.0 <= y0 <= y1 <= 1.0):
            raise SchemaViolation(
                f"detection {i} bbox must be normalized and ordered")
        confidence = entry["confidence"]
        if not isinstance(confidence, (int, float)) or not 0.0 <= confidence <= 1.0:
            raise SchemaViolation(f"detection {i} confidence out of [0, 1]")
        # Pixel-space box centers map linearly into the camera's angular
        # frustum; monocular depth is not on the wire, so range is nominal.
        cx = 0.5 * (x0 + x1)
        cy = 0.5 * (y0 + y1)
        out.append(Detection(
            object_id=f"remote::{i}",
            label=str(entry["label"]),
            bearing=(0.5 - cx) * camera.horizontal_fov,
            elevation=camera.pitch + (0.5 - cy) * camera.vertical_fov,
            range=camera.max_range / 2.0,
            confidence=float(confidence),
        ))
    return out


def remote_detect(
    image_id: str,
    queries: list[DetectionQuery],
    backend_url: str,
    camera: CameraModel,
    timeout: float = 5.0,
) -> list[Detection]:
    """Query a detector backend speaking the detect/1 protocol."""
    try:
        response = httpx.post(backend_url,
                              json=detect_request(image_id, queries),
                              timeout=timeout)
    except httpx.HTTPError as exc:
        raise BackendUnavailable(f"detector backend: {exc}") from exc
    if response.status_code != 200:
        raise BackendUnavailable(
            f"detector backend returned HTTP {response.status_code}")
    try:
        doc = response.json()
    except ValueError as exc:
        raise SchemaViolation(f"response is not JSON: {exc}") from exc
    return _decode_remote(doc, camera)
