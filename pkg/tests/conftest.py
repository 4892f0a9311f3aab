import math

import pytest

from skynav.world import AABB, Pose, Scene, SceneObject, Vec3


def make_object(oid, label, center, size, attrs=(), obstacle=True,
                z0=None) -> SceneObject:
    cx, cy, cz = center
    sx, sy, sz = size
    if z0 is None:
        z0 = cz - sz / 2
    return SceneObject(
        id=oid, label=label, attributes=frozenset(attrs),
        aabb=AABB(Vec3(cx - sx / 2, cy - sy / 2, z0),
                  Vec3(cx + sx / 2, cy + sy / 2, z0 + sz)),
        is_obstacle=obstacle,
    )


def make_scene(objects=(), bounds=((0, 0, 0), (20, 20, 8)),
               start=(1.25, 9.75, 0.0), yaw=0.0, name="fixture",
               archetype="park") -> Scene:
    (x0, y0, z0), (x1, y1, z1) = bounds
    return Scene(
        name=name,
        bounds=AABB(Vec3(x0, y0, z0), Vec3(x1, y1, z1)),
        objects=tuple(objects),
        start_pose=Pose(Vec3(*start), yaw),
        archetype=archetype,
    )


@pytest.fixture
def empty_scene():
    return make_scene()


@pytest.fixture
def box_scene():
    """One red box 6 m ahead of the start pose, plus a wall segment."""
    return make_scene(objects=[
        make_object("box-0", "box", (7.25, 9.75, 0.4), (0.8, 0.8, 0.8),
                    attrs=("red",)),
        make_object("wall-0", "wall", (12.0, 15.0, 1.5), (4.0, 0.6, 3.0)),
    ])


def walled_goal_scene() -> Scene:
    """Goal visible through a slit but unreachable: every route is blocked.

    The wall spans the full cross-section except a 0.4 m slit on the start
    row, too narrow for any clearance-inflated free cell, yet wide enough for
    the center-to-camera ray.
    """
    objects = [
        make_object("wall-lo", "wall", (6.3, 1.4, 2.0), (0.6, 2.8, 4.0)),
        make_object("wall-hi", "wall", (6.3, 4.6, 2.0), (0.6, 2.8, 4.0)),
        make_object("box-0", "box", (9.75, 3.05, 0.4), (0.8, 0.8, 0.8),
                    attrs=("red",)),
    ]
    return make_scene(objects=objects, bounds=((0, 0, 0), (12, 6, 4)),
                      start=(1.25, 3.25, 0.0), name="walled",
                      archetype="warehouse")


@pytest.fixture
def walled_scene():
    return walled_goal_scene()


def yaw_towards(origin, target) -> float:
    return math.atan2(target[1] - origin[1], target[0] - origin[0])
