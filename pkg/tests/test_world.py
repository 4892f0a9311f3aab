import math
import random

import pytest

from skynav.world import (
    AABB,
    Action,
    CameraModel,
    CollisionError,
    InvalidFromGround,
    OutOfBoundsError,
    Pose,
    Scene,
    SceneFormatError,
    Vec3,
    apply_action,
    save_scene,
    load_scene,
    segment_hits_box,
    sphere_hits_box,
    validate_scene,
    visible_objects,
)

from conftest import make_object, make_scene


AIRBORNE = Pose(Vec3(1.25, 9.75, 2.0), 0.0)


# -- brute-force oracles ------------------------------------------------------

def segment_box_oracle(p0: Vec3, p1: Vec3, box: AABB, samples=2000) -> bool:
    """Dense sampling stand-in for the slab test."""
    for i in range(samples + 1):
        t = i / samples
        p = Vec3(p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y),
                 p0.z + t * (p1.z - p0.z))
        if box.contains(p):
            return True
    return False


class TestActions:
    def test_action_kinds_validated(self):
        with pytest.raises(ValueError):
            Action("WARP", 1.0)
        with pytest.raises(ValueError):
            Action.move_forward(-1.0)
        with pytest.raises(ValueError):
            Action("LAND", 1.0)
        with pytest.raises(ValueError):
            Action.hover(0)

    def test_action_json_round_trip(self):
        for action in (Action.takeoff(2.0), Action.land(), Action.hover(3),
                       Action.move_forward(1.5), Action.turn_left(0.5),
                       Action.turn_right(0.25), Action.ascend(1.0),
                       Action.descend(0.5)):
            assert Action.from_json(action.to_json()) == action


class TestApplyAction:
    def test_hover_is_identity(self, empty_scene):
        assert apply_action(AIRBORNE, Action.hover(1), empty_scene) == AIRBORNE

    def test_turn_symmetry(self, empty_scene):
        pose = apply_action(AIRBORNE, Action.turn_left(math.pi / 2), empty_scene)
        pose = apply_action(pose, Action.turn_right(math.pi / 2), empty_scene)
        assert pose.position == AIRBORNE.position
        assert abs(pose.yaw - AIRBORNE.yaw) < 1e-12

    def test_move_forward_kinematics(self, empty_scene):
        pose = Pose(Vec3(0.5, 0.5, 2.0), 0.0)
        out = apply_action(pose, Action.move_forward(2.0), empty_scene)
        assert out.position.x == pytest.approx(2.5)
        assert out.position.y == pytest.approx(0.5)
        assert out.position.z == pytest.approx(2.0)
        assert out.yaw == 0.0

    def test_takeoff_and_land(self, empty_scene):
        landed = empty_scene.start_pose
        up = apply_action(landed, Action.takeoff(2.5), empty_scene)
        assert up.position.z == pytest.approx(2.5)
        down = apply_action(up, Action.land(), empty_scene)
        assert down.position.z == pytest.approx(0.0)

    def test_motion_from_ground_rejected(self, empty_scene):
        landed = empty_scene.start_pose
        for action in (Action.move_forward(1.0), Action.turn_left(0.3),
                       Action.ascend(1.0), Action.land()):
            with pytest.raises(InvalidFromGround):
                apply_action(landed, action, empty_scene)
        # HOVER stays legal on the ground.
        assert apply_action(landed, Action.hover(1), empty_scene) == landed

    def test_out_of_bounds(self, empty_scene):
        with pytest.raises(OutOfBoundsError):
            apply_action(AIRBORNE, Action.ascend(100.0), empty_scene)
        edge = Pose(Vec3(19.5, 9.75, 2.0), 0.0)
        with pytest.raises(OutOfBoundsError):
            apply_action(edge, Action.move_forward(5.0), empty_scene)

    def test_collision_matches_sampled_oracle(self, box_scene):
        # Flying straight through the inflated box must collide; the oracle
        # is dense segment sampling against the inflated AABB.
        pose = Pose(Vec3(1.25, 9.75, 0.4), 0.0)
        clearance = 0.3
        box = box_scene.objects[0].aabb.inflated(clearance)
        target = Vec3(10.0, 9.75, 0.4)
        assert segment_box_oracle(pose.position, target, box)
        with pytest.raises(CollisionError):
            apply_action(Pose(pose.position, 0.0), Action.move_forward(8.75),
                         box_scene, clearance)

    def test_slab_test_agrees_with_sampling(self):
        rng = random.Random(4)
        box = AABB(Vec3(2, 2, 2), Vec3(4, 5, 3))
        for _ in range(300):
            p0 = Vec3(rng.uniform(0, 6), rng.uniform(0, 7), rng.uniform(0, 5))
            p1 = Vec3(rng.uniform(0, 6), rng.uniform(0, 7), rng.uniform(0, 5))
            got = segment_hits_box(p0, p1, box)
            want = segment_box_oracle(p0, p1, box)
            # Sampling can only under-report grazing hits.
            if want:
                assert got
            elif not got:
                assert not want

    def test_reversibility(self, empty_scene):
        pose = Pose(Vec3(5.0, 5.0, 2.0), 0.7)
        out = pose
        for action in (Action.move_forward(2.0), Action.turn_left(math.pi),
                       Action.move_forward(2.0), Action.turn_left(math.pi)):
            out = apply_action(out, action, empty_scene)
        assert out.position.dist(pose.position) < 1e-9
        assert abs(math.sin(out.yaw - pose.yaw)) < 1e-12

    def test_never_returns_colliding_pose(self, box_scene):
        # Property: whenever apply_action succeeds, the resulting clearance
        # sphere is disjoint from every obstacle box (brute-force check).
        rng = random.Random(11)
        clearance = 0.3
        pose = Pose(Vec3(1.25, 9.75, 2.0), 0.0)
        moves = 0
        for _ in range(500):
            kind = rng.randrange(5)
            if kind == 0:
                action = Action.move_forward(rng.uniform(0.2, 2.0))
            elif kind == 1:
                action = Action.turn_left(rng.uniform(0.1, 3.0))
            elif kind == 2:
                action = Action.turn_right(rng.uniform(0.1, 3.0))
            elif kind == 3:
                action = Action.ascend(rng.uniform(0.2, 1.0))
            else:
                action = Action.descend(rng.uniform(0.2, 1.0))
            try:
                pose = apply_action(pose, action, box_scene, clearance)
            except (CollisionError, OutOfBoundsError, InvalidFromGround):
                continue
            moves += 1
            for obj in box_scene.objects:
                if obj.is_obstacle:
                    assert not sphere_hits_box(pose.position, clearance,
                                               obj.aabb)
        assert moves > 100


class TestVisibility:
    CAMERA = CameraModel(horizontal_fov=1.6, vertical_fov=1.4, max_range=10.0,
                         pitch=-0.2)

    def test_object_ahead_included(self):
        scene = make_scene(objects=[
            make_object("t-0", "target", (2.25, 9.75, 2.0), (0.4, 0.4, 0.4))])
        pose = Pose(Vec3(1.25, 9.75, 2.0), 0.0)
        out = visible_objects(pose, self.CAMERA, scene)
        assert [o.id for o, *_ in out] == ["t-0"]
        obj, bearing, elevation, rng_m = out[0]
        assert bearing == pytest.approx(0.0)
        assert elevation == pytest.approx(0.0)
        assert rng_m == pytest.approx(1.0)

    def test_object_behind_excluded(self):
        scene = make_scene(objects=[
            make_object("t-0", "target", (2.25, 9.75, 2.0), (0.4, 0.4, 0.4))])
        pose = Pose(Vec3(1.25, 9.75, 2.0), math.pi)  # facing away
        assert visible_objects(pose, self.CAMERA, scene) == []

    def test_occluded_by_obstacle(self):
        # Oracle: the straight ray from eye to center crosses the blocker box
        # (verified by the sampled segment test), so the target must drop out.
        blocker = make_object("w-0", "wall", (4.25, 9.75, 2.0), (0.5, 3.0, 3.0))
        target = make_object("t-0", "target", (7.25, 9.75, 2.0),
                             (0.4, 0.4, 0.4))
        scene = make_scene(objects=[blocker, target])
        pose = Pose(Vec3(1.25, 9.75, 2.0), 0.0)
        assert segment_hits_box(pose.position, target.aabb.center,
                                blocker.aabb)
        ids = [o.id for o, *_ in visible_objects(pose, self.CAMERA, scene)]
        assert "t-0" not in ids
        assert "w-0" in ids  # the blocker itself is visible

    def test_subset_and_range_bound(self):
        rng = random.Random(3)
        objects = [
            make_object(f"o-{i}", "thing",
                        (rng.uniform(1, 19), rng.uniform(1, 19),
                         rng.uniform(0.3, 5)),
                        (0.6, 0.6, 0.6))
            for i in range(25)
        ]
        scene = make_scene(objects=objects)
        for _ in range(20):
            pose = Pose(Vec3(rng.uniform(1, 19), rng.uniform(1, 19),
                             rng.uniform(0.5, 6)), rng.uniform(0, 6.28))
            out = visible_objects(pose, self.CAMERA, scene)
            ids = {o.id for o, *_ in out}
            assert ids <= {o.id for o in scene.objects}
            assert all(r <= self.CAMERA.max_range for *_, r in out)
            ranges = [r for *_, r in out]
            assert ranges == sorted(ranges)


class TestSceneValidation:
    def test_well_formed(self, box_scene):
        assert validate_scene(box_scene) == []

    def test_object_outside_bounds(self):
        scene = make_scene(objects=[
            make_object("far-0", "box", (30.0, 9.0, 0.4), (0.8, 0.8, 0.8))])
        violations = validate_scene(scene)
        assert len(violations) == 1 and "far-0" in violations[0]

    def test_duplicate_ids(self):
        scene = make_scene(objects=[
            make_object("dup", "box", (5, 5, 0.4), (0.8, 0.8, 0.8)),
            make_object("dup", "box", (8, 8, 0.4), (0.8, 0.8, 0.8)),
            make_object("dup", "box", (11, 11, 0.4), (0.8, 0.8, 0.8)),
        ])
        dups = [v for v in validate_scene(scene) if "duplicate" in v]
        assert len(dups) == 2


class TestSceneIO:
    def test_round_trip(self, tmp_path, box_scene):
        path = tmp_path / "scene.json"
        save_scene(box_scene, str(path))
        loaded = load_scene(str(path))
        assert loaded.to_json() == box_scene.to_json()

    def test_unknown_schema_rejected(self, box_scene):
        doc = box_scene.to_json()
        doc["schema"] = "scene/2"
        with pytest.raises(SceneFormatError):
            Scene.from_json(doc)
