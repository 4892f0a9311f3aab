"""Episode execution: decompose, ground, plan, act, and terminate.

One episode is a deterministic state machine driven one action per step. A
grounded sub-goal with no matching detection triggers the scan behavior
(rotate in place, then ascend and rescan). After the last sub-goal the three
termination criteria are evaluated together: goal detected in the current
view, pose within the success radius of a goal-matching object, and all
sub-goals executed. Only when all three hold does the drone run the landing
routine and the episode count as a success; a trailing 'land' sub-goal is
that routine, so it executes after the checks pass, not before.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .language import (
    Instruction,
    LanguageError,
    ObjectRef,
    SubGoal,
    SubGoalPlan,
    corrupt_plan,
    parse_instruction,
    remote_decompose,
)
from .perception import (
    DEFAULT_MIN_CONFIDENCE,
    Detection,
    DetectionQuery,
    FidelityProfile,
    ORACLE,
    detect,
    ref_matches,
)
from .planner import (
    DEFAULT_RESOLUTION,
    NeedsSearch,
    OccupancyGrid,
    PlannerConfig,
    Unreachable,
    plan_subgoal,
    rasterize,
    select_target_cell,
)
from .world import (
    ACTION_KINDS,
    Action,
    CameraModel,
    DEFAULT_CAMERA,
    DEFAULT_CLEARANCE,
    Pose,
    Scene,
    Vec3,
    WorldError,
    apply_action,
    is_landed,
)

LOG_SCHEMA = "log/1"

DEFAULT_SUCCESS_RADIUS = 1.5
DEFAULT_MAX_STEPS = 250
DEFAULT_TAKEOFF_ALTITUDE = 2.0

FAILURE_REASONS = ("search_exhausted", "unreachable", "step_budget",
                   "decompose_error")


def step_seed(seed: int, step: int | str) -> int:
    """Stable per-step seed derivation; never relies on salted hashing."""
    digest = hashlib.blake2b(f"{seed}:{step}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything configurable about the four pipeline stages."""

    profile: FidelityProfile = ORACLE
    corrupt_rate: float = 0.0
    llm_backend: str | None = None
    camera: CameraModel = DEFAULT_CAMERA
    resolution: float = DEFAULT_RESOLUTION
    clearance: float = DEFAULT_CLEARANCE
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    scan_turns: int = 8
    scan_turn_angle: float = math.pi / 4
    scan_ascend: float = 1.0
    scan_max_ascents: int = 3
    fly_over_offset: float = 1.5
    view_margin: float = 0.1

    def planner(self) -> PlannerConfig:
        return PlannerConfig(
            resolution=self.resolution,
            clearance=self.clearance,
            camera=self.camera,
            fly_over_offset=self.fly_over_offset,
            view_margin=self.view_margin,
        )

    def to_json(self) -> dict:
        return {
            "profile": self.profile.name,
            "corrupt_rate": self.corrupt_rate,
            "llm_backend": self.llm_backend,
            "camera": {
                "horizontal_fov": self.camera.horizontal_fov,
                "vertical_fov": self.camera.vertical_fov,
                "max_range": self.camera.max_range,
                "pitch": self.camera.pitch,
            },
            "resolution": self.resolution,
            "clearance": self.clearance,
            "min_confidence": self.min_confidence,
            "scan_turns": self.scan_turns,
            "scan_turn_angle": self.scan_turn_angle,
            "scan_ascend": self.scan_ascend,
            "scan_max_ascents": self.scan_max_ascents,
            "fly_over_offset": self.fly_over_offset,
            "view_margin": self.view_margin,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class EpisodeSpec:
    scene: Scene
    instruction: Instruction
    goal: ObjectRef
    success_radius: float
    optimal_length: float
    seed: int
    max_steps: int

    def __post_init__(self) -> None:
        if not self.success_radius > 0:
            raise ValueError("success_radius must be positive")
        if not self.optimal_length > 0:
            raise ValueError("optimal_length must be positive")

    def digest(self) -> dict:
        return {
            "scene": self.scene.digest(),
            "scene_name": self.scene.name,
            "archetype": self.scene.archetype,
            "instruction": self.instruction.text,
            "goal": self.goal.to_json(),
            "success_radius": self.success_radius,
            "optimal_length": self.optimal_length,
            "seed": self.seed,
            "max_steps": self.max_steps,
        }


@dataclass(frozen=True)
class TerminationReport:
    goal_detected: bool
    within_threshold: bool
    subgoals_done: bool

    @property
    def satisfied(self) -> bool:
        return self.goal_detected and self.within_threshold and self.subgoals_done

    def to_json(self) -> dict:
        return {
            "goal_detected": self.goal_detected,
            "within_threshold": self.within_threshold,
            "subgoals_done": self.subgoals_done,
        }

    @staticmethod
    def from_json(doc: dict) -> "TerminationReport":
        return TerminationReport(bool(doc["goal_detected"]),
                                 bool(doc["within_threshold"]),
                                 bool(doc["subgoals_done"]))


@dataclass(frozen=True)
class StepRecord:
    step: int
    pose: Pose
    action: Action
    detections: tuple[Detection, ...]
    subgoal_index: int | None

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "action": self.action.to_json(),
            "pose": self.pose.to_json(),
            "subgoal": self.subgoal_index,
            "detections": [d.to_json() for d in self.detections],
        }


@dataclass
class EpisodeLog:
    spec_digest: dict
    start_pose: Pose
    records: list[StepRecord]
    outcome: str  # "success" | "failure"
    reason: str | None
    path_length: float
    termination: TerminationReport

    @property
    def success(self) -> bool:
        return self.outcome == "success"

    def final_pose(self) -> Pose:
        return self.records[-1].pose if self.records else self.start_pose

    def to_jsonl(self) -> str:
        lines = [json.dumps({"schema": LOG_SCHEMA, "spec": self.spec_digest,
                             "start_pose": self.start_pose.to_json()},
                            sort_keys=True)]
        lines.extend(json.dumps(r.to_json(), sort_keys=True)
                     for r in self.records)
        lines.append(json.dumps({
            "outcome": self.outcome,
            "reason": self.reason,
            "path_length": self.path_length,
            "steps": len(self.records),
            "termination": self.termination.to_json(),
        }, sort_keys=True))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_jsonl(text: str) -> "EpisodeLog":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        if len(lines) < 2 or lines[0].get("schema") != LOG_SCHEMA:
            raise ValueError("not a log/1 document")
        head, tail = lines[0], lines[-1]
        records = []
        for doc in lines[1:-1]:
            records.append(StepRecord(
                step=int(doc["step"]),
                pose=Pose.from_json(doc["pose"]),
                action=Action.from_json(doc["action"]),
                detections=tuple(
                    Detection(d["object_id"], d["label"], d["bearing"],
                              d["elevation"], d["range"], d["confidence"])
                    for d in doc["detections"]),
                subgoal_index=doc["subgoal"],
            ))
        return EpisodeLog(
            spec_digest=head["spec"],
            start_pose=Pose.from_json(head["start_pose"]),
            records=records,
            outcome=tail["outcome"],
            reason=tail["reason"],
            path_length=float(tail["path_length"]),
            termination=TerminationReport.from_json(tail["termination"]),
        )


def check_termination(
    pose: Pose,
    detections: list[Detection] | tuple[Detection, ...],
    progress: list[bool],
    spec: EpisodeSpec,
) -> TerminationReport:
    """Evaluate the three termination criteria; success is their conjunction.

    goal_detected asks the current detections (already filtered against the
    goal reference), within_threshold measures ground-truth distance to any
    goal-matching object center, subgoals_done reads the plan ledger.
    """
    goal = spec.goal
    detected = any(d.label == goal.label for d in detections)
    within = any(
        pose.position.dist(obj.aabb.center) <= spec.success_radius
        for obj in spec.scene.objects
        if ref_matches(goal, obj, spec.scene, pose))
    done = bool(progress) and all(progress)
    return TerminationReport(detected, within, done)


class _Finished(Exception):
    """Internal unwind once an outcome is decided."""


class EpisodeRunner:
    """Step-wise episode executor; `step()` advances exactly one action.

    Deterministic given (spec, config): every stochastic call is seeded from
    the episode seed and the current step count.
    """

    def __init__(self, spec: EpisodeSpec, config: PipelineConfig):
        self.spec = spec
        self.config = config
        self.scene = spec.scene
        self.grid: OccupancyGrid = rasterize(
            spec.scene, config.resolution, config.clearance)
        self.pose: Pose = spec.scene.start_pose
        self.records: list[StepRecord] = []
        self.plan: SubGoalPlan | None = None
        self.progress: list[bool] = []
        self.active_subgoal: int | None = None
        self.last_detections: tuple[Detection, ...] = ()
        self.termination: TerminationReport = TerminationReport(False, False, False)
        self.outcome: str | None = None
        self.reason: str | None = None
        self._pcfg = config.planner()
        # Decompose eagerly so callers (e.g. the session service) can echo
        # the plan before the first step; failure is an immediate outcome.
        try:
            self.plan = self._decompose()
            self.progress = [False] * len(self.plan.subgoals)
        except LanguageError:
            self._finish("failure", "decompose_error")
        self._gen = self._mission()

    # -- public driving interface -------------------------------------------

    @property
    def finished(self) -> bool:
        return self.outcome is not None

    def step(self) -> StepRecord | None:
        """Execute one action; None once the episode has finished."""
        if self.finished:
            return None
        try:
            return next(self._gen)
        except StopIteration:
            return None

    def run(self) -> None:
        while not self.finished:
            if self.step() is None and not self.finished:  # pragma: no cover
                raise RuntimeError("episode stalled without an outcome")

    def abort(self, reason: str = "aborted") -> None:
        """External cancellation, e.g. a session abort command."""
        if not self.finished:
            self._finish("failure", reason)

    def to_log(self) -> EpisodeLog:
        if not self.finished:
            raise RuntimeError("episode still running")
        length = 0.0
        prev = self.spec.scene.start_pose.position
        for rec in self.records:
            length += rec.pose.position.dist(prev)
            prev = rec.pose.position
        return EpisodeLog(
            spec_digest=self.spec.digest(),
            start_pose=self.spec.scene.start_pose,
            records=list(self.records),
            outcome=self.outcome,
            reason=self.reason,
            path_length=length,
            termination=self.termination,
        )

    # -- internals -----------------------------------------------------------

    def _finish(self, outcome: str, reason: str | None) -> None:
        self.outcome = outcome
        self.reason = reason

    def _detect_for(self, ref: ObjectRef | None) -> tuple[Detection, ...]:
        if ref is None:
            return ()
        seed = step_seed(self.spec.seed, len(self.records))
        return tuple(detect(
            self.pose, self.config.camera, self.scene,
            [DetectionQuery(ref)], self.config.profile, seed,
            min_confidence=self.config.min_confidence))

    def _do(self, action: Action, subgoal_index: int | None,
            ref: ObjectRef | None, collision_ok: bool = False):
        if len(self.records) >= self.spec.max_steps:
            self._finish("failure", "step_budget")
            raise _Finished
        try:
            self.pose = apply_action(self.pose, action, self.scene,
                                     self.config.clearance)
        except WorldError:
            if collision_ok:
                return
            self._finish("failure", "unreachable")
            raise _Finished
        dets = self._detect_for(ref)
        record = StepRecord(len(self.records), self.pose, action, dets,
                            subgoal_index)
        self.records.append(record)
        self.last_detections = dets
        yield record

    def _matching(self, detections, ref: ObjectRef) -> bool:
        return any(d.label == ref.label for d in detections)

    def _scan(self, ref: ObjectRef, subgoal_index: int | None):
        """Rotate in place, then ascend and rescan; True once ref is seen."""
        cfg = self.config
        for ascent in range(cfg.scan_max_ascents + 1):
            for _ in range(cfg.scan_turns):
                yield from self._do(Action.turn_left(cfg.scan_turn_angle),
                                    subgoal_index, ref)
                if self._matching(self.last_detections, ref):
                    return True
            if ascent == cfg.scan_max_ascents:
                break
            # A blocked ascend (ceiling, overhang) is skipped silently; the
            # remaining rotation passes then repeat at the same altitude.
            yield from self._do(Action.ascend(cfg.scan_ascend),
                                subgoal_index, ref, collision_ok=True)
            if self._matching(self.last_detections, ref):
                return True
        return False

    def _execute_subgoal(self, index: int, subgoal: SubGoal):
        while True:
            dets = self._detect_for(subgoal.ref)
            try:
                outcome = plan_subgoal(subgoal, self.pose, list(dets),
                                       self.grid, self.scene, self._pcfg)
            except Unreachable:
                self._finish("failure", "unreachable")
                raise _Finished
            if isinstance(outcome, NeedsSearch):
                found = yield from self._scan(subgoal.ref, index)
                if not found:
                    self._finish("failure", "search_exhausted")
                    raise _Finished
                continue
            for action in outcome:
                yield from self._do(action, index, subgoal.ref)
            return

    def _decompose(self) -> SubGoalPlan:
        vocabulary = self.scene.labels()
        if self.config.llm_backend:
            plan = remote_decompose(self.spec.instruction, ACTION_KINDS,
                                    self.config.llm_backend, vocabulary)
        else:
            plan = parse_instruction(self.spec.instruction, ACTION_KINDS)
        if self.config.corrupt_rate > 0:
            plan = corrupt_plan(plan, self.config.corrupt_rate,
                                step_seed(self.spec.seed, "corrupt"),
                                vocabulary)
        return plan

    def _termination_phase(self):
        goal = self.spec.goal
        approach = SubGoal("NAVIGATE_TO", ref=goal)
        while True:
            dets = self._detect_for(goal)
            self.last_detections = dets
            report = check_termination(self.pose, dets, self.progress,
                                       self.spec)
            self.termination = report
            if report.satisfied:
                if not is_landed(self.pose, self.scene):
                    yield from self._do(Action.land(), None, goal,
                                        collision_ok=True)
                self._finish("success", None)
                raise _Finished
            if not report.goal_detected:
                found = yield from self._scan(goal, None)
                if not found:
                    self._finish("failure", "search_exhausted")
                    raise _Finished
                continue
            # Detected but out of range: approach the best current detection.
            try:
                outcome = plan_subgoal(approach, self.pose,
                                       list(self.last_detections), self.grid,
                                       self.scene, self._pcfg)
            except Unreachable:
                self._finish("failure", "unreachable")
                raise _Finished
            if isinstance(outcome, NeedsSearch) or not outcome:
                # No motion would result; burn a step so the detection
                # stream (and its seeds) advances rather than looping.
                yield from self._do(Action.hover(1), None, goal)
                continue
            for action in outcome:
                yield from self._do(action, None, goal)

    def _mission(self):
        try:
            if self.finished:  # decomposition already failed
                return
            plan = self.plan
            last = len(plan.subgoals) - 1
            deferred = last if plan.subgoals[last].kind in ("LAND", "LAND_AT") else None
            for index, subgoal in enumerate(plan.subgoals):
                self.active_subgoal = index
                effective = subgoal
                if index == deferred:
                    if subgoal.kind == "LAND":
                        # The terminal landing is the success routine; it
                        # runs after the termination checks pass.
                        self.progress[index] = True
                        continue
                    effective = SubGoal("NAVIGATE_TO", ref=subgoal.ref)
                yield from self._execute_subgoal(index, effective)
                self.progress[index] = True
            self.active_subgoal = None
            yield from self._termination_phase()
        except _Finished:
            return


def run_episode(spec: EpisodeSpec, config: PipelineConfig) -> EpisodeLog:
    """Run one full episode; failures are outcomes, never exceptions."""
    runner = EpisodeRunner(spec, config)
    runner.run()
    return runner.to_log()


# ---------------------------------------------------------------------------
# Spec construction
# ---------------------------------------------------------------------------

def bfs_distances(grid: OccupancyGrid, start) -> dict:
    """Flood-fill cell distances from a start cell over free 6-neighbors."""
    from collections import deque

    dist = {start: 0}
    queue = deque([start])
    nx, ny, nz = grid.dims
    occupied = grid.occupied
    while queue:
        x, y, z = queue.popleft()
        d = dist[(x, y, z)]
        for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
                           (0, 0, 1), (0, 0, -1)):
            nxt = (x + dx, y + dy, z + dz)
            if not (0 <= nxt[0] < nx and 0 <= nxt[1] < ny and 0 <= nxt[2] < nz):
                continue
            if occupied[nxt] or nxt in dist:
                continue
            dist[nxt] = d + 1
            queue.append(nxt)
    return dist


def build_episode_spec(
    scene: Scene,
    instruction: str | Instruction,
    config: PipelineConfig,
    seed: int,
    max_steps: int = DEFAULT_MAX_STEPS,
    goal: ObjectRef | None = None,
    success_radius: float | None = None,
    grid: OccupancyGrid | None = None,
    dist_field: dict | None = None,
) -> EpisodeSpec:
    """Derive a full episode spec from a scene and an instruction.

    The goal defaults to the last grounded sub-goal of the reference parse.
    optimal_length is the shortest grid path from the post-takeoff start cell
    to the best goal approach cell (plus the vertical climb and descent); the
    success radius widens just enough to cover the landing point next to
    bulky goals.
    """
    instr = instruction if isinstance(instruction, Instruction) else Instruction(instruction)
    if goal is None:
        plan = parse_instruction(instr)
        refs = plan.grounded_refs()
        if not refs:
            raise ValueError(
                "instruction names no target object; pass an explicit goal")
        goal = refs[-1]
    matching = [o for o in scene.objects
                if ref_matches(goal, o, scene, scene.start_pose)]
    if not matching:
        raise ValueError(f"goal {goal.phrase()!r} matches no scene object")

    if grid is None:
        grid = rasterize(scene, config.resolution, config.clearance)
    pcfg = config.planner()
    start = scene.start_pose.position
    takeoff_z = scene.ground_z + DEFAULT_TAKEOFF_ALTITUDE
    start_cell = grid.cell_of(Vec3(start.x, start.y, takeoff_z))
    if dist_field is None:
        dist_field = (bfs_distances(grid, start_cell)
                      if grid.is_free(start_cell) else {})

    best_length = None
    radius_bound = 0.0
    align = abs(grid.cell_center(start_cell).z - takeoff_z)
    for obj in matching:
        center = obj.aabb.center
        try:
            target = select_target_cell(grid, center, pcfg)
        except Unreachable:
            continue
        target_center = grid.cell_center(target)
        landed = Vec3(target_center.x, target_center.y, scene.ground_z)
        radius_bound = max(radius_bound, landed.dist(center))
        steps = dist_field.get(target)
        if steps is None:
            continue
        # takeoff climb + altitude alignment + grid path + landing descent
        length = (abs(takeoff_z - start.z) + align + steps * grid.resolution
                  + (target_center.z - scene.ground_z))
        if best_length is None or length < best_length:
            best_length = length
    if best_length is None:
        # Goal unreachable on the grid; keep a positive lower bound so the
        # spec stays valid and the episode records the failure.
        best_length = max(1.0, start.dist(matching[0].aabb.center))
    if success_radius is None:
        success_radius = max(DEFAULT_SUCCESS_RADIUS, radius_bound + 0.35)
    return EpisodeSpec(
        scene=scene,
        instruction=instr,
        goal=goal,
        success_radius=success_radius,
        optimal_length=best_length,
        seed=seed,
        max_steps=max_steps,
    )
