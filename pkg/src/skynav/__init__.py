"""Deterministic UAV instruction-following simulator and evaluation harness."""

from .executive import (
    EpisodeLog,
    EpisodeRunner,
    EpisodeSpec,
    PipelineConfig,
    TerminationReport,
    build_episode_spec,
    check_termination,
    run_episode,
)
from .evaluation import (
    AblationRow,
    SuiteConfig,
    ablation_matrix,
    run_suite,
    spl,
    success_rate,
)
from .language import Instruction, ObjectRef, SubGoal, SubGoalPlan, parse_instruction
from .perception import Detection, DetectionQuery, FidelityProfile, PROFILES, detect
from .planner import ActionPlan, OccupancyGrid, rasterize, shortest_path
from .scenegen import generate_scene, make_episodes
from .world import (
    Action,
    CameraModel,
    Pose,
    Scene,
    SceneObject,
    Vec3,
    apply_action,
    load_scene,
    save_scene,
    validate_scene,
    visible_objects,
)

__version__ = "0.1.0"
