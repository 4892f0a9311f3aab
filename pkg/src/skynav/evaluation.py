"""Navigation metrics (SR, SPL), episode suites, and the ablation matrix.

SR is the fraction of successful episodes. SPL weights each success by the
ratio of the precomputed optimal path length to the flown length, so longer
successful paths score lower. The ablation matrix re-runs one shared episode
suite under varying detector profiles and plan-corruption rates.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

from .executive import (
    DEFAULT_MAX_STEPS,
    EpisodeLog,
    EpisodeSpec,
    PipelineConfig,
    run_episode,
    step_seed,
)
from .perception import PROFILES
from .scenegen import generate_scene, make_episodes
from .world import Scene

SUITE_SCHEMA = "suite/1"
ABLATE_SCHEMA = "ablate/1"


class EmptyInput(Exception):
    pass


def success_rate(logs: list[EpisodeLog]) -> float:
    """Fraction of episodes that ended in success."""
    if not logs:
        raise EmptyInput("no episode logs")
    return sum(1 for log in logs if log.success) / len(logs)


def spl(logs: list[EpisodeLog], specs: list[EpisodeSpec]) -> float:
    """Success weighted by inverse normalized path length.

    Per episode: S * l / max(p, l) with S the success indicator, l the
    precomputed optimal length, p the flown length; averaged over episodes.
    """
    if not logs:
        raise EmptyInput("no episode logs")
    if len(logs) != len(specs):
        raise ValueError("each log needs its spec")
    total = 0.0
    for log, spec in zip(logs, specs):
        if not log.success:
            continue
        if not log.path_length > 0:
            raise ValueError("successful episode with non-positive path length")
        total += spec.optimal_length / max(log.path_length, spec.optimal_length)
    return total / len(logs)


@dataclass(frozen=True)
class SceneScore:
    scene: str
    archetype: str
    episodes: int
    sr: float
    spl: float


@dataclass(frozen=True)
class SuiteConfig:
    scenes: tuple[tuple[str, int], ...]  # (archetype, scene seed)
    episodes_per_scene: int = 15
    seed: int = 0
    max_steps: int = DEFAULT_MAX_STEPS

    def to_json(self) -> dict:
        return {
            "schema": SUITE_SCHEMA,
            "scenes": [{"archetype": a, "seed": s} for a, s in self.scenes],
            "episodes_per_scene": self.episodes_per_scene,
            "seed": self.seed,
            "max_steps": self.max_steps,
        }

    @staticmethod
    def from_json(doc: dict) -> "SuiteConfig":
        if doc.get("schema") != SUITE_SCHEMA:
            raise ValueError(f"unsupported suite schema {doc.get('schema')!r}")
        scenes = tuple((str(s["archetype"]), int(s["seed"]))
                       for s in doc["scenes"])
        return SuiteConfig(
            scenes=scenes,
            episodes_per_scene=int(doc.get("episodes_per_scene", 15)),
            seed=int(doc.get("seed", 0)),
            max_steps=int(doc.get("max_steps", DEFAULT_MAX_STEPS)),
        )


@dataclass
class SuiteResult:
    per_scene: list[SceneScore]
    overall_sr: float
    overall_spl: float
    config_digest: str

    def to_json(self) -> dict:
        return {
            "schema": SUITE_SCHEMA,
            "config_digest": self.config_digest,
            "per_scene": [{
                "scene": s.scene, "archetype": s.archetype,
                "episodes": s.episodes, "sr": s.sr, "spl": s.spl,
            } for s in self.per_scene],
            "overall": {
                "episodes": sum(s.episodes for s in self.per_scene),
                "sr": self.overall_sr,
                "spl": self.overall_spl,
            },
        }

    def to_text(self) -> str:
        """Aligned table, scenes as column groups with SR/SPL sub-columns."""
        label = f"{'':<10}"
        scene_row = label + "".join(f"{s.scene:>20}" for s in self.per_scene)
        sub_row = label + "".join(f"{'SR':>11}{'SPL':>9}"
                                  for _ in self.per_scene)
        result_row = f"{'result':<10}" + "".join(
            f"{s.sr * 100:>10.2f}%{s.spl:>9.4f}" for s in self.per_scene)
        total = sum(s.episodes for s in self.per_scene)
        footer = (f"overall: SR {self.overall_sr * 100:.2f}%  "
                  f"SPL {self.overall_spl:.4f}  ({total} episodes)")
        width = max(len(scene_row), len(sub_row), len(result_row))
        return "\n".join([scene_row, sub_row, "-" * width, result_row,
                          footer]) + "\n"

    def to_csv(self) -> str:
        lines = ["scene,archetype,episodes,sr,spl"]
        for s in self.per_scene:
            lines.append(f"{s.scene},{s.archetype},{s.episodes},"
                         f"{s.sr:.6f},{s.spl:.6f}")
        total = sum(s.episodes for s in self.per_scene)
        lines.append(f"overall,,{total},{self.overall_sr:.6f},"
                     f"{self.overall_spl:.6f}")
        return "\n".join(lines) + "\n"


def _config_digest(config: SuiteConfig, pipeline: PipelineConfig) -> str:
    blob = json.dumps({"suite": config.to_json(),
                       "pipeline": pipeline.to_json()},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def generate_suite_episodes(
    config: SuiteConfig, pipeline: PipelineConfig,
) -> list[tuple[Scene, list[EpisodeSpec]]]:
    """Scenes plus per-scene episode specs, shared across ablation rows."""
    out = []
    for archetype, scene_seed in config.scenes:
        scene = generate_scene(archetype, scene_seed)
        specs = make_episodes(
            scene, config.episodes_per_scene,
            seed=step_seed(config.seed, f"{archetype}:{scene_seed}"),
            config=pipeline, max_steps=config.max_steps)
        out.append((scene, specs))
    return out


def score_scene(scene: Scene, specs: list[EpisodeSpec],
                pipeline: PipelineConfig) -> tuple[SceneScore, list[EpisodeLog]]:
    logs = [run_episode(spec, pipeline) for spec in specs]
    return SceneScore(
        scene=scene.name, archetype=scene.archetype, episodes=len(logs),
        sr=success_rate(logs), spl=spl(logs, specs),
    ), logs


def run_suite(config: SuiteConfig, pipeline: PipelineConfig,
              episodes: list[tuple[Scene, list[EpisodeSpec]]] | None = None,
              ) -> SuiteResult:
    """Run every episode of the suite and aggregate per-scene and overall."""
    if episodes is None:
        episodes = generate_suite_episodes(config, pipeline)
    per_scene = []
    all_logs: list[EpisodeLog] = []
    all_specs: list[EpisodeSpec] = []
    for scene, specs in episodes:
        score, logs = score_scene(scene, specs, pipeline)
        per_scene.append(score)
        all_logs.extend(logs)
        all_specs.extend(specs)
    if not all_logs:
        raise EmptyInput("suite produced no episodes")
    return SuiteResult(
        per_scene=per_scene,
        overall_sr=success_rate(all_logs),
        overall_spl=spl(all_logs, all_specs),
        config_digest=_config_digest(config, pipeline),
    )


@dataclass(frozen=True)
class AblationRow:
    name: str
    profile: str
    corrupt_rate: float = 0.0

    def apply(self, base: PipelineConfig) -> PipelineConfig:
        if self.profile not in PROFILES:
            raise ValueError(f"unknown fidelity profile {self.profile!r}")
        return replace(base, profile=PROFILES[self.profile],
                       corrupt_rate=self.corrupt_rate)


@dataclass
class AblationResult:
    scenes: list[str]
    rows: list[AblationRow]
    sr: list[list[float]]  # rows x scenes
    overall: list[float]

    def sr_for(self, row_name: str, scene: str) -> float:
        i = next(i for i, r in enumerate(self.rows) if r.name == row_name)
        return self.sr[i][self.scenes.index(scene)]

    def to_json(self) -> dict:
        return {
            "schema": ABLATE_SCHEMA,
            "scenes": self.scenes,
            "rows": [{
                "name": r.name, "profile": r.profile,
                "corrupt_rate": r.corrupt_rate,
                "sr": self.sr[i], "overall_sr": self.overall[i],
            } for i, r in enumerate(self.rows)],
        }

    def to_csv(self) -> str:
        header = "design_choice,profile,corrupt_rate," + ",".join(
            self.scenes) + ",overall"
        lines = [header]
        for i, row in enumerate(self.rows):
            cells = ",".join(f"{v:.6f}" for v in self.sr[i])
            lines.append(f"{row.name},{row.profile},{row.corrupt_rate},"
                         f"{cells},{self.overall[i]:.6f}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len(r.name) for r in self.rows) + 2
        header = f"{'design choice':<{width}}" + "".join(
            f"{s:>16}" for s in self.scenes) + f"{'overall':>16}"
        lines = [header, "-" * len(header)]
        for i, row in enumerate(self.rows):
            cells = "".join(f"{v * 100:>15.2f}%" for v in self.sr[i])
            lines.append(f"{row.name:<{width}}{cells}"
                         f"{self.overall[i] * 100:>15.2f}%")
        return "\n".join(lines) + "\n"


def ablation_matrix(config: SuiteConfig, rows: list[AblationRow],
                    base: PipelineConfig,
                    episodes: list[tuple[Scene, list[EpisodeSpec]]] | None = None,
                    ) -> AblationResult:
    """Success rates per (design choice, scene) over one shared episode set."""
    if not rows:
        raise ValueError("ablation needs at least one row")
    if episodes is None:
        episodes = generate_suite_episodes(config, base)
    scenes = [scene.name for scene, _ in episodes]
    sr_table: list[list[float]] = []
    overall: list[float] = []
    for row in rows:
        pipeline = row.apply(base)
        row_sr = []
        row_logs: list[EpisodeLog] = []
        for scene, specs in episodes:
            logs = [run_episode(spec, pipeline) for spec in specs]
            row_sr.append(success_rate(logs))
            row_logs.extend(logs)
        sr_table.append(row_sr)
        overall.append(success_rate(row_logs))
    return AblationResult(scenes=scenes, rows=list(rows), sr=sr_table,
                          overall=overall)
