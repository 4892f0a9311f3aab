"""Acceptance suite: one test per exit criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
report lines.
"""

import json
import random
import time
from pathlib import Path

import pytest

from skynav.cli import main
from skynav.evaluation import (
    AblationRow,
    SuiteConfig,
    ablation_matrix,
    generate_suite_episodes,
    run_suite,
    spl,
    success_rate,
)
from skynav.executive import PipelineConfig, run_episode
from skynav.language import Instruction, parse_instruction, plan_violations
from skynav.perception import ref_matches
from skynav.planner import Unreachable, path_to_actions, rasterize, shortest_path
from skynav.world import Pose, apply_action

from grammar_synth import synthesize_instruction
from test_evaluation import _FakeSpec, fake_log
from test_planner import bfs_oracle, grid_to_scene, random_free_cell, random_grid

ORACLE_CONFIG = PipelineConfig()

SUITE_CONFIG = SuiteConfig(
    scenes=(("warehouse", 11), ("park", 7), ("neighborhood", 3),
            ("office", 5)),
    episodes_per_scene=15,
    seed=101,
    max_steps=250,
)


def _report(criterion: str, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: PASS ({detail})")


@pytest.fixture(scope="module")
def shared_suite():
    """The fixed-seed 60-episode suite shared by the soundness and ablation
    criteria."""
    return generate_suite_episodes(SUITE_CONFIG, ORACLE_CONFIG)


def test_metric_arithmetic_fixture_vectors():
    logs_13 = [fake_log(i < 13) for i in range(15)]
    sr_13 = success_rate(logs_13) * 100
    assert abs(sr_13 - 86.67) <= 0.01
    logs_14 = [fake_log(i < 14) for i in range(15)]
    sr_14 = success_rate(logs_14) * 100
    assert abs(sr_14 - 93.33) <= 0.01
    _report("metric-arithmetic",
            f"13/15 -> {sr_13:.4f}%, 14/15 -> {sr_14:.4f}%")


def test_spl_formula_suite():
    started = time.monotonic()
    assert spl([fake_log(True, 10.0)], [_FakeSpec(10.0)]) == 1.0
    assert spl([fake_log(False, 10.0)], [_FakeSpec(10.0)]) == 0.0
    assert spl([fake_log(True, 20.0)], [_FakeSpec(10.0)]) == 0.5
    rng = random.Random(20240515)
    for _ in range(1000):
        n = rng.randrange(1, 25)
        logs = [fake_log(rng.random() < 0.5, rng.uniform(0.5, 50.0))
                for _ in range(n)]
        specs = [_FakeSpec(rng.uniform(0.5, 50.0)) for _ in range(n)]
        assert spl(logs, specs) <= success_rate(logs)
    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    _report("spl-formula",
            f"identities and 1000 random batches in {elapsed:.2f}s")


def test_planner_oracle_equivalence():
    started = time.monotonic()
    rng = random.Random(7)
    resolution = 0.5
    checked = replayed = 0
    for _ in range(100):
        grid = random_grid(rng, dims=(20, 20, 5), density=0.2,
                           resolution=resolution)
        start = random_free_cell(rng, grid)
        goal = random_free_cell(rng, grid)
        want = bfs_oracle(grid, start, goal)
        if want is None:
            with pytest.raises(Unreachable):
                shortest_path(grid, start, goal)
            continue
        path = shortest_path(grid, start, goal)
        assert len(path) - 1 == want
        checked += 1
        # Replay the compiled mission through the kinematics in a scene
        # whose obstacle cubes reproduce the grid exactly.
        scene = grid_to_scene(grid.occupied, resolution)
        regrid = rasterize(scene, resolution, clearance=0.0)
        assert (regrid.occupied == grid.occupied).all()
        actions = path_to_actions(path, 0.0, resolution)
        pose = Pose(grid.cell_center(start), 0.0)
        for action in actions:
            pose = apply_action(pose, action, scene, 0.0)  # raises on collision
        assert pose.position.dist(grid.cell_center(goal)) < 1e-9
        replayed += 1
    elapsed = time.monotonic() - started
    assert elapsed < 60.0
    _report("planner-oracle",
            f"{checked} reachable pairs equal BFS, {replayed} replays "
            f"collision-free in {elapsed:.1f}s")


def test_termination_soundness_oracle_suite(shared_suite):
    started = time.monotonic()
    successes = total = 0
    for scene, specs in shared_suite:
        for spec in specs:
            log = run_episode(spec, ORACLE_CONFIG)
            total += 1
            if not log.success:
                continue
            successes += 1
            report = log.termination
            assert report.goal_detected and report.within_threshold \
                and report.subgoals_done, \
                f"success log violates the three criteria: {spec.instruction}"
            final = log.final_pose()
            near = [obj for obj in spec.scene.objects
                    if ref_matches(spec.goal, obj, spec.scene, final)
                    and final.position.dist(obj.aabb.center)
                    <= spec.success_radius]
            assert near, f"final pose outside success radius: {spec.instruction}"
    sr = successes / total
    elapsed = time.monotonic() - started
    assert total == 60
    assert sr >= 0.9
    assert elapsed < 300.0
    _report("termination-soundness",
            f"SR {successes}/{total} = {sr:.2%}, all success logs sound, "
            f"{elapsed:.1f}s")


def test_ablation_ordering(shared_suite):
    rows = [
        AblationRow("closed", "CLOSED_VOCAB_80"),
        AblationRow("coarse", "OPEN_VOCAB_COARSE"),
        AblationRow("precise", "OPEN_VOCAB_PRECISE"),
        AblationRow("corrupt-0", "ORACLE", 0.0),
        AblationRow("corrupt-25", "ORACLE", 0.25),
        AblationRow("corrupt-50", "ORACLE", 0.5),
    ]
    result = ablation_matrix(SUITE_CONFIG, rows, ORACLE_CONFIG,
                             episodes=shared_suite)
    closed, coarse, precise = result.sr[0], result.sr[1], result.sr[2]
    for i, scene in enumerate(result.scenes):
        assert closed[i] + 0.10 <= coarse[i], \
            f"{scene}: closed {closed[i]:.2%} not 10pp under coarse {coarse[i]:.2%}"
        assert coarse[i] <= precise[i] + 1e-9, \
            f"{scene}: coarse {coarse[i]:.2%} above precise {precise[i]:.2%}"
    corrupt_sr = result.overall[3:6]
    assert corrupt_sr[0] + 1e-9 >= corrupt_sr[1] >= corrupt_sr[2] - 1e-9
    assert corrupt_sr[1] + 1e-9 >= corrupt_sr[2]
    _report("ablation-ordering",
            "closed<coarse<=precise per scene; corrupt SR "
            + " -> ".join(f"{v:.2%}" for v in corrupt_sr))


def test_cli_determinism(tmp_path):
    def run_once(tag: str) -> bytes:
        out = tmp_path / f"run-{tag}.jsonl"
        code = main(["run", "--archetype", "park", "--scene-seed", "7",
                     "--instruction",
                     "take off, fly to the fountain, then land",
                     "--seed", "9", "--out", str(out)])
        assert code == 0
        return out.read_bytes()

    assert run_once("a") == run_once("b")

    config_path = tmp_path / "suite.json"
    config_path.write_text(json.dumps({
        "schema": "suite/1",
        "scenes": [{"archetype": "park", "seed": 7},
                   {"archetype": "warehouse", "seed": 11}],
        "episodes_per_scene": 2,
        "seed": 42,
        "profile": "ORACLE",
    }))

    def suite_once(tag: str) -> dict[str, bytes]:
        out_dir = tmp_path / f"suite-{tag}"
        code = main(["suite", "--config", str(config_path),
                     "--out-dir", str(out_dir), "--no-figures"])
        assert code == 0
        return {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())}

    first = suite_once("a")
    second = suite_once("b")
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], f"{name} differs between runs"
    _report("determinism",
            f"episode log and {len(first)} suite files byte-identical")


def test_parser_corpus_and_synthesis():
    from importlib import resources

    corpus = json.loads(
        resources.files("skynav").joinpath("data/instructions.json")
        .read_text())["instructions"]
    assert len(corpus) == 60
    for entry in corpus:
        plan = parse_instruction(Instruction(entry["text"]))
        assert plan.to_json()["subgoals"] == entry["plan"], entry["text"]
    rng = random.Random(424242)
    for _ in range(10_000):
        text = synthesize_instruction(rng)
        plan = parse_instruction(Instruction(text))
        assert plan_violations(plan.subgoals) == [], text
    _report("parser-corpus",
            "60 golden plans matched; 10000 synthesized instructions valid")
