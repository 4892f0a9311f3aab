"""Command-line interface: single runs, suites, ablations, scenes, serving.

Exit codes: 0 for a successful episode outcome (or completed batch), 2 for a
failed episode outcome, 1 for configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .evaluation import AblationRow, SuiteConfig, ablation_matrix, run_suite
from .executive import (
    DEFAULT_MAX_STEPS,
    PipelineConfig,
    build_episode_spec,
    run_episode,
)
from .language import LanguageError, parse_object_ref
from .perception import PROFILES
from .scenegen import UnknownArchetype, generate_scene
from .world import ARCHETYPES, Scene, SceneFormatError, load_scene, save_scene


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 on usage errors (2 is a failed run)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _pipeline_from(profile: str, corrupt_rate: float,
                   llm_backend: str | None = None) -> PipelineConfig:
    if profile not in PROFILES:
        raise ValueError(
            f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    if not 0.0 <= corrupt_rate <= 1.0:
        raise ValueError("corrupt rate must be within [0, 1]")
    return PipelineConfig(profile=PROFILES[profile],
                          corrupt_rate=corrupt_rate, llm_backend=llm_backend)


def _load_or_generate_scene(args) -> Scene:
    if args.scene:
        if not os.path.exists(args.scene):
            raise ValueError(f"scene file {args.scene!r} does not exist")
        return load_scene(args.scene)
    if args.archetype:
        return generate_scene(args.archetype, args.scene_seed)
    raise ValueError("pass --scene FILE or --archetype NAME")


def _cmd_run(args) -> int:
    try:
        scene = _load_or_generate_scene(args)
        pipeline = _pipeline_from(args.profile, args.corrupt_rate,
                                  args.llm_backend)
        goal = parse_object_ref(args.goal) if args.goal else None
        spec = build_episode_spec(scene, args.instruction, pipeline,
                                  seed=args.seed, max_steps=args.max_steps,
                                  goal=goal)
    except (ValueError, UnknownArchetype, SceneFormatError, LanguageError,
            OSError) as exc:
        return _fail(str(exc))
    log = run_episode(spec, pipeline)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(log.to_jsonl())
    if args.plot:
        from .report import save_trajectory_figure

        save_trajectory_figure(log, scene, os.path.splitext(args.out)[0] + ".png")
    reason = f" reason={log.reason}" if log.reason else ""
    print(f"outcome={log.outcome}{reason} steps={len(log.records)} "
          f"path_length={log.path_length:.2f} "
          f"optimal_length={spec.optimal_length:.2f} log={args.out}")
    return 0 if log.success else 2


def _read_config(path: str) -> dict:
    if not os.path.exists(path):
        raise ValueError(f"config file {path!r} does not exist")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config is not valid JSON: {exc}") from exc


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _cmd_suite(args) -> int:
    try:
        doc = _read_config(args.config)
        config = SuiteConfig.from_json(doc)
        pipeline = _pipeline_from(doc.get("profile", "ORACLE"),
                                  float(doc.get("corrupt_rate", 0.0)))
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(str(exc))
    result = run_suite(config, pipeline)
    os.makedirs(args.out_dir, exist_ok=True)
    _write(os.path.join(args.out_dir, "suite.json"),
           json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n")
    _write(os.path.join(args.out_dir, "suite.csv"), result.to_csv())
    _write(os.path.join(args.out_dir, "suite.txt"), result.to_text())
    if not args.no_figures:
        from .report import save_suite_figure

        save_suite_figure(result, os.path.join(args.out_dir, "suite.png"))
    print(result.to_text(), end="")
    return 0


def _cmd_ablate(args) -> int:
    try:
        doc = _read_config(args.config)
        if doc.get("schema") != "ablate/1":
            raise ValueError(f"unsupported ablate schema {doc.get('schema')!r}")
        config = SuiteConfig.from_json(doc["suite"])
        rows = [AblationRow(str(r["name"]), str(r["profile"]),
                            float(r.get("corrupt_rate", 0.0)))
                for r in doc.get("rows", [])]
        if not rows:
            raise ValueError("ablation config has no rows")
        for row in rows:
            if row.profile not in PROFILES:
                raise ValueError(f"unknown profile {row.profile!r}")
        base = _pipeline_from(doc.get("profile", "ORACLE"), 0.0)
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(str(exc))
    result = ablation_matrix(config, rows, base)
    os.makedirs(args.out_dir, exist_ok=True)
    _write(os.path.join(args.out_dir, "ablation.json"),
           json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n")
    _write(os.path.join(args.out_dir, "ablation.csv"), result.to_csv())
    _write(os.path.join(args.out_dir, "ablation.txt"), result.to_text())
    if not args.no_figures:
        from .report import save_ablation_figure

        save_ablation_figure(result, os.path.join(args.out_dir, "ablation.png"))
    print(result.to_text(), end="")
    return 0


def _cmd_scene(args) -> int:
    try:
        scene = generate_scene(args.archetype, args.seed)
    except UnknownArchetype as exc:
        return _fail(str(exc))
    save_scene(scene, args.out)
    print(f"wrote {args.out} ({len(scene.objects)} objects)")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(pace=args.pace)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="skynav",
                     description="UAV instruction-following simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one episode", add_help=True)
    run.add_argument("--scene", help="scene/1 JSON file")
    run.add_argument("--archetype", choices=ARCHETYPES)
    run.add_argument("--scene-seed", type=int, default=0)
    run.add_argument("--instruction", required=True)
    run.add_argument("--goal", help="goal noun phrase; default: last "
                                    "grounded sub-goal of the instruction")
    run.add_argument("--profile", default="ORACLE")
    run.add_argument("--corrupt-rate", type=float, default=0.0)
    run.add_argument("--llm-backend", help="decompose/1 endpoint URL")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    run.add_argument("--out", default="episode_log.jsonl")
    run.add_argument("--plot", action="store_true",
                     help="also render the trajectory figure")
    run.set_defaults(func=_cmd_run)

    suite = sub.add_parser("suite", help="run an episode suite")
    suite.add_argument("--config", required=True, help="suite/1 JSON config")
    suite.add_argument("--out-dir", default="suite_results")
    suite.add_argument("--no-figures", action="store_true")
    suite.set_defaults(func=_cmd_suite)

    ablate = sub.add_parser("ablate", help="run the design-choice matrix")
    ablate.add_argument("--config", required=True, help="ablate/1 JSON config")
    ablate.add_argument("--out-dir", default="ablation_results")
    ablate.add_argument("--no-figures", action="store_true")
    ablate.set_defaults(func=_cmd_ablate)

    scene = sub.add_parser("scene", help="generate a scene file")
    scene.add_argument("--archetype", required=True)
    scene.add_argument("--seed", type=int, default=0)
    scene.add_argument("--out", default="scene.json")
    scene.set_defaults(func=_cmd_scene)

    serve = sub.add_parser("serve", help="start the session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8008)
    serve.add_argument("--pace", type=float, default=0.2,
                       help="seconds per simulation step in live mode")
    serve.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
