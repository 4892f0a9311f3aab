"""HTTP session service: live episodes driven by console-issued commands.

Each session owns one episode at a time. A dedicated executor thread consumes
commands (pause/resume/step/abort/reset) between simulation steps, so session
state is never mutated concurrently. Clients watch progress over a server-push
stream of SessionState frames (SSE, `state/1` JSON payloads) paced at the
live step rate; control requests are plain JSON over HTTP.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import uuid

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, StreamingResponse

from .executive import (
    DEFAULT_MAX_STEPS,
    EpisodeRunner,
    PipelineConfig,
    build_episode_spec,
)
from .language import LanguageError, UnparsableClause
from .perception import PROFILES
from .scenegen import UnknownArchetype, generate_scene
from .world import Scene, SceneFormatError

STATE_SCHEMA = "state/1"
SESSION_SCHEMA = "session/1"
INSTRUCTION_SCHEMA = "instruction/1"


class Session:
    """One live episode plus its executor thread and command queue."""

    def __init__(self, session_id: str, scene: Scene,
                 pipeline: PipelineConfig, seed: int, max_steps: int,
                 pace: float):
        self.id = session_id
        self.scene = scene
        self.pipeline = pipeline
        self.seed = seed
        self.max_steps = max_steps
        self.pace = pace
        self.status = "idle"
        self.runner: EpisodeRunner | None = None
        self.instruction: str | None = None
        self.log_text: str | None = None
        self.lock = threading.RLock()
        self.commands: "queue.Queue[str]" = queue.Queue()
        self._stop = False
        self.status = "awaiting_instruction"
        self.thread = threading.Thread(target=self._loop, daemon=True,
                                       name=f"session-{session_id[:8]}")
        self.thread.start()

    # -- executor thread ------------------------------------------------------

    def _loop(self) -> None:
        wait = self.pace if self.pace > 0 else 0.005
        while not self._stop:
            try:
                command = self.commands.get(timeout=wait)
            except queue.Empty:
                command = None
            with self.lock:
                if command:
                    self._handle(command)
                if self.status == "running" and self.runner is not None:
                    self._advance()

    def _handle(self, command: str) -> None:
        if command == "pause" and self.status == "running":
            self.status = "paused"
        elif command == "resume" and self.status == "paused":
            self.status = "running"
        elif command == "step" and self.status == "paused":
            self._advance()
        elif command == "abort" and self.status in ("running", "paused"):
            self.status = "finished"
            if self.runner is not None:
                self.runner.abort()
                self.log_text = self.runner.to_log().to_jsonl()
        elif command == "reset":
            self.runner = None
            self.instruction = None
            self.log_text = None
            self.status = "awaiting_instruction"

    def _advance(self) -> None:
        assert self.runner is not None
        self.runner.step()
        if self.runner.finished:
            self.status = "finished"
            self.log_text = self.runner.to_log().to_jsonl()

    # -- API-thread operations -------------------------------------------------

    def submit_instruction(self, text: str) -> dict:
        with self.lock:
            if self.status not in ("awaiting_instruction", "finished"):
                raise HTTPException(
                    409, detail=f"instruction not accepted while {self.status}")
            spec = build_episode_spec(self.scene, text, self.pipeline,
                                      seed=self.seed, max_steps=self.max_steps)
            runner = EpisodeRunner(spec, self.pipeline)
            self.runner = runner
            self.instruction = text
            self.log_text = None
            self.status = "running"
            return {
                "schema": INSTRUCTION_SCHEMA,
                "subgoals": [sg.to_json() for sg in runner.plan.subgoals]
                if runner.plan else [],
            }

    def enqueue(self, command: str) -> str:
        with self.lock:
            legal = {
                "pause": ("running",),
                "resume": ("paused",),
                "step": ("paused",),
                "abort": ("running", "paused"),
                "reset": ("finished",),
            }[command]
            if self.status not in legal:
                raise HTTPException(
                    409, detail=f"cannot {command} while {self.status}")
        self.commands.put(command)
        # Commands are applied between steps; wait for the transition so the
        # response reflects the post-command status.
        deadline = time.time() + max(1.0, 5 * self.pace)
        target = {"pause": "paused", "resume": "running",
                  "abort": "finished", "reset": "awaiting_instruction",
                  "step": None}[command]
        while target and time.time() < deadline:
            with self.lock:
                if self.status == target:
                    break
            time.sleep(0.005)
        with self.lock:
            return self.status

    def snapshot(self) -> dict:
        with self.lock:
            runner = self.runner
            pose = runner.pose if runner else self.scene.start_pose
            subgoals = []
            if runner is not None and runner.plan is not None:
                for i, sg in enumerate(runner.plan.subgoals):
                    subgoals.append({
                        "kind": sg.kind,
                        "target": sg.ref.phrase() if sg.ref else None,
                        "value": sg.value,
                        "done": bool(runner.progress[i]),
                    })
            return {
                "schema": STATE_SCHEMA,
                "session_id": self.id,
                "status": self.status,
                "outcome": runner.outcome if runner else None,
                "reason": runner.reason if runner else None,
                "step": len(runner.records) if runner else 0,
                "pose": pose.to_json(),
                "active_subgoal": runner.active_subgoal if runner else None,
                "subgoals": subgoals,
                "detections": [d.to_json() for d in runner.last_detections]
                if runner else [],
                "termination": runner.termination.to_json() if runner else None,
                "instruction": self.instruction,
                "scene_digest": self.scene.digest(),
            }

    def close(self) -> None:
        self._stop = True


def create_app(pace: float = 0.2) -> FastAPI:
    """Build the session service; pace is the live seconds-per-step."""
    app = FastAPI(title="skynav session service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail=f"no session {session_id!r}")
        return session

    @app.post("/sessions")
    def create_session(request: dict):
        known = {"schema", "archetype", "scene_seed", "scene", "profile",
                 "corrupt_rate", "seed", "max_steps"}
        unknown = set(request) - known
        if unknown:
            raise HTTPException(422, detail=f"unknown fields {sorted(unknown)}")
        if request.get("schema", SESSION_SCHEMA) != SESSION_SCHEMA:
            raise HTTPException(422, detail="unsupported session schema")
        profile = request.get("profile", "ORACLE")
        if profile not in PROFILES:
            raise HTTPException(422, detail=f"unknown profile {profile!r}")
        try:
            if request.get("scene") is not None:
                scene = Scene.from_json(request["scene"])
            elif request.get("archetype"):
                scene = generate_scene(request["archetype"],
                                       int(request.get("scene_seed", 0)))
            else:
                raise HTTPException(422, detail="pass archetype or scene")
        except (UnknownArchetype, SceneFormatError, ValueError) as exc:
            raise HTTPException(422, detail=str(exc)) from exc
        pipeline = PipelineConfig(
            profile=PROFILES[profile],
            corrupt_rate=float(request.get("corrupt_rate", 0.0)))
        session = Session(
            session_id=uuid.uuid4().hex,
            scene=scene,
            pipeline=pipeline,
            seed=int(request.get("seed", 0)),
            max_steps=int(request.get("max_steps", DEFAULT_MAX_STEPS)),
            pace=pace,
        )
        sessions[session.id] = session
        return {
            "schema": SESSION_SCHEMA,
            "session_id": session.id,
            "status": session.status,
            "scene": scene.to_json(),
        }

    @app.post("/sessions/{session_id}/instruction")
    def submit_instruction(session_id: str, request: dict):
        session = get_session(session_id)
        unknown = set(request) - {"schema", "text"}
        if unknown:
            raise HTTPException(422, detail=f"unknown fields {sorted(unknown)}")
        if request.get("schema", INSTRUCTION_SCHEMA) != INSTRUCTION_SCHEMA:
            raise HTTPException(422, detail="unsupported instruction schema")
        text = request.get("text", "")
        if not isinstance(text, str) or not text.strip():
            raise HTTPException(422, detail="instruction text is empty")
        try:
            return session.submit_instruction(text)
        except UnparsableClause as exc:
            raise HTTPException(422, detail={
                "error": "unparsable_clause", "clause": exc.clause,
            }) from exc
        except (LanguageError, ValueError) as exc:
            raise HTTPException(422, detail={
                "error": "bad_instruction", "message": str(exc),
            }) from exc

    @app.post("/sessions/{session_id}/{command}")
    def control(session_id: str, command: str):
        if command not in ("pause", "resume", "step", "abort", "reset"):
            raise HTTPException(404, detail=f"unknown command {command!r}")
        session = get_session(session_id)
        status = session.enqueue(command)
        return {"schema": SESSION_SCHEMA, "session_id": session_id,
                "status": status}

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str):
        return get_session(session_id).snapshot()

    @app.get("/sessions/{session_id}/scene")
    def scene_doc(session_id: str):
        return get_session(session_id).scene.to_json()

    @app.get("/sessions/{session_id}/log")
    def log(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.log_text is None:
                raise HTTPException(409, detail="episode not finished")
            return PlainTextResponse(session.log_text,
                                     media_type="application/jsonl")

    @app.get("/sessions/{session_id}/stream")
    def stream(session_id: str, frames: int | None = None):
        """SSE state stream; `frames` optionally caps the frame count so
        in-process test clients can drain and close the connection."""
        session = get_session(session_id)
        tick = max(0.02, min(pace, 0.2)) if pace > 0 else 0.05

        def generate():
            sent = 0
            while frames is None or sent < frames:
                payload = json.dumps(session.snapshot(), sort_keys=True)
                yield f"data: {payload}\n\n"
                sent += 1
                time.sleep(tick)

        return StreamingResponse(generate(), media_type="text/event-stream")

    return app
