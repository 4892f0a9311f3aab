// Wire types mirrored from the session service protocol (scene/1, state/1,
// session/1, instruction/1). The console never derives navigation state on
// its own; everything rendered comes from these documents.

export interface Vec3Doc {
  x: number;
  y: number;
  z: number;
}

export interface PoseDoc {
  position: Vec3Doc;
  yaw: number;
}

export interface AABBDoc {
  min: Vec3Doc;
  max: Vec3Doc;
}

export interface SceneObjectDoc {
  id: string;
  label: string;
  attributes: string[];
  aabb: AABBDoc;
  is_obstacle: boolean;
}

export interface SceneDoc {
  schema: "scene/1";
  name: string;
  archetype: string;
  bounds: AABBDoc;
  start_pose: PoseDoc;
  objects: SceneObjectDoc[];
}

export interface DetectionDoc {
  object_id: string;
  label: string;
  bearing: number;
  elevation: number;
  range: number;
  confidence: number;
}

export interface SubgoalStateDoc {
  kind: string;
  target: string | null;
  value: number | null;
  done: boolean;
}

export type SessionStatus =
  | "idle"
  | "awaiting_instruction"
  | "running"
  | "paused"
  | "finished";

export interface StateFrame {
  schema: "state/1";
  session_id: string;
  status: SessionStatus;
  outcome: "success" | "failure" | null;
  reason: string | null;
  step: number;
  pose: PoseDoc;
  active_subgoal: number | null;
  subgoals: SubgoalStateDoc[];
  detections: DetectionDoc[];
  termination: {
    goal_detected: boolean;
    within_threshold: boolean;
    subgoals_done: boolean;
  } | null;
  instruction: string | null;
  scene_digest: string;
}

export interface CreateSessionResponse {
  schema: "session/1";
  session_id: string;
  status: SessionStatus;
  scene: SceneDoc;
}

export interface InstructionEcho {
  schema: "instruction/1";
  subgoals: Array<{ kind: string; args: Record<string, unknown> }>;
}

export interface ParseErrorDetail {
  error: string;
  clause?: string;
  message?: string;
}

export interface LogSummary {
  outcome: string;
  reason: string | null;
  pathLength: number;
  optimalLength: number;
  steps: number;
  spl: number;
}
