// Pure derivation of everything the renderer draws from the latest streamed
// frame plus the static scene document. No navigation state is computed
// client-side: poses, detections, and checklist items are copied from the
// frame, only re-projected into screen-friendly geometry.

import type {
  LogSummary,
  SceneDoc,
  StateFrame,
  SubgoalStateDoc,
} from "./types.js";

export const STALL_THRESHOLD_MS = 2000;

export interface Footprint {
  id: string;
  label: string;
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  obstacle: boolean;
  color: string | null;
}

export interface DetectionRay {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  label: string;
}

export interface ChecklistItem {
  index: number;
  text: string;
  done: boolean;
  active: boolean;
}

export interface ViewModel {
  mapBounds: { x0: number; y0: number; x1: number; y1: number };
  footprints: Footprint[];
  drone: { x: number; y: number; heading: number } | null;
  altitude: number;
  maxAltitude: number;
  detectionRays: DetectionRay[];
  checklist: ChecklistItem[];
  status: string;
  statusChip: string;
  banner: { kind: "none" | "success" | "failure" | "degraded"; text: string };
  step: number;
  instruction: string | null;
}

const CSS_COLORS = new Set([
  "red",
  "blue",
  "green",
  "yellow",
  "orange",
  "white",
  "black",
  "gray",
  "brown",
]);

function footprints(scene: SceneDoc): Footprint[] {
  return scene.objects.map((obj) => ({
    id: obj.id,
    label: obj.label,
    x0: obj.aabb.min.x,
    y0: obj.aabb.min.y,
    x1: obj.aabb.max.x,
    y1: obj.aabb.max.y,
    obstacle: obj.is_obstacle,
    color: obj.attributes.find((a) => CSS_COLORS.has(a)) ?? null,
  }));
}

function checklistText(subgoal: SubgoalStateDoc): string {
  const kind = subgoal.kind.toLowerCase().replace(/_/g, " ");
  if (subgoal.target) return `${kind} ${subgoal.target}`;
  if (subgoal.value !== null && subgoal.value !== undefined) {
    return `${kind} ${subgoal.value}`;
  }
  return kind;
}

export function buildViewModel(
  scene: SceneDoc,
  frame: StateFrame | null,
  nowMs: number,
  lastFrameAtMs: number | null,
  logSummary: LogSummary | null = null,
): ViewModel {
  const bounds = {
    x0: scene.bounds.min.x,
    y0: scene.bounds.min.y,
    x1: scene.bounds.max.x,
    y1: scene.bounds.max.y,
  };
  const base: ViewModel = {
    mapBounds: bounds,
    footprints: footprints(scene),
    drone: null,
    altitude: 0,
    maxAltitude: scene.bounds.max.z,
    detectionRays: [],
    checklist: [],
    status: "connecting",
    statusChip: "connecting",
    banner: { kind: "none", text: "" },
    step: 0,
    instruction: null,
  };
  if (frame === null) return base;

  const pose = frame.pose;
  base.drone = { x: pose.position.x, y: pose.position.y, heading: pose.yaw };
  base.altitude = pose.position.z;
  base.step = frame.step;
  base.status = frame.status;
  base.statusChip = frame.status;
  base.instruction = frame.instruction;
  base.detectionRays = frame.detections.map((det) => {
    const horizontal = det.range * Math.cos(det.elevation);
    const heading = pose.yaw + det.bearing;
    return {
      x0: pose.position.x,
      y0: pose.position.y,
      x1: pose.position.x + horizontal * Math.cos(heading),
      y1: pose.position.y + horizontal * Math.sin(heading),
      label: det.label,
    };
  });
  base.checklist = frame.subgoals.map((subgoal, index) => ({
    index,
    text: checklistText(subgoal),
    done: subgoal.done,
    active: frame.active_subgoal === index && frame.status !== "finished",
  }));

  const stalled =
    lastFrameAtMs !== null && nowMs - lastFrameAtMs > STALL_THRESHOLD_MS;
  if (stalled) {
    base.banner = {
      kind: "degraded",
      text: `connection degraded: no frames for ${(
        (nowMs - lastFrameAtMs) / 1000
      ).toFixed(1)}s`,
    };
  } else if (frame.status === "finished" && frame.outcome === "success") {
    const summary = logSummary
      ? ` path ${logSummary.pathLength.toFixed(1)} m, ` +
        `optimal ${logSummary.optimalLength.toFixed(1)} m, ` +
        `SPL ${logSummary.spl.toFixed(2)}`
      : "";
    base.banner = { kind: "success", text: `mission success${summary}` };
  } else if (frame.status === "finished") {
    base.banner = {
      kind: "failure",
      text: `mission failed${frame.reason ? `: ${frame.reason}` : ""}`,
    };
  }
  return base;
}
