import type { SceneDoc, StateFrame } from "../src/types.js";

export function sampleScene(): SceneDoc {
  return {
    schema: "scene/1",
    name: "park-7",
    archetype: "park",
    bounds: { min: { x: 0, y: 0, z: 0 }, max: { x: 28, y: 28, z: 9 } },
    start_pose: { position: { x: 2.25, y: 14.25, z: 0 }, yaw: 0 },
    objects: [
      {
        id: "fountain-0",
        label: "fountain",
        attributes: ["gray", "stone"],
        aabb: { min: { x: 13, y: 13, z: 0 }, max: { x: 15.4, y: 15.4, z: 1.2 } },
        is_obstacle: true,
      },
      {
        id: "bench-0",
        label: "bench",
        attributes: ["red"],
        aabb: { min: { x: 5, y: 20, z: 0 }, max: { x: 6.6, y: 20.6, z: 0.9 } },
        is_obstacle: true,
      },
    ],
  };
}

export function sampleFrame(overrides: Partial<StateFrame> = {}): StateFrame {
  return {
    schema: "state/1",
    session_id: "abc123",
    status: "running",
    outcome: null,
    reason: null,
    step: 5,
    pose: { position: { x: 4.25, y: 14.25, z: 2.0 }, yaw: 0 },
    active_subgoal: 1,
    subgoals: [
      { kind: "TAKEOFF", target: null, value: 2.0, done: true },
      { kind: "NAVIGATE_TO", target: "fountain", value: null, done: false },
      { kind: "LAND", target: null, value: null, done: false },
    ],
    detections: [
      {
        object_id: "fountain-0",
        label: "fountain",
        bearing: 0.1,
        elevation: -0.12,
        range: 10.0,
        confidence: 0.9,
      },
    ],
    termination: null,
    instruction: "take off, fly to the fountain, then land",
    scene_digest: "d".repeat(64),
    ...overrides,
  };
}
