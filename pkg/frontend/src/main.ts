// Console wiring: one session at a time, state driven purely by streamed
// frames. User commands are fire-and-forget; chips and the checklist update
// only when the next frame arrives.

import { ServiceClient, ServiceError, parseLogSummary } from "./protocol.js";
import {
  MapRenderer,
  drawAltitudeGauge,
  renderBanner,
  renderChecklist,
} from "./render.js";
import type { LogSummary, SceneDoc, StateFrame } from "./types.js";
import { buildViewModel } from "./viewmodel.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const params = new URLSearchParams(window.location.search);
const serviceUrl = params.get("service") ?? "http://127.0.0.1:8008";
const client = new ServiceClient(serviceUrl);

const mapCanvas = el<HTMLCanvasElement>("map");
const gaugeCanvas = el<HTMLCanvasElement>("gauge");
const checklist = el<HTMLUListElement>("checklist");
const banner = el<HTMLElement>("banner");
const statusChip = el<HTMLElement>("status-chip");
const inlineError = el<HTMLElement>("inline-error");
const instructionInput = el<HTMLInputElement>("instruction");
const historyList = el<HTMLUListElement>("history");

const renderer = new MapRenderer(mapCanvas);

let scene: SceneDoc | null = null;
let sessionId: string | null = null;
let lastFrame: StateFrame | null = null;
let lastFrameAt: number | null = null;
let logSummary: LogSummary | null = null;
let logFetchPending = false;
let stopStream: (() => void) | null = null;

function redraw(): void {
  if (!scene) return;
  const vm = buildViewModel(scene, lastFrame, Date.now(), lastFrameAt,
    logSummary);
  renderer.draw(vm);
  drawAltitudeGauge(gaugeCanvas, vm.altitude, vm.maxAltitude);
  renderChecklist(checklist, vm);
  renderBanner(banner, vm);
  statusChip.textContent = vm.statusChip;
  statusChip.dataset.status = vm.statusChip;
  instructionInput.disabled =
    vm.status === "running" || vm.status === "paused";
}

function onFrame(frame: StateFrame): void {
  lastFrame = frame;
  lastFrameAt = Date.now();
  if (frame.status === "finished" && frame.outcome === "success" &&
      !logSummary && !logFetchPending && sessionId) {
    logFetchPending = true;
    client
      .fetchLog(sessionId)
      .then((text) => {
        logSummary = parseLogSummary(text);
        redraw();
      })
      .catch(() => undefined)
      .finally(() => {
        logFetchPending = false;
      });
  }
  redraw();
}

function connectStream(): void {
  if (!sessionId) return;
  stopStream?.();
  stopStream = client.streamStates(sessionId, onFrame, () => {
    toast("stream disconnected; retry by reloading");
  });
}

// Degraded-connection watchdog: re-render on a timer so the stall banner
// appears even without fresh frames.
window.setInterval(redraw, 500);

function toast(text: string): void {
  const node = el<HTMLElement>("toast");
  node.textContent = text;
  node.style.display = "block";
  window.setTimeout(() => {
    node.style.display = "none";
  }, 2500);
}

async function createSession(): Promise<void> {
  const archetype = el<HTMLSelectElement>("archetype").value;
  const seed = Number(el<HTMLInputElement>("scene-seed").value || "0");
  const profile = el<HTMLSelectElement>("profile").value;
  try {
    const created = await client.createSession(archetype, seed, profile);
    sessionId = created.session_id;
    scene = created.scene;
    lastFrame = null;
    lastFrameAt = null;
    logSummary = null;
    renderer.resetTrail();
    window.location.hash = created.session_id;
    el<HTMLElement>("session-label").textContent =
      `${created.scene.name} (${created.session_id.slice(0, 8)})`;
    inlineError.textContent = "";
    connectStream();
    redraw();
  } catch (error) {
    toast(error instanceof Error ? error.message : String(error));
  }
}

async function reconnect(id: string): Promise<void> {
  try {
    const response = await fetch(
      `${serviceUrl.replace(/\/$/, "")}/sessions/${id}/scene`,
    );
    if (!response.ok) return;
    scene = (await response.json()) as SceneDoc;
    sessionId = id;
    renderer.resetTrail();
    el<HTMLElement>("session-label").textContent = `${scene.name} (resumed)`;
    connectStream();
  } catch {
    // stale hash; ignore and let the operator create a fresh session
  }
}

async function submitInstruction(): Promise<void> {
  if (!sessionId) {
    toast("create a session first");
    return;
  }
  const text = instructionInput.value.trim();
  if (!text) return;
  inlineError.textContent = "";
  try {
    await client.submitInstruction(sessionId, text);
    logSummary = null;
    renderer.resetTrail();
    const item = document.createElement("li");
    item.textContent = text;
    item.addEventListener("click", () => {
      instructionInput.value = text;
    });
    historyList.prepend(item);
    instructionInput.value = "";
  } catch (error) {
    if (error instanceof ServiceError && error.detail) {
      inlineError.textContent = error.detail.clause
        ? `cannot parse: "${error.detail.clause}"`
        : error.detail.message ?? error.detail.error;
    } else if (error instanceof ServiceError && error.status === 409) {
      toast(error.message);
    } else {
      toast(error instanceof Error ? error.message : String(error));
    }
  }
}

function control(command: "pause" | "resume" | "step" | "abort" | "reset") {
  return async () => {
    if (!sessionId) return;
    try {
      await client.control(sessionId, command);
      if (command === "reset") {
        logSummary = null;
        renderer.resetTrail();
      }
    } catch (error) {
      if (error instanceof ServiceError && error.status === 409) {
        toast(`cannot ${command} now`);
      } else {
        toast(error instanceof Error ? error.message : String(error));
      }
    }
  };
}

el<HTMLButtonElement>("create").addEventListener("click", () => {
  void createSession();
});
el<HTMLButtonElement>("send").addEventListener("click", () => {
  void submitInstruction();
});
instructionInput.addEventListener("keydown", (event) => {
  if (event.key === "Enter") void submitInstruction();
});
el<HTMLButtonElement>("pause").addEventListener("click", control("pause"));
el<HTMLButtonElement>("resume").addEventListener("click", control("resume"));
el<HTMLButtonElement>("step").addEventListener("click", control("step"));
el<HTMLButtonElement>("abort").addEventListener("click", control("abort"));
el<HTMLButtonElement>("reset").addEventListener("click", control("reset"));

const existing = window.location.hash.replace(/^#/, "");
if (existing) void reconnect(existing);
