// Canvas and DOM rendering of a ViewModel. Draw-only: no state lives here.

import type { ViewModel } from "./viewmodel.js";

const OBSTACLE_FILL = "#8f98a3";
const OBJECT_FILL = "#79a8d0";
const PATH_COLOR = "#c1272d";

export class MapRenderer {
  private readonly ctx: CanvasRenderingContext2D;
  private trail: Array<{ x: number; y: number }> = [];

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2D canvas context unavailable");
    this.ctx = ctx;
  }

  resetTrail(): void {
    this.trail = [];
  }

  draw(vm: ViewModel): void {
    const { ctx, canvas } = this;
    const { x0, y0, x1, y1 } = vm.mapBounds;
    const pad = 14;
    const scale = Math.min(
      (canvas.width - 2 * pad) / (x1 - x0),
      (canvas.height - 2 * pad) / (y1 - y0),
    );
    const sx = (x: number) => pad + (x - x0) * scale;
    // Flip y so +y points up on screen.
    const sy = (y: number) => canvas.height - pad - (y - y0) * scale;

    ctx.fillStyle = "#f4f6f8";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = "#4a4a4a";
    ctx.strokeRect(sx(x0), sy(y1), (x1 - x0) * scale, (y1 - y0) * scale);

    for (const fp of vm.footprints) {
      ctx.fillStyle = fp.obstacle ? OBSTACLE_FILL : OBJECT_FILL;
      ctx.globalAlpha = 0.8;
      ctx.fillRect(
        sx(fp.x0),
        sy(fp.y1),
        (fp.x1 - fp.x0) * scale,
        (fp.y1 - fp.y0) * scale,
      );
      ctx.globalAlpha = 1.0;
      if (fp.color) {
        ctx.strokeStyle = fp.color;
        ctx.lineWidth = 2;
        ctx.strokeRect(
          sx(fp.x0),
          sy(fp.y1),
          (fp.x1 - fp.x0) * scale,
          (fp.y1 - fp.y0) * scale,
        );
        ctx.lineWidth = 1;
      }
      ctx.fillStyle = "#222";
      ctx.font = "9px sans-serif";
      ctx.fillText(
        fp.label,
        sx((fp.x0 + fp.x1) / 2) - 3 * fp.label.length,
        sy((fp.y0 + fp.y1) / 2) + 3,
      );
    }

    for (const ray of vm.detectionRays) {
      ctx.strokeStyle = "rgba(46, 139, 87, 0.8)";
      ctx.beginPath();
      ctx.moveTo(sx(ray.x0), sy(ray.y0));
      ctx.lineTo(sx(ray.x1), sy(ray.y1));
      ctx.stroke();
      ctx.fillStyle = "rgba(46, 139, 87, 0.9)";
      ctx.beginPath();
      ctx.arc(sx(ray.x1), sy(ray.y1), 3, 0, 2 * Math.PI);
      ctx.fill();
    }

    if (vm.drone) {
      this.trail.push({ x: vm.drone.x, y: vm.drone.y });
      if (this.trail.length > 2000) this.trail.shift();
      ctx.strokeStyle = PATH_COLOR;
      ctx.beginPath();
      this.trail.forEach((p, i) => {
        if (i === 0) ctx.moveTo(sx(p.x), sy(p.y));
        else ctx.lineTo(sx(p.x), sy(p.y));
      });
      ctx.stroke();

      const { x, y, heading } = vm.drone;
      ctx.fillStyle = PATH_COLOR;
      ctx.beginPath();
      ctx.arc(sx(x), sy(y), 6, 0, 2 * Math.PI);
      ctx.fill();
      ctx.strokeStyle = "#fff";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(sx(x), sy(y));
      ctx.lineTo(
        sx(x + 1.2 * Math.cos(heading)),
        sy(y + 1.2 * Math.sin(heading)),
      );
      ctx.stroke();
      ctx.lineWidth = 1;
    }
  }
}

export function drawAltitudeGauge(
  canvas: HTMLCanvasElement,
  altitude: number,
  maxAltitude: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pad = 12;
  const h = canvas.height - 2 * pad;
  ctx.strokeStyle = "#4a4a4a";
  ctx.strokeRect(pad, pad, 24, h);
  const frac = Math.max(0, Math.min(1, altitude / Math.max(maxAltitude, 1)));
  ctx.fillStyle = "#2a6f97";
  ctx.fillRect(pad + 1, pad + h * (1 - frac), 22, h * frac);
  ctx.fillStyle = "#222";
  ctx.font = "11px sans-serif";
  ctx.fillText(`${altitude.toFixed(1)} m`, pad - 2, pad + h + 14);
}

export function renderChecklist(list: HTMLUListElement, vm: ViewModel): void {
  list.innerHTML = "";
  for (const item of vm.checklist) {
    const li = document.createElement("li");
    li.textContent = `${item.done ? "[x]" : "[ ]"} ${item.text}`;
    li.className = item.done ? "done" : item.active ? "active" : "pending";
    list.appendChild(li);
  }
}

export function renderBanner(el: HTMLElement, vm: ViewModel): void {
  el.textContent = vm.banner.text;
  el.dataset.kind = vm.banner.kind;
  el.style.display = vm.banner.kind === "none" ? "none" : "block";
}
