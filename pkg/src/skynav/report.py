"""Matplotlib figures rendered alongside the delimited result files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import AblationResult, SuiteResult
from .executive import EpisodeLog
from .world import Scene

_OBSTACLE_COLOR = "#9aa3ab"
_OBJECT_COLOR = "#4d8dc4"


def save_suite_figure(result: SuiteResult, path: str) -> None:
    """Grouped SR/SPL bars per scene."""
    scenes = [s.scene for s in result.per_scene]
    sr = [s.sr for s in result.per_scene]
    spl_values = [s.spl for s in result.per_scene]
    x = np.arange(len(scenes))
    fig, ax = plt.subplots(figsize=(1.8 * max(4, len(scenes)), 4))
    ax.bar(x - 0.2, sr, width=0.4, label="SR", color="#2a6f97")
    ax.bar(x + 0.2, spl_values, width=0.4, label="SPL", color="#e0912f")
    ax.set_xticks(x, scenes, rotation=15)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("Success rate and SPL per scene")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ablation_figure(result: AblationResult, path: str) -> None:
    """Heatmap of success rate per (design choice, scene)."""
    data = np.array(result.sr)
    fig, ax = plt.subplots(
        figsize=(1.6 * max(4, len(result.scenes)), 0.6 * len(result.rows) + 2))
    im = ax.imshow(data, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(result.scenes)), result.scenes, rotation=15)
    ax.set_yticks(range(len(result.rows)), [r.name for r in result.rows])
    for i in range(data.shape[0]):
        for j in range(data.shape[1]):
            ax.text(j, i, f"{data[i, j] * 100:.0f}%", ha="center", va="center",
                    color="white" if data[i, j] < 0.6 else "black", fontsize=9)
    fig.colorbar(im, ax=ax, label="SR")
    ax.set_title("Success rate by design choice")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trajectory_figure(log: EpisodeLog, scene: Scene, path: str) -> None:
    """Top-down flight path over the scene footprint, plus altitude trace."""
    fig, (ax, axz) = plt.subplots(
        1, 2, figsize=(11, 5), gridspec_kw={"width_ratios": [3, 1]})
    for obj in scene.objects:
        box = obj.aabb
        face = _OBSTACLE_COLOR if obj.is_obstacle else _OBJECT_COLOR
        ax.add_patch(plt.Rectangle(
            (box.min.x, box.min.y), box.max.x - box.min.x,
            box.max.y - box.min.y, facecolor=face, edgecolor="#555",
            alpha=0.7, linewidth=0.5))
        ax.annotate(obj.label, box.center.as_tuple()[:2], fontsize=6,
                    ha="center", va="center")
    xs = [log.start_pose.position.x] + [r.pose.position.x for r in log.records]
    ys = [log.start_pose.position.y] + [r.pose.position.y for r in log.records]
    zs = [log.start_pose.position.z] + [r.pose.position.z for r in log.records]
    ax.plot(xs, ys, "-", color="#c1272d", linewidth=1.5)
    ax.plot(xs[0], ys[0], "o", color="#2a9d0f", markersize=8, label="start")
    ax.plot(xs[-1], ys[-1], "X", color="#c1272d", markersize=10, label="end")
    b = scene.bounds
    ax.set_xlim(b.min.x - 1, b.max.x + 1)
    ax.set_ylim(b.min.y - 1, b.max.y + 1)
    ax.set_aspect("equal")
    ax.set_title(f"{scene.name}: {log.outcome}"
                 + (f" ({log.reason})" if log.reason else ""))
    ax.legend(loc="upper right", fontsize=8)
    axz.plot(range(len(zs)), zs, color="#2a6f97")
    axz.set_xlabel("step")
    axz.set_ylabel("altitude [m]")
    axz.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
