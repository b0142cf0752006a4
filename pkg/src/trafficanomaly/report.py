"""Figure rendering for the report paths (trace plots, evaluation summary,
detection overlays).  Uses the Agg backend so it works headless."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.patches as mpatches
import matplotlib.pyplot as plt
import numpy as np

from .background import BackgroundImage, ReferenceBackground
from .detect import Detection, Label
from .metrics import EvalReport
from .smoothing import SmoothingTrace


def _as_binary(labels) -> np.ndarray:
    return np.array([1 if l is Label.ABNORMAL else 0 for l in labels])


def save_trace_figure(trace: SmoothingTrace, path) -> None:
    """Step plot of the input labels and the three smoothing stages."""
    stages = [
        ("input", trace.vid),
        ("step 1 (local majority)", trace.vid1),
        ("step 2 (20-window vote)", trace.vid2),
        ("step 3 (5-window vote)", trace.vid3),
    ]
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(10, 6))
    for ax, (title, seq) in zip(axes, stages):
        y = _as_binary(seq.labels)
        if len(y):
            ax.step(np.arange(len(y)), y, where="post", lw=1.2)
            ax.fill_between(np.arange(len(y)), y, step="post", alpha=0.25)
        ax.set_ylim(-0.1, 1.1)
        ax.set_yticks([0, 1])
        ax.set_yticklabels(["N", "A"])
        ax.set_ylabel(title, rotation=0, ha="right", va="center", fontsize=8)
    axes[-1].set_xlabel("label index")
    fig.suptitle(f"label smoothing trace: {trace.vid.video_id}")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)


def save_eval_figure(report: EvalReport, path) -> None:
    """Score bars plus per-video outcome counts."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

    names = ["precision", "recall", "F1", "1-NRMSE", "S3"]
    values = [
        report.precision,
        report.recall,
        report.f1,
        1.0 - report.nrmse,
        report.s3,
    ]
    bars = ax1.bar(names, values, color="#4878cf")
    ax1.set_ylim(0, 1.05)
    ax1.bar_label(bars, fmt="%.3f", fontsize=8)
    ax1.set_title(f"scores (RMSE = {report.rmse:.2f} s)")

    order = ["TP", "FP", "FN", "FP+FN", "TN"]
    counts = {k: 0 for k in order}
    for o in report.per_video:
        counts[o.outcome] += 1
    ax2.bar(order, [counts[k] for k in order], color="#6acc65")
    ax2.set_title("per-video outcomes")
    ax2.set_ylabel("videos")

    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)


def save_detection_figure(
    bg: BackgroundImage,
    ref: ReferenceBackground,
    detections: list[Detection],
    path,
) -> None:
    """Background, reference and boxed detections side by side."""
    fig, axes = plt.subplots(1, 2, figsize=(12, 4))
    for ax, (title, frame) in zip(
        axes, [("reference", ref.image), (f"background #{bg.label_index}", bg.image)]
    ):
        img = frame.pixels[:, :, 0] if frame.channels == 1 else frame.pixels
        ax.imshow(img, cmap="gray", vmin=0, vmax=255)
        ax.set_title(title)
        ax.axis("off")
    for d in detections:
        x, y, w, h = d.bbox
        axes[1].add_patch(
            mpatches.Rectangle((x - 0.5, y - 0.5), w, h, fill=False, ec="red", lw=1.2)
        )
        axes[1].text(x, max(y - 3, 0), f"{d.score:.2f}", color="red", fontsize=7)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)
