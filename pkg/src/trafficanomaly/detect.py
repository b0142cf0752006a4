"""Static-object detection on estimated backgrounds.

The baseline differences each short-horizon background against the long-horizon
reference: a newly stalled vehicle is present in the former but not the latter.
Externally produced detections can be ingested from JSON Lines instead.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .background import BackgroundImage, ReferenceBackground
from .errors import DataError
from .media import to_grayscale

VALID_CLASSES = ("vehicle", "traffic_light")


class Label(Enum):
    NORMAL = "N"
    ABNORMAL = "A"


@dataclass(frozen=True)
class LabelSequence:
    """Per-video Normal/Abnormal stream, one label per background period."""

    video_id: str
    labels: tuple[Label, ...]
    period_seconds: float = 3.3

    def __post_init__(self):
        for l in self.labels:
            if not isinstance(l, Label):
                raise ValueError(f"labels must be Label members, got {l!r}")
        if self.period_seconds <= 0:
            raise ValueError("period_seconds must be positive")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Detection:
    video_id: str
    label_index: int
    class_name: str  # "vehicle" or "traffic_light"
    bbox: tuple[int, int, int, int]  # (x, y, w, h), top-left origin
    score: float

    def __post_init__(self):
        if self.class_name not in VALID_CLASSES:
            raise DataError(f"unknown detection class {self.class_name!r}")
        if self.label_index < 0:
            raise DataError("label_index must be non-negative")
        x, y, w, h = self.bbox
        if w < 1 or h < 1 or x < 0 or y < 0:
            raise DataError(f"bad bbox {self.bbox}")
        if not 0.0 <= self.score <= 1.0:
            raise DataError(f"score {self.score} outside [0,1]")


@dataclass(frozen=True)
class DetectorConfig:
    diff_threshold: int = 25
    min_area: int = 64
    max_area: int = 40000
    connectivity: int = 8
    denoise: bool = True

    def __post_init__(self):
        if not 0 < self.diff_threshold <= 255:
            raise ValueError("diff_threshold must be in (0, 255]")
        if not 0 < self.min_area <= self.max_area:
            raise ValueError("need 0 < min_area <= max_area")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


def _majority_denoise(mask: np.ndarray) -> np.ndarray:
    # a pixel stays foreground iff >=5 of its 3x3 neighborhood (edges clamped)
    # are foreground
    counts = ndimage.correlate(
        mask.astype(np.uint8), np.ones((3, 3), dtype=np.uint8), mode="nearest"
    )
    return mask & (counts >= 5)


def detect_static_objects(
    bg: BackgroundImage, ref: ReferenceBackground, cfg: DetectorConfig | None = None
) -> list[Detection]:
    """Threshold |gray(bg) - gray(ref)| and extract blob bounding boxes."""
    cfg = cfg or DetectorConfig()
    bg_img, ref_img = bg.image, ref.image
    if (bg_img.height, bg_img.width) != (ref_img.height, ref_img.width):
        raise DataError(
            f"background {bg_img.width}x{bg_img.height} does not match "
            f"reference {ref_img.width}x{ref_img.height}"
        )
    g_bg = to_grayscale(bg_img).pixels[:, :, 0].astype(np.int16)
    g_ref = to_grayscale(ref_img).pixels[:, :, 0].astype(np.int16)
    diff = np.abs(g_bg - g_ref)
    mask = diff >= cfg.diff_threshold
    if cfg.denoise:
        mask = _majority_denoise(mask)

    structure = (
        np.ones((3, 3), dtype=int)
        if cfg.connectivity == 8
        else ndimage.generate_binary_structure(2, 1)
    )
    labeled, ncomp = ndimage.label(mask, structure=structure)
    detections = []
    for comp_id in range(1, ncomp + 1):
        comp_mask = labeled == comp_id
        area = int(comp_mask.sum())
        if area < cfg.min_area or area > cfg.max_area:
            continue
        ys, xs = np.nonzero(comp_mask)
        x0, x1 = int(xs.min()), int(xs.max())
        y0, y1 = int(ys.min()), int(ys.max())
        score = float(diff[comp_mask].mean() / 255.0)
        detections.append(
            Detection(
                video_id=bg.video_id,
                label_index=bg.label_index,
                class_name="vehicle",
                bbox=(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
                score=min(score, 1.0),
            )
        )
    detections.sort(key=lambda d: (-d.score, d.bbox[1], d.bbox[0]))
    return detections


def load_detections(
    path, frame_size: tuple[int, int] | None = None
) -> list[Detection]:
    """Parse a JSONL detection file; frame_size (w, h) enables bounds checks."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such detections file: {path}")
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            try:
                det = _detection_from_obj(obj)
            except (DataError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if frame_size is not None:
                fw, fh_ = frame_size
                x, y, w, h = det.bbox
                if x + w > fw or y + h > fh_:
                    raise DataError(
                        f"{path}:{lineno}: bbox {det.bbox} outside {fw}x{fh_} frame"
                    )
            out.append(det)
    return out


def _detection_from_obj(obj: dict) -> Detection:
    if not isinstance(obj, dict):
        raise DataError("detection record must be a JSON object")
    unknown = set(obj) - {"video_id", "label_index", "class", "bbox", "score"}
    if unknown:
        raise DataError(f"unknown fields {sorted(unknown)}")
    bbox = obj["bbox"]
    if not (isinstance(bbox, list) and len(bbox) == 4):
        raise DataError(f"bbox must be a 4-element array, got {bbox!r}")
    return Detection(
        video_id=str(obj["video_id"]),
        label_index=int(obj["label_index"]),
        class_name=obj["class"],
        bbox=tuple(int(v) for v in bbox),
        score=float(obj["score"]),
    )


def write_detections(detections: Iterable[Detection], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in detections:
            fh.write(
                json.dumps(
                    {
                        "video_id": d.video_id,
                        "label_index": d.label_index,
                        "class": d.class_name,
                        "bbox": list(d.bbox),
                        "score": d.score,
                    }
                )
                + "\n"
            )


def derive_labels(
    detections: Sequence[Detection], num_labels: int, video_id: str,
    period_seconds: float = 3.3,
) -> LabelSequence:
    """Abnormal iff at least one vehicle detection in that period."""
    if num_labels < 0:
        raise ValueError("num_labels must be non-negative")
    abnormal = set()
    for d in detections:
        if d.video_id != video_id:
            raise DataError(
                f"detection for {d.video_id!r} mixed into video {video_id!r}"
            )
        if d.label_index >= num_labels:
            raise DataError(
                f"label_index {d.label_index} out of range (num_labels {num_labels})"
            )
        if d.class_name == "vehicle":
            abnormal.add(d.label_index)
    labels = tuple(
        Label.ABNORMAL if i in abnormal else Label.NORMAL for i in range(num_labels)
    )
    return LabelSequence(video_id, labels, period_seconds)


LABEL_CSV_HEADER = ["video_id", "label_index", "label"]


def write_label_csv(sequences: Sequence[LabelSequence], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LABEL_CSV_HEADER)
        for seq in sequences:
            for i, lab in enumerate(seq.labels):
                w.writerow([seq.video_id, i, lab.value])


def read_label_csv(path, period_seconds: float = 3.3) -> list[LabelSequence]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such label file: {path}")
    per_video: dict[str, dict[int, Label]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LABEL_CSV_HEADER:
            raise DataError(f"{path}: bad header {header}, expected {LABEL_CSV_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns")
            vid, idx_s, lab_s = row
            try:
                idx = int(idx_s)
                lab = Label(lab_s)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if vid not in per_video:
                per_video[vid] = {}
                order.append(vid)
            if idx in per_video[vid]:
                raise DataError(f"{path}:{lineno}: duplicate label_index {idx} for {vid}")
            per_video[vid][idx] = lab
    out = []
    for vid in order:
        labs = per_video[vid]
        if sorted(labs) != list(range(len(labs))):
            raise DataError(f"{path}: label indices for {vid!r} are not dense from 0")
        out.append(
            LabelSequence(vid, tuple(labs[i] for i in range(len(labs))), period_seconds)
        )
    return out
