"""Synthetic scenario generation: seeded noisy label streams and stop-event
videos with known ground truth, used to exercise every pipeline stage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .detect import Label, LabelSequence
from .errors import DataError
from .media import Frame, VideoSource, write_frame


@dataclass(frozen=True)
class LabelScenario:
    length: int
    anomaly_intervals: tuple[tuple[int, int], ...] = ()  # half-open, sorted
    flip_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if not 0.0 <= self.flip_prob < 1.0:
            raise ValueError("flip_prob must be in [0,1)")
        prev_end = 0
        for start, end in self.anomaly_intervals:
            if not (0 <= start < end <= self.length):
                raise DataError(f"interval ({start},{end}) outside [0,{self.length})")
            if start < prev_end:
                raise DataError("anomaly intervals must be sorted and non-overlapping")
            prev_end = end


@dataclass(frozen=True)
class ActorSpec:
    """A flat-intensity rectangle translating at constant velocity, wrapping
    at frame edges, invisible before appear_frame."""

    actor_id: str
    x: int
    y: int
    width: int
    height: int
    vx: float
    vy: float
    intensity: int
    appear_frame: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("actor size must be positive")
        if not 0 <= self.intensity <= 255:
            raise ValueError("intensity must be a uint8 value")


@dataclass(frozen=True)
class VideoScenario:
    video_id: str = "synthetic"
    width: int = 768
    height: int = 384
    fps: float = 30.0
    duration_frames: int = 300
    background_value: int = 90
    texture_amplitude: int = 0  # static per-pixel noise added from the seed
    actors: tuple[ActorSpec, ...] = ()
    stop_events: tuple[tuple[str, int], ...] = ()  # (actor_id, stop_frame)
    jitter_px: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.duration_frames < 1:
            raise ValueError("scenario dimensions must be positive")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if not 0 <= self.background_value <= 255:
            raise ValueError("background_value must be a uint8 value")
        if self.jitter_px < 0:
            raise ValueError("jitter_px must be non-negative")
        ids = {a.actor_id for a in self.actors}
        if len(ids) != len(self.actors):
            raise DataError("actor ids must be unique")
        for actor_id, stop_frame in self.stop_events:
            if actor_id not in ids:
                raise DataError(f"stop event for unknown actor {actor_id!r}")
            if not 0 <= stop_frame < self.duration_frames:
                raise DataError(f"stop_frame {stop_frame} outside video")


def gen_label_stream(
    scenario: LabelScenario, video_id: str = "synthetic"
) -> tuple[LabelSequence, LabelSequence]:
    """Returns (noisy, clean); clean depends only on the intervals."""
    clean_arr = np.zeros(scenario.length, dtype=bool)
    for start, end in scenario.anomaly_intervals:
        clean_arr[start:end] = True
    rng = np.random.default_rng(scenario.seed)
    flips = rng.random(scenario.length) < scenario.flip_prob
    noisy_arr = clean_arr ^ flips
    to_seq = lambda arr: LabelSequence(
        video_id,
        tuple(Label.ABNORMAL if v else Label.NORMAL for v in arr.tolist()),
    )
    return to_seq(noisy_arr), to_seq(clean_arr)


def _stop_frame_of(scenario: VideoScenario, actor_id: str) -> int | None:
    for aid, frame in scenario.stop_events:
        if aid == actor_id:
            return frame
    return None


def _base_background(scenario: VideoScenario) -> np.ndarray:
    base = np.full((scenario.height, scenario.width), scenario.background_value, np.int16)
    if scenario.texture_amplitude > 0:
        rng = np.random.default_rng(scenario.seed ^ 0x7E57)
        amp = scenario.texture_amplitude
        base += rng.integers(-amp, amp + 1, size=base.shape, dtype=np.int16)
    return np.clip(base, 0, 255).astype(np.uint8)


def render_frame(scenario: VideoScenario, t: int, base: np.ndarray | None = None,
                 jitter: tuple[int, int] = (0, 0)) -> Frame:
    if base is None:
        base = _base_background(scenario)
    img = base.copy()
    for actor in scenario.actors:
        if t < actor.appear_frame:
            continue
        stop = _stop_frame_of(scenario, actor.actor_id)
        te = t if stop is None else min(t, stop)
        px = int(round(actor.x + actor.vx * te)) % scenario.width
        py = int(round(actor.y + actor.vy * te)) % scenario.height
        xs = np.arange(px, px + actor.width) % scenario.width
        ys = np.arange(py, py + actor.height) % scenario.height
        img[np.ix_(ys, xs)] = actor.intensity
    dx, dy = jitter
    if dx or dy:
        rows = np.clip(np.arange(scenario.height) - dy, 0, scenario.height - 1)
        cols = np.clip(np.arange(scenario.width) - dx, 0, scenario.width - 1)
        img = img[rows][:, cols]
    return Frame(img[:, :, None])


def render_video(scenario: VideoScenario) -> VideoSource:
    """In-memory rendering; same pixels as gen_video writes to disk."""
    base = _base_background(scenario)
    rng = np.random.default_rng(scenario.seed)
    frames = []
    for t in range(scenario.duration_frames):
        jitter = (0, 0)
        if scenario.jitter_px > 0:
            j = scenario.jitter_px
            jitter = (int(rng.integers(-j, j + 1)), int(rng.integers(-j, j + 1)))
        frames.append(render_frame(scenario, t, base, jitter))
    return VideoSource(scenario.video_id, scenario.fps, frames)


def build_manifest(scenario: VideoScenario) -> dict:
    return {
        "video_id": scenario.video_id,
        "fps": scenario.fps,
        "duration_frames": scenario.duration_frames,
        "actors": [
            {
                "actor_id": a.actor_id,
                "stop_frame": _stop_frame_of(scenario, a.actor_id),
                "stop_seconds": (
                    None
                    if _stop_frame_of(scenario, a.actor_id) is None
                    else _stop_frame_of(scenario, a.actor_id) / scenario.fps
                ),
            }
            for a in scenario.actors
        ],
    }


def gen_video(scenario: VideoScenario, out_dir, frame_pattern: str = "f_%06d.pgm") -> dict:
    """Write grayscale PGM frames plus a manifest.json (written last)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = _base_background(scenario)
    rng = np.random.default_rng(scenario.seed)
    for t in range(scenario.duration_frames):
        jitter = (0, 0)
        if scenario.jitter_px > 0:
            j = scenario.jitter_px
            jitter = (int(rng.integers(-j, j + 1)), int(rng.integers(-j, j + 1)))
        frame = render_frame(scenario, t, base, jitter)
        write_frame(frame, out_dir / (frame_pattern % t))
    manifest = build_manifest(scenario)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return manifest


def gen_noise_patch_scenario(
    scenario: VideoScenario,
    num_patches: int = 3,
    patch_width: int = 7,
    patch_height: int = 7,
    appear_frame: int = 300,
) -> VideoScenario:
    """Augment a scenario with small static high-contrast rectangles.

    The patches surface after the reference-background horizon so the
    differencing stage can see them; with the default sub-min_area size they
    must be suppressed, larger sizes reproduce the known false-positive mode.
    """
    if num_patches == 0:
        return scenario
    rng = np.random.default_rng(scenario.seed ^ 0xA5A5)
    contrast = 120 if scenario.background_value < 128 else -120
    intensity = int(np.clip(scenario.background_value + contrast, 0, 255))
    patches = tuple(
        ActorSpec(
            actor_id=f"noise_{k}",
            x=int(rng.integers(0, max(1, scenario.width - patch_width))),
            y=int(rng.integers(0, max(1, scenario.height - patch_height))),
            width=patch_width,
            height=patch_height,
            vx=0.0,
            vy=0.0,
            intensity=intensity,
            appear_frame=appear_frame,
        )
        for k in range(num_patches)
    )
    return replace(scenario, actors=scenario.actors + patches)


# ---------------------------------------------------------------------------
# scenario JSON


def video_scenario_to_dict(s: VideoScenario) -> dict:
    return {
        "video_id": s.video_id,
        "width": s.width,
        "height": s.height,
        "fps": s.fps,
        "duration_frames": s.duration_frames,
        "background_value": s.background_value,
        "texture_amplitude": s.texture_amplitude,
        "actors": [
            {
                "actor_id": a.actor_id,
                "x": a.x,
                "y": a.y,
                "width": a.width,
                "height": a.height,
                "vx": a.vx,
                "vy": a.vy,
                "intensity": a.intensity,
                "appear_frame": a.appear_frame,
            }
            for a in s.actors
        ],
        "stop_events": [list(e) for e in s.stop_events],
        "jitter_px": s.jitter_px,
        "seed": s.seed,
    }


def video_scenario_from_dict(obj: dict) -> VideoScenario:
    known = set(video_scenario_to_dict(VideoScenario()))
    unknown = set(obj) - known
    if unknown:
        raise DataError(f"unknown video scenario keys {sorted(unknown)}")
    try:
        actors = tuple(
            ActorSpec(
                actor_id=str(a["actor_id"]),
                x=int(a["x"]),
                y=int(a["y"]),
                width=int(a["width"]),
                height=int(a["height"]),
                vx=float(a.get("vx", 0.0)),
                vy=float(a.get("vy", 0.0)),
                intensity=int(a["intensity"]),
                appear_frame=int(a.get("appear_frame", 0)),
            )
            for a in obj.get("actors", [])
        )
        return VideoScenario(
            video_id=str(obj.get("video_id", "synthetic")),
            width=int(obj.get("width", 768)),
            height=int(obj.get("height", 384)),
            fps=float(obj.get("fps", 30.0)),
            duration_frames=int(obj["duration_frames"]),
            background_value=int(obj.get("background_value", 90)),
            texture_amplitude=int(obj.get("texture_amplitude", 0)),
            actors=actors,
            stop_events=tuple(
                (str(aid), int(f)) for aid, f in obj.get("stop_events", [])
            ),
            jitter_px=int(obj.get("jitter_px", 0)),
            seed=int(obj.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad video scenario: {exc}") from exc


def label_scenario_to_dict(s: LabelScenario) -> dict:
    return {
        "length": s.length,
        "anomaly_intervals": [list(iv) for iv in s.anomaly_intervals],
        "flip_prob": s.flip_prob,
        "seed": s.seed,
    }


def label_scenario_from_dict(obj: dict) -> LabelScenario:
    unknown = set(obj) - {"length", "anomaly_intervals", "flip_prob", "seed"}
    if unknown:
        raise DataError(f"unknown label scenario keys {sorted(unknown)}")
    try:
        return LabelScenario(
            length=int(obj["length"]),
            anomaly_intervals=tuple(
                (int(a), int(b)) for a, b in obj.get("anomaly_intervals", [])
            ),
            flip_prob=float(obj.get("flip_prob", 0.0)),
            seed=int(obj.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad label scenario: {exc}") from exc


def load_scenario_file(path) -> LabelScenario | VideoScenario:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such scenario file: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise DataError(f"{path}: scenario must be a JSON object")
    if "duration_frames" in obj or "actors" in obj:
        return video_scenario_from_dict(obj)
    return label_scenario_from_dict(obj)
