"""Background estimation from recent frame history.

A short-horizon background is computed once per label period from a strided
frame stack (temporal median, run through the patch split/stitch pipeline so
a patch-wise learned estimator can drop in later).  A long-horizon reference
median captures the empty scene for differencing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import DataError
from .media import Frame, VideoSource


@dataclass(frozen=True)
class BackgroundConfig:
    stack_len: int = 20
    stride: int = 5
    period: int = 100
    patch_size: int = 128
    reference_horizon: int = 300

    def __post_init__(self):
        if self.stack_len < 1 or self.stride < 1 or self.period < 1:
            raise ValueError("stack_len, stride and period must be positive")
        if self.patch_size < 1 or self.reference_horizon < 1:
            raise ValueError("patch_size and reference_horizon must be positive")
        if (self.stack_len - 1) * self.stride >= self.period:
            raise ValueError("stack span must fit within one period")


@dataclass(frozen=True)
class FrameStack:
    """stack_len frames sampled at a fixed stride from one video."""

    video_id: str
    start_index: int
    stride: int
    frames: tuple[Frame, ...]

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def source_indices(self) -> tuple[int, ...]:
        return tuple(self.start_index + k * self.stride for k in range(len(self.frames)))


@dataclass(frozen=True)
class PatchGrid:
    patch_size: int
    rows: int
    cols: int
    patches: tuple[tuple[int, int, Frame], ...]  # row-major (row, col, patch)


@dataclass(frozen=True)
class BackgroundImage:
    video_id: str
    label_index: int
    source_span: tuple[int, int]
    image: Frame


@dataclass(frozen=True)
class ReferenceBackground:
    video_id: str
    image: Frame
    horizon: int


def sample_stack(
    video: VideoSource, start_index: int, stride: int = 5, stack_len: int = 20
) -> FrameStack:
    if stack_len < 1 or stride < 1 or start_index < 0:
        raise ValueError("start_index >= 0, stride >= 1, stack_len >= 1 required")
    last = start_index + (stack_len - 1) * stride
    if last >= len(video):
        raise DataError(
            f"stack needs frame {last} but video {video.video_id!r} "
            f"has only {len(video)} frames"
        )
    frames = tuple(video.frame(start_index + k * stride) for k in range(stack_len))
    return FrameStack(video.video_id, start_index, stride, frames)


def split_patches(frame: Frame, patch_size: int = 128) -> PatchGrid:
    if patch_size < 1:
        raise ValueError("patch_size must be positive")
    if frame.height % patch_size or frame.width % patch_size:
        raise DataError(
            f"frame {frame.width}x{frame.height} does not tile into "
            f"{patch_size}x{patch_size} patches"
        )
    rows = frame.height // patch_size
    cols = frame.width // patch_size
    patches = []
    for r in range(rows):
        for c in range(cols):
            sub = frame.pixels[
                r * patch_size : (r + 1) * patch_size,
                c * patch_size : (c + 1) * patch_size,
            ]
            patches.append((r, c, Frame(sub)))
    return PatchGrid(patch_size, rows, cols, tuple(patches))


def stitch_patches(grid: PatchGrid) -> Frame:
    expected = {(r, c) for r in range(grid.rows) for c in range(grid.cols)}
    got = {(r, c) for r, c, _ in grid.patches}
    if got != expected:
        raise DataError(f"incomplete patch grid: missing {sorted(expected - got)}")
    ps = grid.patch_size
    first = grid.patches[0][2]
    out = np.empty((grid.rows * ps, grid.cols * ps, first.channels), dtype=np.uint8)
    for r, c, patch in grid.patches:
        if patch.height != ps or patch.width != ps or patch.channels != first.channels:
            raise DataError(f"inconsistent patch dimensions at ({r},{c})")
        out[r * ps : (r + 1) * ps, c * ps : (c + 1) * ps] = patch.pixels
    return Frame(out)


def _median_lower(arr: np.ndarray) -> np.ndarray:
    """Per-position median over axis 0; even counts take the lower middle."""
    n = arr.shape[0]
    return np.sort(arr, axis=0)[(n - 1) // 2]


def temporal_median(stack: FrameStack) -> Frame:
    if not stack.frames:
        raise DataError("temporal median of an empty stack")
    shape = stack.frames[0].pixels.shape
    for f in stack.frames[1:]:
        if f.pixels.shape != shape:
            raise DataError("stack frames must share one size")
    arr = np.stack([f.pixels for f in stack.frames])
    return Frame(_median_lower(arr))


class BackgroundEstimator(Protocol):
    """Estimates a background frame from a recent-history stack."""

    def estimate(self, stack: FrameStack) -> Frame: ...


class MedianEstimator:
    """Temporal-median estimator, patch-wise when the frame tiles exactly."""

    def __init__(self, patch_size: int = 128):
        self.patch_size = patch_size

    def estimate(self, stack: FrameStack) -> Frame:
        if not stack.frames:
            raise DataError("cannot estimate background from an empty stack")
        first = stack.frames[0]
        ps = self.patch_size
        if first.height % ps or first.width % ps:
            return temporal_median(stack)
        grids = [split_patches(f, ps) for f in stack.frames]
        out_patches = []
        for k, (r, c, _) in enumerate(grids[0].patches):
            cell = np.stack([g.patches[k][2].pixels for g in grids])
            out_patches.append((r, c, Frame(_median_lower(cell))))
        return stitch_patches(
            PatchGrid(ps, grids[0].rows, grids[0].cols, tuple(out_patches))
        )


def estimate_backgrounds(
    video: VideoSource,
    cfg: BackgroundConfig | None = None,
    estimator: BackgroundEstimator | None = None,
) -> list[BackgroundImage]:
    """One background per non-overlapping period; trailing frames are dropped."""
    cfg = cfg or BackgroundConfig()
    if estimator is None:
        estimator = MedianEstimator(cfg.patch_size)
    n = len(video) // cfg.period
    if n == 0:
        raise DataError(
            f"video {video.video_id!r} has {len(video)} frames, "
            f"shorter than one period of {cfg.period}"
        )
    span = (cfg.stack_len - 1) * cfg.stride
    out = []
    for i in range(n):
        start = i * cfg.period
        stack = sample_stack(video, start, cfg.stride, cfg.stack_len)
        out.append(
            BackgroundImage(
                video_id=video.video_id,
                label_index=i,
                source_span=(start, start + span),
                image=estimator.estimate(stack),
            )
        )
    return out


def reference_background(video: VideoSource, horizon: int = 300) -> ReferenceBackground:
    """Temporal median over the first `horizon` frames, stride 1."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if len(video) < horizon:
        raise DataError(
            f"video {video.video_id!r} has {len(video)} frames, "
            f"shorter than reference horizon {horizon}"
        )
    arr = np.stack([video.frame(i).pixels for i in range(horizon)])
    return ReferenceBackground(video.video_id, Frame(_median_lower(arr)), horizon)
