"""Frame data model and binary PGM/PPM sequence I/O.

Only uncompressed P5/P6 with maxval 255 are supported; video files must be
pre-extracted to numbered frame images.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError

# ITU-R BT.601 luma weights
_GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])

DEFAULT_FRAME_PATTERN = "f_%06d.pgm"
DEFAULT_FPS = 30.0


@dataclass(frozen=True, eq=False)
class Frame:
    """Immutable uint8 raster, stored as a (height, width, channels) array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(f"frame must be HxWx1 or HxWx3, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame dimensions must be positive")
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels
        )


def to_grayscale(frame: Frame) -> Frame:
    """BT.601 luma conversion with round-half-up; grayscale passes through."""
    if frame.channels == 1:
        return frame
    if frame.channels != 3:
        raise ValueError(f"unsupported channel count {frame.channels}")
    y = frame.pixels.astype(np.float64) @ _GRAY_WEIGHTS
    y = np.floor(y + 0.5)
    return Frame(np.clip(y, 0, 255).astype(np.uint8)[:, :, None])


def _parse_pnm(data: bytes, path) -> np.ndarray:
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise DataError(f"{path}: not a binary PGM/PPM file (magic {magic!r})")

    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise DataError(f"{path}: malformed header")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise DataError(f"{path}: malformed header")
    pos += 1  # single whitespace separates header from raster

    width, height, maxval = fields
    if maxval != 255:
        raise DataError(f"{path}: only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise DataError(f"{path}: bad dimensions {width}x{height}")
    need = width * height * channels
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise DataError(f"{path}: truncated raster ({len(raster)} of {need} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)


def _read_pnm_header(path: Path) -> tuple[int, int, int]:
    """Return (width, height, channels) without decoding the raster."""
    with open(path, "rb") as fh:
        head = fh.read(256)
    magic = head[:2]
    if magic not in (b"P5", b"P6"):
        raise DataError(f"{path}: not a binary PGM/PPM file (magic {magic!r})")
    channels = 1 if magic == b"P5" else 3
    tokens = re.findall(rb"\d+", re.sub(rb"#[^\n]*", b"", head[2:]))
    if len(tokens) < 3:
        raise DataError(f"{path}: malformed header")
    return int(tokens[0]), int(tokens[1]), channels


def load_frame(path) -> Frame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such frame file: {path}")
    return Frame(_parse_pnm(path.read_bytes(), path))


def write_frame(frame: Frame, path) -> None:
    """Write binary PGM (1 channel) or PPM (3 channels)."""
    path = Path(path)
    magic = b"P5" if frame.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (frame.width, frame.height)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(frame.pixels.tobytes())


class _LazyFrameList(Sequence):
    """Loads frames from disk on access; headers are validated up front."""

    def __init__(self, paths: list[Path]):
        self._paths = paths

    def __len__(self) -> int:
        return len(self._paths)

    def __getitem__(self, i) -> Frame:
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return load_frame(self._paths[i])


@dataclass(frozen=True)
class VideoSource:
    """An ordered, uniformly sized frame sequence."""

    video_id: str
    frame_rate: float = DEFAULT_FPS
    frames: Sequence[Frame] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)

    def frame(self, i: int) -> Frame:
        return self.frames[i]

    def __iter__(self) -> Iterator[Frame]:
        for i in range(len(self)):
            yield self.frames[i]


def _pattern_to_regex(pattern: str) -> re.Pattern:
    m = re.fullmatch(r"(.*)%(0?)(\d*)d(.*)", pattern)
    if m is None:
        raise DataError(f"frame pattern must contain one %d placeholder: {pattern!r}")
    pre, zero, width, post = m.groups()
    digits = r"\d{%s}" % width if (zero and width) else r"\d+"
    return re.compile(re.escape(pre) + "(" + digits + ")" + re.escape(post))


def load_frame_sequence(
    directory_path,
    pattern: str = DEFAULT_FRAME_PATTERN,
    frame_rate: float = DEFAULT_FPS,
    video_id: str | None = None,
) -> VideoSource:
    """Load a numbered PGM/PPM directory as a VideoSource (frames decode lazily).

    Frame indices must be dense from 0 and all frames must share one size.
    """
    directory = Path(directory_path)
    if not directory.is_dir():
        raise DataError(f"no such frames directory: {directory}")
    rx = _pattern_to_regex(pattern)

    indexed: dict[int, Path] = {}
    for entry in directory.iterdir():
        m = rx.fullmatch(entry.name)
        if m is None:
            continue
        idx = int(m.group(1))
        if idx in indexed:
            raise DataError(f"duplicate frame index {idx} in {directory}")
        indexed[idx] = entry
    if not indexed:
        raise DataError(f"no frames matching {pattern!r} in {directory}")

    indices = sorted(indexed)
    if indices[0] != 0 or indices[-1] != len(indices) - 1:
        missing = sorted(set(range(indices[-1] + 1)) - set(indices))
        raise DataError(
            f"frame indices in {directory} are not dense from 0 "
            f"(first missing: {missing[0] if missing else indices[0]})"
        )

    paths = [indexed[i] for i in indices]
    first = _read_pnm_header(paths[0])
    for p in paths[1:]:
        dims = _read_pnm_header(p)
        if dims != first:
            raise DataError(
                f"mixed frame dimensions: {paths[0].name} is {first}, {p.name} is {dims}"
            )

    return VideoSource(
        video_id=video_id if video_id is not None else directory.name,
        frame_rate=frame_rate,
        frames=_LazyFrameList(paths),
    )
