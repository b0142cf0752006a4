import numpy as np
import pytest

from trafficanomaly.background import (
    BackgroundConfig,
    FrameStack,
    MedianEstimator,
    estimate_backgrounds,
    reference_background,
    sample_stack,
    split_patches,
    stitch_patches,
    temporal_median,
)
from trafficanomaly.errors import DataError
from trafficanomaly.media import Frame, VideoSource

from conftest import random_frame


def _video(frames, video_id="v"):
    return VideoSource(video_id, 30.0, frames)


def _const_frame(value, height=4, width=4):
    return Frame(np.full((height, width, 1), value, dtype=np.uint8))


def test_sample_stack_strided_indices():
    video = _video([_const_frame(i % 256) for i in range(300)])
    stack = sample_stack(video, 0, stride=5, stack_len=20)
    assert stack.source_indices == tuple(range(0, 100, 5))
    assert [f.pixels[0, 0, 0] for f in stack.frames] == list(range(0, 100, 5))


def test_sample_stack_degenerate_and_bounds():
    video = _video([_const_frame(7)] * 300)
    single = sample_stack(video, 10, stride=1, stack_len=1)
    assert len(single) == 1 and single.start_index == 10
    with pytest.raises(DataError):
        sample_stack(video, 250, stride=5, stack_len=20)  # needs index 345


def test_split_384x768_gives_18_patches(rng):
    f = random_frame(rng, 384, 768, 3)
    grid = split_patches(f, 128)
    assert (grid.rows, grid.cols) == (3, 6)
    assert len(grid.patches) == 18


def test_split_identity_and_divisibility(rng):
    f = random_frame(rng, 128, 128)
    grid = split_patches(f, 128)
    assert len(grid.patches) == 1 and grid.patches[0][2] == f
    with pytest.raises(DataError):
        split_patches(random_frame(rng, 384, 768), 100)


def test_stitch_roundtrip(rng):
    for channels in (1, 3):
        f = random_frame(rng, 384, 768, channels)
        assert stitch_patches(split_patches(f, 128)) == f


def test_stitch_missing_patch(rng):
    grid = split_patches(random_frame(rng, 384, 768), 128)
    broken = type(grid)(grid.patch_size, grid.rows, grid.cols, grid.patches[:-1])
    with pytest.raises(DataError):
        stitch_patches(broken)


def test_stitch_ordinal_patches():
    ps = 4
    patches = tuple(
        (r, c, _const_frame(r * 6 + c, ps, ps)) for r in range(3) for c in range(6)
    )
    from trafficanomaly.background import PatchGrid

    f = stitch_patches(PatchGrid(ps, 3, 6, patches))
    for y in range(f.height):
        for x in range(f.width):
            assert f.pixels[y, x, 0] == (y // ps) * 6 + (x // ps)


def test_median_of_constant_stack():
    f = _const_frame(42)
    stack = FrameStack("v", 0, 1, (f,) * 20)
    assert temporal_median(stack) == f


def test_median_lower_middle_of_1_to_20():
    frames = tuple(_const_frame(i, 1, 1) for i in range(1, 21))
    stack = FrameStack("v", 0, 1, frames)
    assert temporal_median(stack).pixels[0, 0, 0] == 10


def test_median_rejects_moving_blob():
    # blob visits a distinct pixel each frame: per pixel at most one outlier
    frames = []
    for i in range(20):
        px = np.full((4, 5, 1), 100, dtype=np.uint8)
        px[i % 4, i % 5, 0] = 50
        frames.append(Frame(px))
    out = temporal_median(FrameStack("v", 0, 1, tuple(frames)))
    assert (out.pixels == 100).all()


def test_median_matches_sort_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(1, 26))
        h, w = int(rng.integers(1, 17)), int(rng.integers(1, 17))
        frames = tuple(random_frame(rng, h, w) for _ in range(n))
        out = temporal_median(FrameStack("v", 0, 1, frames))
        arr = np.stack([f.pixels for f in frames])
        expect = np.sort(arr, axis=0)[(n - 1) // 2]
        assert np.array_equal(out.pixels, expect)


def test_median_permutation_invariance(rng):
    frames = [random_frame(rng, 8, 8) for _ in range(10)]
    base = temporal_median(FrameStack("v", 0, 1, tuple(frames)))
    for _ in range(20):
        rng.shuffle(frames)
        assert temporal_median(FrameStack("v", 0, 1, tuple(frames))) == base


def test_median_empty_stack():
    with pytest.raises(DataError):
        temporal_median(FrameStack("v", 0, 1, ()))


def test_estimate_backgrounds_cadence():
    video = _video([_const_frame(9)] * 1000)
    cfg = BackgroundConfig(stack_len=5, stride=5, period=100, patch_size=2)
    bgs = estimate_backgrounds(video, cfg)
    assert [b.label_index for b in bgs] == list(range(10))
    assert bgs[3].source_span == (300, 320)
    for b in bgs:
        assert b.image == _const_frame(9)


def test_estimate_backgrounds_single_period_and_too_short():
    video = _video([_const_frame(1)] * 100)
    cfg = BackgroundConfig(stack_len=20, stride=5, period=100, patch_size=4)
    bgs = estimate_backgrounds(video, cfg)
    assert len(bgs) == 1 and bgs[0].label_index == 0
    with pytest.raises(DataError, match="period"):
        estimate_backgrounds(_video([_const_frame(1)] * 99), cfg)


def test_median_estimator_patchwise_equals_whole(rng):
    # the median commutes with tiling; the patch pipeline must not change it
    frames = tuple(random_frame(rng, 8, 12) for _ in range(9))
    stack = FrameStack("v", 0, 1, frames)
    assert MedianEstimator(patch_size=4).estimate(stack) == temporal_median(stack)


def test_reference_background():
    video = _video([_const_frame(5)] * 300)
    ref = reference_background(video, 300)
    assert ref.image == _const_frame(5) and ref.horizon == 300

    # alternating 0/255, 150 each: lower middle is 0
    frames = [_const_frame(0) if i % 2 == 0 else _const_frame(255) for i in range(300)]
    ref = reference_background(_video(frames), 300)
    assert (ref.image.pixels == 0).all()

    with pytest.raises(DataError):
        reference_background(video, 301)
