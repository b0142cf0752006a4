import json

import numpy as np
import pytest

from trafficanomaly.background import FrameStack, temporal_median
from trafficanomaly.detect import Label
from trafficanomaly.errors import DataError
from trafficanomaly.simgen import (
    ActorSpec,
    LabelScenario,
    VideoScenario,
    gen_label_stream,
    gen_noise_patch_scenario,
    gen_video,
    label_scenario_from_dict,
    render_video,
    video_scenario_from_dict,
    video_scenario_to_dict,
)

N, A = Label.NORMAL, Label.ABNORMAL


def test_label_stream_no_noise_no_anomaly():
    noisy, clean = gen_label_stream(LabelScenario(length=100))
    assert noisy.labels == clean.labels == (N,) * 100


def test_label_stream_interval_no_noise():
    s = LabelScenario(length=100, anomaly_intervals=((40, 70),))
    noisy, clean = gen_label_stream(s)
    assert noisy.labels == clean.labels
    assert all(clean.labels[i] is (A if 40 <= i < 70 else N) for i in range(100))


def test_label_stream_flip_fraction():
    s = LabelScenario(length=10_000, anomaly_intervals=((4000, 7000),), flip_prob=0.1, seed=7)
    noisy, clean = gen_label_stream(s)
    flipped = sum(1 for a, b in zip(noisy.labels, clean.labels) if a is not b)
    assert abs(flipped / 10_000 - 0.1) < 0.01


def test_label_stream_clean_independent_of_noise():
    base = LabelScenario(length=50, anomaly_intervals=((10, 20),))
    _, clean0 = gen_label_stream(base)
    for seed, prob in [(1, 0.3), (2, 0.0), (99, 0.8)]:
        _, clean = gen_label_stream(
            LabelScenario(length=50, anomaly_intervals=((10, 20),), flip_prob=prob, seed=seed)
        )
        assert clean.labels == clean0.labels


def test_label_stream_determinism():
    s = LabelScenario(length=500, anomaly_intervals=((100, 200),), flip_prob=0.2, seed=3)
    assert gen_label_stream(s)[0].labels == gen_label_stream(s)[0].labels


def test_label_scenario_validation():
    with pytest.raises(DataError):
        LabelScenario(length=10, anomaly_intervals=((5, 15),))
    with pytest.raises(DataError):
        LabelScenario(length=20, anomaly_intervals=((5, 10), (8, 12),))


def _small_scenario(**kw):
    defaults = dict(
        video_id="toy",
        width=64,
        height=48,
        duration_frames=120,
        background_value=80,
        actors=(ActorSpec("car", 2, 10, 12, 8, 3.0, 0.0, 200),),
        seed=11,
    )
    defaults.update(kw)
    return VideoScenario(**defaults)


def test_gen_video_deterministic(tmp_path):
    s = _small_scenario(jitter_px=1)
    gen_video(s, tmp_path / "a")
    gen_video(s, tmp_path / "b")
    for p in sorted((tmp_path / "a").iterdir()):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_gen_video_manifest_stop_seconds(tmp_path):
    s = _small_scenario(stop_events=(("car", 60),))
    manifest = gen_video(s, tmp_path / "v")
    assert manifest["actors"][0]["stop_seconds"] == pytest.approx(2.0)
    on_disk = json.loads((tmp_path / "v" / "manifest.json").read_text())
    assert on_disk == manifest


def test_moving_actor_absent_from_median():
    # fast actor covers each pixel in a minority of strided samples
    s = _small_scenario(duration_frames=300, actors=(ActorSpec("car", 0, 20, 10, 6, 4.0, 0.0, 220),))
    video = render_video(s)
    stack = FrameStack("toy", 0, 5, tuple(video.frame(i) for i in range(0, 100, 5)))
    bg = temporal_median(stack)
    assert (bg.pixels == 80).all()


def test_stopped_actor_enters_median():
    s = _small_scenario(
        duration_frames=200,
        actors=(ActorSpec("car", 0, 20, 10, 6, 4.0, 0.0, 220),),
        stop_events=(("car", 100),),
    )
    video = render_video(s)
    stack = FrameStack("toy", 100, 5, tuple(video.frame(i) for i in range(100, 200, 5)))
    bg = temporal_median(stack)
    assert (bg.pixels == 220).sum() == 60  # the full 10x6 rectangle


def test_render_matches_disk(tmp_path):
    from trafficanomaly.media import load_frame_sequence

    s = _small_scenario(duration_frames=10)
    gen_video(s, tmp_path / "v")
    video = load_frame_sequence(tmp_path / "v", video_id="toy")
    rendered = render_video(s)
    for i in range(10):
        assert video.frame(i) == rendered.frame(i)


def test_noise_patch_scenario():
    base = _small_scenario()
    assert gen_noise_patch_scenario(base, num_patches=0) == base
    augmented = gen_noise_patch_scenario(base, num_patches=3, appear_frame=50)
    assert len(augmented.actors) == 4
    for actor in augmented.actors[1:]:
        assert actor.vx == actor.vy == 0.0
        assert actor.appear_frame == 50
        assert actor.width * actor.height < 64


def test_scenario_json_roundtrip():
    s = _small_scenario(stop_events=(("car", 30),), jitter_px=2)
    assert video_scenario_from_dict(video_scenario_to_dict(s)) == s
    ls = LabelScenario(length=40, anomaly_intervals=((5, 9),), flip_prob=0.1, seed=4)
    assert label_scenario_from_dict(
        {"length": 40, "anomaly_intervals": [[5, 9]], "flip_prob": 0.1, "seed": 4}
    ) == ls


def test_scenario_validation():
    with pytest.raises(DataError, match="unknown actor"):
        _small_scenario(stop_events=(("ghost", 10),))
    with pytest.raises(DataError, match="stop_frame"):
        _small_scenario(stop_events=(("car", 500),))
    with pytest.raises(DataError, match="unknown"):
        video_scenario_from_dict({"duration_frames": 10, "bogus": 1})
