import numpy as np
import pytest

from trafficanomaly.detect import Label, LabelSequence
from trafficanomaly.smoothing import (
    AnomalyResult,
    SmoothingTrace,
    extract_timestamp,
    read_results,
    smooth,
    smooth_fast,
    step1_local_majority,
    step2_block_vote,
    step3_edge_vote,
    write_results,
)

N, A = Label.NORMAL, Label.ABNORMAL


def seq(labels, video_id="v", period=3.3):
    return LabelSequence(video_id, tuple(labels), period)


def vals(sequence):
    return [l.value for l in sequence.labels]


def random_seq(rng, length, p_abnormal=0.5):
    return seq(A if rng.random() < p_abnormal else N for _ in range(length))


# ---------------------------------------------------------------------------
# step 1


def test_step1_fixed_points():
    assert step1_local_majority(seq([N] * 30)).labels == (N,) * 30
    assert step1_local_majority(seq([A] * 30)).labels == (A,) * 30


def test_step1_flips_isolated_abnormal():
    s = seq([N, N, N, N, N, A, N, N, N, N, N])
    assert step1_local_majority(s).labels == (N,) * 11


def test_step1_reads_original_sequence():
    # prefix windows for i < 5: at i=0 the window is empty, label survives
    s = seq([A, N, N, N, N, N])
    out = step1_local_majority(s)
    assert out.labels[0] is A
    assert out.labels[1:] == (N,) * 5


def test_step1_never_creates_abnormal(rng):
    for _ in range(200):
        s = random_seq(rng, int(rng.integers(0, 60)))
        out = step1_local_majority(s)
        for before, after in zip(s.labels, out.labels):
            if after is A:
                assert before is A


# ---------------------------------------------------------------------------
# steps 2 and 3


def test_step2_all_abnormal_fixed_point():
    assert step2_block_vote(seq([A] * 40)).labels == (A,) * 40


def test_step2_mostly_abnormal_window():
    out = step2_block_vote(seq([A] * 17 + [N] * 3))
    assert out.labels == (A,) * 20


def test_step2_balanced_window_unchanged():
    s = seq([A] * 10 + [N] * 10)
    assert step2_block_vote(s).labels == s.labels


def test_step2_short_input_noop():
    s = seq([A, N] * 9)  # length 18 < 20
    assert step2_block_vote(s).labels == s.labels


def test_step3_one_normal_dissenter():
    assert step3_edge_vote(seq([A, A, N, A, A])).labels == (A,) * 5


def test_step3_one_abnormal_dissenter():
    assert step3_edge_vote(seq([N, N, A, N, N])).labels == (N,) * 5


def test_step3_no_clear_majority_unchanged():
    s = seq([A, A, N, N, N])
    assert step3_edge_vote(s).labels == s.labels


# ---------------------------------------------------------------------------
# composition and the fast variant


def test_smooth_all_normal_all_abnormal():
    for fill in (N, A):
        tr = smooth(seq([fill] * 30))
        for stage in (tr.vid, tr.vid1, tr.vid2, tr.vid3):
            assert stage.labels == (fill,) * 30


def test_smooth_length_preserved(rng):
    for _ in range(100):
        s = random_seq(rng, int(rng.integers(0, 80)))
        tr = smooth(s)
        assert len(tr.vid1) == len(tr.vid2) == len(tr.vid3) == len(s)


@pytest.mark.parametrize("length", [0, 1, 4, 5, 6, 19, 20, 21, 24, 25, 26])
def test_fast_equivalence_boundary_lengths(length, rng):
    for _ in range(50):
        s = random_seq(rng, length)
        a, b = smooth(s), smooth_fast(s)
        assert a.vid1.labels == b.vid1.labels
        assert a.vid2.labels == b.vid2.labels
        assert a.vid3.labels == b.vid3.labels


def test_fast_equivalence_random(rng):
    for _ in range(500):
        s = random_seq(rng, int(rng.integers(0, 200)), p_abnormal=rng.choice([0.1, 0.5, 0.9]))
        a, b = smooth(s), smooth_fast(s)
        assert a.vid1.labels == b.vid1.labels
        assert a.vid2.labels == b.vid2.labels
        assert a.vid3.labels == b.vid3.labels


# ---------------------------------------------------------------------------
# timestamp extraction


def _trace_of(final):
    return SmoothingTrace(final, final, final, final)


def test_extract_no_abnormal():
    r = extract_timestamp(_trace_of(seq([N] * 10)))
    assert r == AnomalyResult("v", False)


def test_extract_index_10_is_33_seconds():
    r = extract_timestamp(_trace_of(seq([N] * 10 + [A] * 10)))
    assert r.detected and r.start_index == 10
    assert r.start_seconds == 33.0


def test_extract_all_abnormal():
    r = extract_timestamp(_trace_of(seq([A] * 25)))
    assert (r.start_index, r.start_seconds, r.confidence) == (0, 0.0, 1.0)


def test_extract_custom_period():
    r = extract_timestamp(_trace_of(seq([N, A])), period_seconds=2.0)
    assert r.start_seconds == 2.0


def test_extract_minimal_index_oracle(rng):
    for _ in range(200):
        s = random_seq(rng, int(rng.integers(1, 60)), p_abnormal=0.3)
        r = extract_timestamp(_trace_of(s))
        first = next((i for i, l in enumerate(s.labels) if l is A), None)
        if first is None:
            assert not r.detected
        else:
            assert r.start_index == first


def test_extract_confidence_window():
    s = seq([N] * 3 + [A, N, A, A] + [N] * 30)
    r = extract_timestamp(_trace_of(s))
    win = s.labels[3:23]
    assert r.confidence == sum(1 for l in win if l is A) / 20


# ---------------------------------------------------------------------------
# serialization


def test_results_roundtrip(tmp_path):
    results = [
        AnomalyResult("a", True, 4, 13.2, 0.8),
        AnomalyResult("b", False),
    ]
    p = tmp_path / "results.json"
    write_results(results, p)
    assert read_results(p) == results
