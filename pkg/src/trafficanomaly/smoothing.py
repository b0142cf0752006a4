"""Three-step temporal-window label smoothing and initial-timestamp extraction.

Each step reads the previous step's frozen output and writes into a fresh
copy; within a step, window writes apply in ascending start index with
last-writer-wins on overlap.  `smooth` is the literal reference loop;
`smooth_fast` is an equivalent linear-time prefix-sum implementation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .detect import Label, LabelSequence
from .errors import DataError

DEFAULT_PERIOD_SECONDS = 3.3


@dataclass(frozen=True)
class SmoothingTrace:
    vid: LabelSequence
    vid1: LabelSequence
    vid2: LabelSequence
    vid3: LabelSequence

    def __post_init__(self):
        n = len(self.vid)
        for seq in (self.vid1, self.vid2, self.vid3):
            if len(seq) != n or seq.video_id != self.vid.video_id:
                raise ValueError("trace sequences must share length and video_id")


@dataclass(frozen=True)
class AnomalyResult:
    video_id: str
    detected: bool
    start_index: int | None = None
    start_seconds: float | None = None
    confidence: float = 0.0

    def __post_init__(self):
        if self.detected != (self.start_index is not None):
            raise ValueError("start_index present iff detected")
        if self.detected != (self.start_seconds is not None):
            raise ValueError("start_seconds present iff detected")


def _with_labels(seq: LabelSequence, labels) -> LabelSequence:
    return LabelSequence(seq.video_id, tuple(labels), seq.period_seconds)


def step1_local_majority(vid: LabelSequence) -> LabelSequence:
    """Flip a label to Normal when its 10-wide neighborhood is majority Normal.

    Windows always index the original sequence; for i < 5 the window is the
    prefix [0, i).
    """
    labels = list(vid.labels)
    L = len(labels)
    out = list(labels)
    for i in range(L):
        if i < 5:
            win = labels[0:i]
        else:
            win = labels[i - 5 : min(i + 5, L)]
        n = win.count(Label.NORMAL)
        a = len(win) - n
        if n > a:
            out[i] = Label.NORMAL
    return _with_labels(vid, out)


def step2_block_vote(vid1: LabelSequence) -> LabelSequence:
    """Relabel whole 20-windows that are >75% one class (fewer than 5 of the other)."""
    labels = list(vid1.labels)
    L = len(labels)
    out = list(labels)
    if L >= 20:
        for i in range(L - 20 + 1):
            win = labels[i : i + 20]
            n = win.count(Label.NORMAL)
            a = 20 - n
            if n < 5:
                out[i : i + 20] = [Label.ABNORMAL] * 20
            elif a < 5:
                out[i : i + 20] = [Label.NORMAL] * 20
    return _with_labels(vid1, out)


def step3_edge_vote(vid2: LabelSequence) -> LabelSequence:
    """Relabel whole 5-windows containing exactly one dissenting label."""
    labels = list(vid2.labels)
    L = len(labels)
    out = list(labels)
    if L >= 5:
        for i in range(L - 5 + 1):
            win = labels[i : i + 5]
            n = win.count(Label.NORMAL)
            a = 5 - n
            if n == 1:
                out[i : i + 5] = [Label.ABNORMAL] * 5
            elif a == 1:
                out[i : i + 5] = [Label.NORMAL] * 5
    return _with_labels(vid2, out)


def smooth(vid: LabelSequence) -> SmoothingTrace:
    vid1 = step1_local_majority(vid)
    vid2 = step2_block_vote(vid1)
    vid3 = step3_edge_vote(vid2)
    return SmoothingTrace(vid, vid1, vid2, vid3)


# ---------------------------------------------------------------------------
# linear-time variant


def _to_arr(labels: Sequence[Label]) -> np.ndarray:
    return np.fromiter(
        (1 if l is Label.ABNORMAL else 0 for l in labels), dtype=np.int64, count=len(labels)
    )


def _from_arr(seq: LabelSequence, arr: np.ndarray) -> LabelSequence:
    return _with_labels(
        seq, (Label.ABNORMAL if v else Label.NORMAL for v in arr.tolist())
    )


def _step1_fast(a: np.ndarray) -> np.ndarray:
    L = len(a)
    if L == 0:
        return a.copy()
    pa = np.concatenate(([0], np.cumsum(a)))
    idx = np.arange(L)
    lo = np.where(idx < 5, 0, idx - 5)
    hi = np.where(idx < 5, idx, np.minimum(idx + 5, L))
    acount = pa[hi] - pa[lo]
    ncount = (hi - lo) - acount
    return np.where(ncount > acount, 0, a)


def _windowed_rewrite(prev: np.ndarray, win: int, classify) -> np.ndarray:
    """Apply ascending fixed-size window assignments with last-writer-wins.

    `classify(ncounts, acounts)` returns per-window actions:
    0 = none, 1 = all-abnormal, 2 = all-normal.  Counts come from `prev` only.
    """
    L = len(prev)
    if L < win:
        return prev.copy()
    pa = np.concatenate(([0], np.cumsum(prev)))
    starts = np.arange(L - win + 1)
    ac = pa[starts + win] - pa[starts]
    nc = win - ac
    action = classify(nc, ac)

    # for each position j, the covering window with the largest start index
    # that performs a write is the one whose value survives
    last_write = np.where(action > 0, starts, -1)
    last_write = np.maximum.accumulate(last_write)
    j = np.arange(L)
    cand = last_write[np.minimum(j, L - win)]
    covered = (cand >= 0) & (cand >= j - (win - 1))
    vals = action[np.maximum(cand, 0)]
    out = prev.copy()
    out[covered & (vals == 1)] = 1
    out[covered & (vals == 2)] = 0
    return out


def _step2_fast(a: np.ndarray) -> np.ndarray:
    def classify(nc, ac):
        action = np.zeros(len(nc), dtype=np.int8)
        action[nc < 5] = 1
        action[(nc >= 5) & (ac < 5)] = 2
        return action

    return _windowed_rewrite(a, 20, classify)


def _step3_fast(a: np.ndarray) -> np.ndarray:
    def classify(nc, ac):
        action = np.zeros(len(nc), dtype=np.int8)
        action[nc == 1] = 1
        action[(nc != 1) & (ac == 1)] = 2
        return action

    return _windowed_rewrite(a, 5, classify)


def smooth_fast(vid: LabelSequence) -> SmoothingTrace:
    """Identical output to `smooth`, in time linear in the sequence length."""
    a0 = _to_arr(vid.labels)
    a1 = _step1_fast(a0)
    a2 = _step2_fast(a1)
    a3 = _step3_fast(a2)
    return SmoothingTrace(
        vid, _from_arr(vid, a1), _from_arr(vid, a2), _from_arr(vid, a3)
    )


def extract_timestamp(
    trace: SmoothingTrace, period_seconds: float | None = None
) -> AnomalyResult:
    """First Abnormal index of the final sequence, scaled to seconds."""
    seq = trace.vid3
    period = period_seconds if period_seconds is not None else seq.period_seconds
    if period <= 0:
        raise ValueError("period_seconds must be positive")
    L = len(seq)
    for i, lab in enumerate(seq.labels):
        if lab is Label.ABNORMAL:
            win = seq.labels[i : min(i + 20, L)]
            conf = sum(1 for l in win if l is Label.ABNORMAL) / len(win)
            return AnomalyResult(
                video_id=seq.video_id,
                detected=True,
                start_index=i,
                start_seconds=i * period,
                confidence=conf,
            )
    return AnomalyResult(video_id=seq.video_id, detected=False)


# ---------------------------------------------------------------------------
# result serialization


def results_to_json(results: Sequence[AnomalyResult]) -> str:
    return json.dumps(
        [
            {
                "video_id": r.video_id,
                "detected": r.detected,
                "start_index": r.start_index,
                "start_seconds": r.start_seconds,
                "confidence": r.confidence,
            }
            for r in results
        ],
        indent=2,
    )


def write_results(results: Sequence[AnomalyResult], path) -> None:
    Path(path).write_text(results_to_json(results) + "\n", encoding="utf-8")


def read_results(path) -> list[AnomalyResult]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such results file: {path}")
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON ({exc.msg})") from exc
    if not isinstance(records, list):
        raise DataError(f"{path}: expected a JSON array of results")
    out = []
    for k, rec in enumerate(records):
        try:
            out.append(
                AnomalyResult(
                    video_id=str(rec["video_id"]),
                    detected=bool(rec["detected"]),
                    start_index=rec.get("start_index"),
                    start_seconds=rec.get("start_seconds"),
                    confidence=float(rec.get("confidence", 0.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: bad result record {k}: {exc}") from exc
    return out
