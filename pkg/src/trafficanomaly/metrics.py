"""Challenge scoring: precision/recall/F1, RMSE over matched start times,
normalized RMSE and the composite S3 ranking score."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import DataError
from .smoothing import AnomalyResult


@dataclass(frozen=True)
class GroundTruth:
    video_id: str
    has_anomaly: bool
    start_seconds: float | None = None

    def __post_init__(self):
        if self.has_anomaly:
            if self.start_seconds is None or self.start_seconds < 0:
                raise DataError(
                    f"truth for {self.video_id!r} needs a non-negative start_seconds"
                )
        elif self.start_seconds is not None:
            raise DataError(
                f"truth for {self.video_id!r} has start_seconds but no anomaly"
            )


@dataclass(frozen=True)
class MatchConfig:
    match_window: float = 10.0  # max |pred - actual| seconds for a TP
    rmse_cap: float = 300.0  # NRMSE normalization / worst-case RMSE

    def __post_init__(self):
        if self.match_window <= 0 or self.rmse_cap <= 0:
            raise ValueError("match_window and rmse_cap must be positive")


@dataclass(frozen=True)
class MatchedPairs:
    pairs: tuple[tuple[float, float], ...]  # (predicted, actual) seconds

    @property
    def n(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class VideoOutcome:
    video_id: str
    outcome: str  # TP, FP, FN, TN or FP+FN
    error_seconds: float | None = None  # present for TP only


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    rmse: float
    nrmse: float
    s3: float
    per_video: tuple[VideoOutcome, ...]


def match_predictions(
    preds: Sequence[AnomalyResult],
    truth: Sequence[GroundTruth],
    cfg: MatchConfig | None = None,
) -> tuple[MatchedPairs, int, int, int, list[VideoOutcome]]:
    cfg = cfg or MatchConfig()
    truth_by_id: dict[str, GroundTruth] = {}
    for t in truth:
        if t.video_id in truth_by_id:
            raise DataError(f"duplicate truth video_id {t.video_id!r}")
        truth_by_id[t.video_id] = t
    pred_by_id: dict[str, AnomalyResult] = {}
    for p in preds:
        if p.video_id in pred_by_id:
            raise DataError(f"duplicate prediction video_id {p.video_id!r}")
        if p.video_id not in truth_by_id:
            raise DataError(f"prediction for unknown video {p.video_id!r}")
        pred_by_id[p.video_id] = p

    pairs: list[tuple[float, float]] = []
    outcomes: list[VideoOutcome] = []
    tp = fp = fn = 0
    for vid in sorted(truth_by_id):
        t = truth_by_id[vid]
        p = pred_by_id.get(vid)
        detected = p is not None and p.detected
        if detected and t.has_anomaly:
            err = abs(p.start_seconds - t.start_seconds)
            if err <= cfg.match_window:
                tp += 1
                pairs.append((p.start_seconds, t.start_seconds))
                outcomes.append(VideoOutcome(vid, "TP", err))
            else:
                fp += 1
                fn += 1
                outcomes.append(VideoOutcome(vid, "FP+FN"))
        elif detected:
            fp += 1
            outcomes.append(VideoOutcome(vid, "FP"))
        elif t.has_anomaly:
            fn += 1
            outcomes.append(VideoOutcome(vid, "FN"))
        else:
            outcomes.append(VideoOutcome(vid, "TN"))
    return MatchedPairs(tuple(pairs)), tp, fp, fn, outcomes


def f1_score(tp: int, fp: int, fn: int) -> float:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    prec = tp / (tp + fp) if tp + fp > 0 else 0.0
    rec = tp / (tp + fn) if tp + fn > 0 else 0.0
    if prec + rec == 0:
        return 0.0
    return 2.0 * prec * rec / (prec + rec)


def rmse(pairs: MatchedPairs, cfg: MatchConfig | None = None) -> float:
    cfg = cfg or MatchConfig()
    if pairs.n == 0:
        return cfg.rmse_cap  # worst case when nothing matched
    return math.sqrt(sum((p - a) ** 2 for p, a in pairs.pairs) / pairs.n)


def s3_score(f1: float, rmse_value: float, cfg: MatchConfig | None = None) -> float:
    cfg = cfg or MatchConfig()
    if not 0.0 <= f1 <= 1.0:
        raise ValueError("f1 must be in [0,1]")
    if rmse_value < 0:
        raise ValueError("rmse must be non-negative")
    nrmse = min(rmse_value, cfg.rmse_cap) / cfg.rmse_cap
    return f1 * (1.0 - nrmse)


def evaluate(
    preds: Sequence[AnomalyResult],
    truth: Sequence[GroundTruth],
    cfg: MatchConfig | None = None,
) -> EvalReport:
    cfg = cfg or MatchConfig()
    pairs, tp, fp, fn, outcomes = match_predictions(preds, truth, cfg)
    prec = tp / (tp + fp) if tp + fp > 0 else 0.0
    rec = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = f1_score(tp, fp, fn)
    rmse_value = rmse(pairs, cfg)
    nrmse = min(rmse_value, cfg.rmse_cap) / cfg.rmse_cap
    return EvalReport(
        tp=tp,
        fp=fp,
        fn=fn,
        precision=prec,
        recall=rec,
        f1=f1,
        rmse=rmse_value,
        nrmse=nrmse,
        s3=s3_score(f1, rmse_value, cfg),
        per_video=tuple(outcomes),
    )


# ---------------------------------------------------------------------------
# file formats

TRUTH_CSV_HEADER = ["video_id", "has_anomaly", "start_seconds"]


def read_truth_csv(path) -> list[GroundTruth]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such truth file: {path}")
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRUTH_CSV_HEADER:
            raise DataError(f"{path}: bad header {header}, expected {TRUTH_CSV_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns")
            vid, flag, start = row
            if flag not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: has_anomaly must be 0 or 1")
            has = flag == "1"
            if has:
                if start.strip() == "":
                    raise DataError(f"{path}:{lineno}: anomalous video needs start_seconds")
                try:
                    out.append(GroundTruth(vid, True, float(start)))
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
            else:
                if start.strip() != "":
                    raise DataError(
                        f"{path}:{lineno}: start_seconds must be empty when has_anomaly=0"
                    )
                out.append(GroundTruth(vid, False))
    return out


def write_truth_csv(truth: Sequence[GroundTruth], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRUTH_CSV_HEADER)
        for t in truth:
            w.writerow(
                [t.video_id, int(t.has_anomaly), "" if t.start_seconds is None else t.start_seconds]
            )


def report_to_json(report: EvalReport) -> str:
    return json.dumps(
        {
            "tp": report.tp,
            "fp": report.fp,
            "fn": report.fn,
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "rmse": report.rmse,
            "nrmse": report.nrmse,
            "s3": report.s3,
            "per_video": [
                {
                    "video_id": o.video_id,
                    "outcome": o.outcome,
                    "error_seconds": o.error_seconds,
                }
                for o in report.per_video
            ],
        },
        indent=2,
    )
