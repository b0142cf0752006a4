"""Command-line interface: estimate-bg, detect, smooth, evaluate, simulate,
pipeline.  A JSON config file supplies defaults; flags win over the file.

Exit codes: 0 success, 1 usage error, 2 data/schema error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import background as bgmod
from . import detect as detmod
from . import metrics as metmod
from . import report as repmod
from . import simgen
from . import smoothing as smomod
from .errors import DataError, UsageError
from .media import load_frame_sequence, write_frame

log = logging.getLogger("trafficanomaly")


@dataclass(frozen=True)
class PipelineConfig:
    # background
    stack_len: int = 20
    stride: int = 5
    period: int = 100
    patch_size: int = 128
    reference_horizon: int = 300
    # detector
    diff_threshold: int = 25
    min_area: int = 64
    max_area: int = 40000
    denoise: bool = True
    # smoothing
    period_seconds: float = 3.3
    # metrics
    match_window: float = 10.0
    rmse_cap: float = 300.0
    # I/O
    frame_pattern: str = "f_%06d.pgm"
    fps: float = 30.0

    def background_config(self) -> bgmod.BackgroundConfig:
        return bgmod.BackgroundConfig(
            stack_len=self.stack_len,
            stride=self.stride,
            period=self.period,
            patch_size=self.patch_size,
            reference_horizon=self.reference_horizon,
        )

    def detector_config(self) -> detmod.DetectorConfig:
        return detmod.DetectorConfig(
            diff_threshold=self.diff_threshold,
            min_area=self.min_area,
            max_area=self.max_area,
            denoise=self.denoise,
        )

    def match_config(self) -> metmod.MatchConfig:
        return metmod.MatchConfig(
            match_window=self.match_window, rmse_cap=self.rmse_cap
        )


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such config file: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise DataError(f"{path}: config must be a JSON object")
    known = set(asdict(PipelineConfig()))
    unknown = set(obj) - known
    if unknown:
        raise DataError(f"{path}: unknown config keys {sorted(unknown)}")
    try:
        return PipelineConfig(**obj)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise UsageError(message)


_CONFIG_FLAGS = [
    ("--stack-len", "stack_len", int),
    ("--stride", "stride", int),
    ("--period", "period", int),
    ("--patch-size", "patch_size", int),
    ("--reference-horizon", "reference_horizon", int),
    ("--diff-threshold", "diff_threshold", int),
    ("--min-area", "min_area", int),
    ("--max-area", "max_area", int),
    ("--period-seconds", "period_seconds", float),
    ("--match-window", "match_window", float),
    ("--rmse-cap", "rmse_cap", float),
    ("--frame-pattern", "frame_pattern", str),
    ("--fps", "fps", float),
]


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="JSON", help="config file with defaults")
    for flag, dest, typ in _CONFIG_FLAGS:
        p.add_argument(flag, dest=dest, type=typ, default=None)
    p.add_argument(
        "--no-denoise", dest="denoise", action="store_const", const=False, default=None
    )


def _resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {
        dest: getattr(args, dest)
        for _, dest, _t in _CONFIG_FLAGS + [("", "denoise", bool)]
        if getattr(args, dest, None) is not None
    }
    try:
        cfg = replace(cfg, **overrides)
        # surface invalid combinations (e.g. stack span vs period) up front
        cfg.background_config()
        cfg.detector_config()
        cfg.match_config()
        if cfg.period_seconds <= 0:
            raise ValueError("period_seconds must be positive")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return cfg


# ---------------------------------------------------------------------------
# stage helpers shared by the subcommands and `pipeline`


def _stage_backgrounds(frames_dir, cfg: PipelineConfig, video_id=None):
    video = load_frame_sequence(
        frames_dir, cfg.frame_pattern, cfg.fps, video_id=video_id
    )
    bgs = bgmod.estimate_backgrounds(video, cfg.background_config())
    ref = bgmod.reference_background(video, cfg.reference_horizon)
    return video, bgs, ref


def _stage_detect(bgs, ref, cfg: PipelineConfig):
    det_cfg = cfg.detector_config()
    detections = []
    for bg in bgs:
        detections.extend(detmod.detect_static_objects(bg, ref, det_cfg))
    return detections


def _write_bg_outputs(out_dir: Path, bgs, ref) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    vid = ref.video_id
    entries = []
    for bg in bgs:
        name = f"bg_{vid}_{bg.label_index}.pgm"
        write_frame(bg.image, out_dir / name)
        entries.append(
            {
                "video_id": vid,
                "label_index": bg.label_index,
                "file": name,
                "source_span": list(bg.source_span),
            }
        )
    ref_name = f"ref_{vid}.pgm"
    write_frame(ref.image, out_dir / ref_name)
    index_path = out_dir / "index.json"
    _atomic_write_text(
        index_path,
        json.dumps(
            {
                "video_id": vid,
                "reference_file": ref_name,
                "reference_horizon": ref.horizon,
                "backgrounds": entries,
            },
            indent=2,
        )
        + "\n",
    )
    return index_path


def _read_bg_index(index_path: Path):
    if not index_path.is_file():
        raise DataError(f"no such background index: {index_path}")
    try:
        obj = json.loads(index_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{index_path}: malformed JSON ({exc.msg})") from exc
    from .media import load_frame

    base = index_path.parent
    try:
        vid = obj["video_id"]
        ref = bgmod.ReferenceBackground(
            vid, load_frame(base / obj["reference_file"]), int(obj["reference_horizon"])
        )
        bgs = [
            bgmod.BackgroundImage(
                video_id=e["video_id"],
                label_index=int(e["label_index"]),
                source_span=tuple(e["source_span"]),
                image=load_frame(base / e["file"]),
            )
            for e in obj["backgrounds"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{index_path}: bad index: {exc}") from exc
    return bgs, ref


def _smooth_sequences(sequences, out_dir: Path, dump_trace: bool, figures: bool):
    results = []
    for seq in sequences:
        trace = smomod.smooth_fast(seq)
        results.append(smomod.extract_timestamp(trace))
        if dump_trace:
            for name, s in (
                ("step1", trace.vid1),
                ("step2", trace.vid2),
                ("step3", trace.vid3),
            ):
                detmod.write_label_csv(
                    [s], out_dir / f"trace_{seq.video_id}_{name}.csv"
                )
            if figures:
                repmod.save_trace_figure(
                    trace, out_dir / f"trace_{seq.video_id}.png"
                )
    return results


# ---------------------------------------------------------------------------
# subcommands


def cmd_estimate_bg(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(args.out_dir)
    _video, bgs, ref = _stage_backgrounds(args.frames_dir, cfg, args.video_id)
    index_path = _write_bg_outputs(out_dir, bgs, ref)
    log.info("wrote %d backgrounds and index %s", len(bgs), index_path)
    print(f"{len(bgs)} backgrounds -> {index_path}")
    return 0


def cmd_detect(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.index:
        bgs, ref = _read_bg_index(Path(args.index))
    elif args.frames_dir:
        _video, bgs, ref = _stage_backgrounds(args.frames_dir, cfg, args.video_id)
    else:
        raise UsageError("detect needs --index or --frames-dir")
    detections = _stage_detect(bgs, ref, cfg)
    det_path = out_dir / "detections.jsonl"
    detmod.write_detections(detections, det_path)
    seq = detmod.derive_labels(
        detections, len(bgs), ref.video_id, cfg.period_seconds
    )
    labels_path = out_dir / "labels.csv"
    detmod.write_label_csv([seq], labels_path)
    if args.figures:
        boxed = [bg for bg in bgs if any(d.label_index == bg.label_index for d in detections)]
        shown = boxed[0] if boxed else bgs[0]
        repmod.save_detection_figure(
            shown,
            ref,
            [d for d in detections if d.label_index == shown.label_index],
            out_dir / f"detect_{ref.video_id}.png",
        )
    print(f"{len(detections)} detections -> {det_path}")
    return 0


def cmd_smooth(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sequences = detmod.read_label_csv(args.labels, cfg.period_seconds)
    results = _smooth_sequences(
        sequences, out_dir, args.dump_trace, figures=not args.no_figures
    )
    results_path = out_dir / "results.json"
    _atomic_write_text(results_path, smomod.results_to_json(results) + "\n")
    print(f"{len(results)} results -> {results_path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    preds = smomod.read_results(args.preds)
    truth = metmod.read_truth_csv(args.truth)
    report = metmod.evaluate(preds, truth, cfg.match_config())
    report_path = out_dir / "report.json"
    _atomic_write_text(report_path, metmod.report_to_json(report) + "\n")
    if not args.no_figures:
        repmod.save_eval_figure(report, out_dir / "report.png")
    print(
        f"tp={report.tp} fp={report.fp} fn={report.fn} "
        f"f1={report.f1:.4f} rmse={report.rmse:.2f} s3={report.s3:.4f}"
    )
    return 0


def cmd_simulate(args) -> int:
    scenario = simgen.load_scenario_file(args.scenario)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "labels":
        if not isinstance(scenario, simgen.LabelScenario):
            raise DataError(f"{args.scenario} is not a label scenario")
        noisy, clean = simgen.gen_label_stream(scenario)
        detmod.write_label_csv([noisy], out_dir / "labels_noisy.csv")
        detmod.write_label_csv([clean], out_dir / "labels_clean.csv")
        print(f"label streams -> {out_dir}")
    else:
        if not isinstance(scenario, simgen.VideoScenario):
            raise DataError(f"{args.scenario} is not a video scenario")
        manifest = simgen.gen_video(scenario, out_dir)
        print(
            f"{manifest['duration_frames']} frames -> {out_dir} "
            f"(manifest.json written)"
        )
    return 0


def _pipeline_one_video(frames_dir: Path, cfg: PipelineConfig, out_dir: Path, args):
    out_dir.mkdir(parents=True, exist_ok=True)
    _video, bgs, ref = _stage_backgrounds(frames_dir, cfg)
    if args.dump_backgrounds:
        _write_bg_outputs(out_dir / "backgrounds", bgs, ref)
    detections = _stage_detect(bgs, ref, cfg)
    detmod.write_detections(detections, out_dir / "detections.jsonl")
    seq = detmod.derive_labels(detections, len(bgs), ref.video_id, cfg.period_seconds)
    detmod.write_label_csv([seq], out_dir / "labels.csv")
    return seq


def _discover_videos(frames_dir: Path, pattern: str) -> list[Path]:
    from .media import _pattern_to_regex

    rx = _pattern_to_regex(pattern)
    if any(rx.fullmatch(p.name) for p in frames_dir.iterdir() if p.is_file()):
        return [frames_dir]
    subdirs = sorted(d for d in frames_dir.iterdir() if d.is_dir())
    videos = [
        d
        for d in subdirs
        if any(rx.fullmatch(p.name) for p in d.iterdir() if p.is_file())
    ]
    if not videos:
        raise DataError(f"no frames matching {pattern!r} under {frames_dir}")
    return videos


def cmd_pipeline(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    sequences: list[detmod.LabelSequence]
    if args.detections:
        detections = detmod.load_detections(args.detections)
        by_video: dict[str, list[detmod.Detection]] = {}
        for d in detections:
            by_video.setdefault(d.video_id, []).append(d)
        sequences = []
        for vid in sorted(by_video):
            dets = by_video[vid]
            num = args.num_labels or max(d.label_index for d in dets) + 1
            sequences.append(
                detmod.derive_labels(dets, num, vid, cfg.period_seconds)
            )
    elif args.frames_dir:
        videos = _discover_videos(Path(args.frames_dir), cfg.frame_pattern)
        run = lambda d: _pipeline_one_video(
            d, cfg, out_dir if len(videos) == 1 else out_dir / d.name, args
        )
        if args.jobs > 1 and len(videos) > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                sequences = list(pool.map(run, videos))
        else:
            sequences = [run(d) for d in videos]
    else:
        raise UsageError("pipeline needs --frames-dir or --detections")

    results = _smooth_sequences(
        sequences, out_dir, args.dump_trace, figures=not args.no_figures
    )
    results_path = out_dir / "results.json"
    _atomic_write_text(results_path, smomod.results_to_json(results) + "\n")
    print(f"{len(results)} results -> {results_path}")

    if args.truth:
        truth = metmod.read_truth_csv(args.truth)
        report = metmod.evaluate(results, truth, cfg.match_config())
        _atomic_write_text(out_dir / "report.json", metmod.report_to_json(report) + "\n")
        if not args.no_figures:
            repmod.save_eval_figure(report, out_dir / "report.png")
        print(
            f"tp={report.tp} fp={report.fp} fn={report.fn} "
            f"f1={report.f1:.4f} rmse={report.rmse:.2f} s3={report.s3:.4f}"
        )
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="trafficanomaly", description=__doc__)
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-bg", help="estimate per-period backgrounds")
    _add_config_args(p)
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--video-id", default=None)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_estimate_bg)

    p = sub.add_parser("detect", help="run the static-object baseline detector")
    _add_config_args(p)
    p.add_argument("--index", help="index.json written by estimate-bg")
    p.add_argument("--frames-dir")
    p.add_argument("--video-id", default=None)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("smooth", help="apply temporal smoothing to a label CSV")
    _add_config_args(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--dump-trace", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    _add_config_args(p)
    p.add_argument("--preds", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="generate synthetic labels or video")
    p.add_argument("kind", choices=["labels", "video"])
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", help="run the full pipeline end to end")
    _add_config_args(p)
    p.add_argument("--frames-dir")
    p.add_argument("--detections", help="JSONL file; skips stages 1-2")
    p.add_argument("--num-labels", type=int, default=None)
    p.add_argument("--truth")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dump-trace", action="store_true")
    p.add_argument("--dump-backgrounds", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(message)s",
        )
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
