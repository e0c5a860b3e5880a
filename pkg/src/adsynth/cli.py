"""Command-line entry point: ``adsynth <command> ...``.

Every command writes into an output directory (``--out``, else the
``ADSYNTH_OUT`` environment variable, else ``./adsynth-out``). Outputs are
byte-identical for identical flags, seed and inputs.

Exit codes: 0 success, 2 validation or usage error, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .bench import ExperimentConfig, confusion_csv, results_table_csv, run_config
from .metrics import (
    FEATURES,
    compare_report,
    correlation_matrix,
    feature_series,
    histogram,
    metric_profile,
    range_of_motion,
)
from .render import CameraModel, render_depth, write_depth_frames
from .seeding import MAX_SEED, derive_seed
from .skeleton import ActionLabel, SkeletonError, SubjectMetadata, load_clip, parse_capture_skeleton, save_clip
from .synthesizer import GenerationRequest, default_profile, generate_clip
from .synthesizer.fitting import fit_profile, mean_profile

__all__ = ["main", "build_parser", "OUTPUT_ENV"]

OUTPUT_ENV = "ADSYNTH_OUT"
DEFAULT_OUTPUT = "adsynth-out"

log = logging.getLogger("adsynth")


class UsageError(SkeletonError):
    pass


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _out_dir(args):
    path = Path(args.out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise UsageError(f"output directory {path} is not writable")
    return path


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="")
    log.info("wrote %s", path)


def _json(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _rows_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load_dir(path):
    path = Path(path)
    if not path.is_dir():
        raise UsageError(f"{path} is not a directory")
    files = sorted(p for p in path.glob("*.json") if p.name != "manifest.json")
    clips = [load_clip(p) for p in files]
    if not clips:
        raise UsageError(f"{path} contains no clip files")
    return clips


# --------------------------------------------------------------------------
# commands


def cmd_gen(args):
    if args.request:
        try:
            doc = json.loads(Path(args.request).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read request {args.request}: {exc}") from None
        for key, value in doc.items():
            if key not in ("action", "condition", "moca", "duration", "fps", "viewpoint", "count", "body_scale"):
                raise UsageError(f"unknown request key {key!r}")
            setattr(args, key, value)
    if args.action is None or args.condition is None:
        raise UsageError("gen needs --action and --condition (or a request file)")
    out = _out_dir(args)
    profile = default_profile(args.condition, args.moca)
    entries = []
    for i in range(args.count):
        seed = derive_seed(args.seed, "gen", i)
        req = GenerationRequest(args.action, profile, duration_s=args.duration, fps=args.fps,
                                viewpoint_deg=args.viewpoint, seed=seed, body_scale=args.body_scale,
                                moca_score=args.moca, subject_id=f"gen-{i:03d}")
        name = f"{req.action.value}_{profile.condition.value}_{i:03d}.json"
        save_clip(generate_clip(req), out / name)
        entries.append({"file": name, "seed": seed, "viewpoint_deg": args.viewpoint})
    manifest = {
        "global_seed": args.seed,
        "action": ActionLabel(args.action).value,
        "condition": profile.condition.value,
        "moca_score": args.moca,
        "duration_s": args.duration,
        "fps": args.fps,
        "body_scale": args.body_scale,
        "profile": profile.to_dict(),
        "clips": entries,
    }
    _write(out / "manifest.json", _json(manifest))
    return 0


def cmd_parse(args):
    out = _out_dir(args)
    try:
        text = Path(args.input).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None
    meta = SubjectMetadata(args.condition, subject_id=args.subject or Path(args.input).stem)
    clips = parse_capture_skeleton(text, fps=args.fps, action=args.action, metadata=meta)
    stem = Path(args.input).stem
    for k, clip in enumerate(clips):
        save_clip(clip, out / f"{stem}_body{k}.json")
    log.info("parsed %d bodies", len(clips))
    return 0


def cmd_compare(args):
    out = _out_dir(args)
    real = _load_dir(args.real)
    synth = _load_dir(args.synthetic)
    report = compare_report(real, synth)
    _write(out / "report.csv", report.to_csv())
    for feat in report.rows:
        for tag, pool in zip(("real", "synthetic"), report.pools[feat]):
            rows = [(repr(e), c) for e, c in histogram(pool, args.bins)]
            _write(out / f"hist_{feat}_{tag}.csv", _rows_csv(["left_edge", "count"], rows))
        wr, ws = report.warped[feat]
        _write(out / f"warped_{feat}.csv", _rows_csv(["real", "synthetic"], [(repr(a), repr(b)) for a, b in zip(wr, ws)]))
    labels, mat = correlation_matrix(report)
    _write(out / "correlation_matrix.csv",
           _rows_csv(["", *labels], [(lab, *map(repr, map(float, row))) for lab, row in zip(labels, mat)]))
    return 0


def cmd_fit(args):
    out = _out_dir(args)
    clips = [c for c in _load_dir(args.target) if c.action == ActionLabel(args.action)]
    if not clips:
        raise UsageError(f"no {args.action} clips in {args.target}")
    target = mean_profile(metric_profile(c) for c in clips)
    init = default_profile(args.condition)
    profile, trace = fit_profile(target, args.action, init, args.budget, alpha=args.alpha,
                                 seed=derive_seed(args.seed, "fit"))
    _write(out / "profile.json", _json(profile.to_dict()))
    _write(out / "profile.csv", _rows_csv(["parameter", "value"], [(k, v) for k, v in profile.to_dict().items()]))
    _write(out / "trace.csv", _rows_csv(["evaluation", "objective"], [(k + 1, repr(v)) for k, v in enumerate(trace)]))
    return 0


def cmd_bench(args):
    config = ExperimentConfig.load(args.config)
    if args.seed_given:
        config.seed = args.seed
    if config.output_dir and not args.out:
        args.out = config.output_dir
    out = _out_dir(args)
    results = run_config(config)
    _write(out / "results.csv", results_table_csv(results))
    for r in results:
        _write(out / f"confusion_{r.strategy}.csv", confusion_csv(r))
    return 0


def cmd_render(args):
    out = _out_dir(args)
    clip = load_clip(args.clip)
    camera = CameraModel(args.width, args.height, args.fx, args.fy if args.fy else args.fx, near=args.near,
                         far=args.far)
    frames = render_depth(clip, camera, args.radius)
    write_depth_frames(frames, out)
    log.info("rendered %d frames", len(frames))
    return 0


def cmd_metrics(args):
    out = _out_dir(args)
    rows = []
    for path in args.clips:
        clip = load_clip(path)
        name = Path(path).name
        for feat in FEATURES:
            v = feature_series(clip, feat).values
            rows.append((name, feat, repr(float(v.mean())), repr(float(range_of_motion(v)))))
        prof = metric_profile(clip)
        for joint, vec in zip(prof.joints, prof.vectors):
            rows.append((name, f"profile_{joint}", *(repr(float(x)) for x in vec[:2])))
    _write(out / "metrics.csv", _rows_csv(["clip", "feature", "mean", "rom"], rows))
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="adsynth", description="Condition-aware skeleton motion toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None, help="global seed (64-bit unsigned, default 0)")
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate synthetic clips")
    p.add_argument("--request", help="JSON request file (keys mirror the flags)")
    p.add_argument("--action")
    p.add_argument("--condition")
    p.add_argument("--moca", type=int)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--viewpoint", type=float, default=0.0)
    p.add_argument("--body-scale", dest="body_scale", type=float, default=1.0)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("parse", parents=[common], help="convert a capture skeleton file to native clips")
    p.add_argument("input")
    p.add_argument("--action", default="standing")
    p.add_argument("--condition", default="NC")
    p.add_argument("--subject")
    p.add_argument("--fps", type=float, default=30.0)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("compare", parents=[common], help="compare real and synthetic clip directories")
    p.add_argument("real")
    p.add_argument("synthetic")
    p.add_argument("--bins", type=int, default=30)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit", parents=[common], help="fit a condition profile to target clips")
    p.add_argument("target")
    p.add_argument("--action", required=True)
    p.add_argument("--condition", default="NC", help="condition of the starting profile")
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", parents=[common], help="run an augmentation benchmark from a JSON config")
    p.add_argument("config")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", parents=[common], help="render a clip to 16-bit depth frames")
    p.add_argument("clip")
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--fx", type=float, default=280.0)
    p.add_argument("--fy", type=float)
    p.add_argument("--near", type=float, default=0.5)
    p.add_argument("--far", type=float, default=6.0)
    p.add_argument("--radius", type=float, default=0.05)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("metrics", parents=[common], help="per-feature means and ROMs of clips")
    p.add_argument("clips", nargs="+")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (SkeletonError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort structured message
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
