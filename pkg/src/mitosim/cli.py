"""Command-line entry point.

One executable, one subcommand per pipeline. Exit codes: 0 success, 1
argument/config validation error, 2 runtime error. Progress and diagnostics
go to stderr; machine-readable output goes to files or stdout only. Every
subcommand is reproducible from (config, seed): all randomness derives from
the seed through documented hash substreams.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analytics as analytics_mod
from . import dataset as dataset_mod
from . import evaluation, io, segmentation, tracking
from .config import Config, ConfigError, load_config
from .imaging import calibrate_snr


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _progress(msg: str) -> None:
    print(f"[mitosim] {msg}", file=sys.stderr, flush=True)


def _load(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    cfg.validate()
    return cfg


def _dry_run(cfg: Config) -> int:
    print(json.dumps(cfg.to_dict(), sort_keys=True, indent=2))
    return 0


def _add_config_args(p, seed_default=0):
    p.add_argument("--config", help="JSON config file (defaults when omitted)")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--dry-run", action="store_true",
                   help="validate config, print resolved parameters, exit")


def cmd_psf(args) -> int:
    cfg = _load(args)
    if args.dry_run:
        return _dry_run(cfg)
    psf = dataset_mod.psf_for(cfg.optics)
    io.save_psf(args.out, psf)
    _progress(f"psf stack {psf.values.shape} written to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.dry_run:
        return _dry_run(cfg)
    sample = dataset_mod.generate_sample(cfg, args.seed, args.id)
    files = dataset_mod.write_sample(sample, args.out)
    _progress(f"sample {sample.id} written under {args.out}")
    print(json.dumps({"id": sample.id, "snr": sample.snr, "files": files},
                     sort_keys=True))
    return 0


def cmd_dataset(args) -> int:
    cfg = _load(args)
    if args.dry_run:
        return _dry_run(cfg)
    n_done = [0]

    def tick(msg):
        n_done[0] += 1
        if n_done[0] % 10 == 0 or n_done[0] == args.n:
            _progress(f"{n_done[0]}/{args.n} samples")

    manifest = dataset_mod.generate_dataset(
        cfg, args.n, args.seed, args.out, threads=args.threads, progress=tick)
    _progress(f"manifest: {len(manifest.entries)} entries, "
              f"{len(manifest.failures)} failures")
    return 0


def _image_files(in_dir: Path) -> list[Path]:
    if (in_dir / "images").is_dir():
        in_dir = in_dir / "images"
    files = sorted(p for p in in_dir.glob("*.tif")
                   if not p.stem.endswith("_nf"))
    if not files:
        raise FileNotFoundError(f"no noisy .tif images under {in_dir}")
    return files


def cmd_segment(args) -> int:
    files = _image_files(Path(args.in_dir))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, path in enumerate(files):
        pixels = io.load_tiff_u16(path)
        if args.method == "otsu":
            mask = segmentation.otsu_threshold(pixels)
        else:
            mask = segmentation.adaptive_threshold(
                pixels, window=args.window, offset=args.offset)
        io.save_png_binary(out / f"{path.stem}_pred.png", mask)
        if (i + 1) % 20 == 0 or i + 1 == len(files):
            _progress(f"segmented {i + 1}/{len(files)}")
    return 0


def _pred_files(pred_dir: Path) -> dict[str, Path]:
    preds = {}
    for p in sorted(pred_dir.glob("*.png")):
        stem = p.stem
        if stem.endswith("_pred"):
            stem = stem[:-5]
        preds[stem] = p
    if not preds:
        raise FileNotFoundError(f"no .png predictions under {pred_dir}")
    return preds


def _gt_file(gt_dir: Path, sample_id: str, classes: int) -> Path:
    if (gt_dir / "gt").is_dir():
        gt_dir = gt_dir / "gt"
    suffix = "_gt.png" if classes == 2 else "_gtmc.png"
    path = gt_dir / f"{sample_id}{suffix}"
    if not path.exists():
        raise FileNotFoundError(f"missing ground truth {path}")
    return path


def cmd_eval(args) -> int:
    preds = _pred_files(Path(args.pred))
    per_image = {}
    cms = []
    for sample_id, pred_path in preds.items():
        gt_file = _gt_file(Path(args.gt), sample_id, args.classes)
        if args.classes == 2:
            pred = io.load_png_binary(pred_path).astype(np.int64)
            gt = io.load_png_binary(gt_file).astype(np.int64)
        else:
            pred = io.load_png_labels(pred_path).astype(np.int64)
            gt = io.load_png_labels(gt_file).astype(np.int64)
        cm = evaluation.confusion(pred, gt, args.classes)
        cms.append(cm)
        per_image[sample_id] = {"miou": evaluation.miou(cm),
                                "f1": evaluation.f1(cm)}
    report = {
        "classes": args.classes,
        "n_images": len(cms),
        "aggregate": {
            "per_image_mean": evaluation.aggregate(cms),
            "global_pool": evaluation.aggregate(cms, global_pool=True),
        },
        "per_image": per_image,
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        _progress(f"report written to {args.out}")
    else:
        print(text)
    return 0


def cmd_analyze(args) -> int:
    preds = _pred_files(Path(args.pred))
    mc_dir = Path(args.multiclass)
    if (mc_dir / "gt").is_dir():
        mc_dir = mc_dir / "gt"
    records = []
    for sample_id, pred_path in preds.items():
        mask = io.load_png_binary(pred_path)
        mc_path = mc_dir / f"{sample_id}_gtmc.png"
        if mc_path.exists():
            mc = io.load_png_labels(mc_path)
        else:
            mc = np.zeros(mask.shape, dtype=np.uint8)
        components = segmentation.connected_components(mask)
        from .groundtruth import MultiClassMask
        records.extend(analytics_mod.classify_morphology(
            components, MultiClassMask(pixels=mc), args.pixel_size))
    stats = analytics_mod.morphology_stats(records)
    csv_text = analytics_mod.stats_to_csv(stats)
    if args.out:
        Path(args.out).write_text(csv_text)
        _progress(f"stats written to {args.out}")
    else:
        print(csv_text, end="")
    return 0


def cmd_track(args) -> int:
    mask_files = sorted(Path(args.masks).glob("*.png"))
    if len(mask_files) < 2:
        raise FileNotFoundError(f"need >= 2 mask frames under {args.masks}")
    frames = [segmentation.connected_components(io.load_png_binary(p))
              for p in mask_files]
    params = tracking.TrackParams(gate=args.gate, max_miss=args.max_miss)
    tracks, events = tracking.track_sequence(frames, params)
    track_objs = [{
        "id": t.id,
        "status": t.status,
        "points": [{"frame": p.frame, "x": p.x, "y": p.y,
                    "area": p.area, "status": p.status} for p in t.points],
    } for t in tracks]
    Path(args.out).write_text(json.dumps(track_objs, sort_keys=True, indent=2) + "\n")
    lines = ["type,frame,sources,sinks"]
    lines += [f"{e.type},{e.frame},{'|'.join(map(str, e.sources))},"
              f"{'|'.join(map(str, e.sinks))}" for e in events]
    Path(args.events).write_text("\n".join(lines) + "\n")
    _progress(f"{len(tracks)} tracks, {len(events)} events")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    if args.dry_run:
        return _dry_run(cfg)
    _progress(f"calibrating photon_rate for SNR {args.target}")
    rate = calibrate_snr(args.target, args.tolerance, cfg,
                         seed=args.seed, n_samples=args.n)
    _progress(f"calibrated photon_rate: {rate:.1f}")
    print(f"{rate:.6g}")
    return 0


def cmd_gt_compare(args) -> int:
    cfg = _load(args)
    if args.dry_run:
        return _dry_run(cfg)
    rows = dataset_mod.gt_compare(cfg, args.n, args.seed)
    lines = ["id,physical_px,otsu_px,otsu_eroded_px,noise_threshold_px"]
    lines += [f"{r['id']},{r['physical_px']},{r['otsu_px']},"
              f"{r['otsu_eroded_px']},{r['noise_threshold_px']}" for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        _progress(f"comparison written to {args.out}")
    else:
        print(text, end="")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mitosim",
                     description="Mitochondria fluorescence microscopy simulator")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("psf", help="compute and export the PSF stack")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output multi-page TIFF")
    p.set_defaults(fn=cmd_psf)

    p = sub.add_parser("simulate", help="generate one sample")
    _add_config_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--id", default=None, help="sample id (default: seed hex)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("dataset", help="generate a dataset with manifest")
    _add_config_args(p, seed_default=7)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("MITOSIM_THREADS", "1")))
    p.set_defaults(fn=cmd_dataset)

    p = sub.add_parser("segment", help="baseline segmentation of noisy images")
    p.add_argument("--method", choices=("otsu", "adaptive"), required=True)
    p.add_argument("--in", dest="in_dir", required=True,
                   help="dataset root or images directory")
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=31)
    p.add_argument("--offset", type=float, default=50.0)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--classes", type=int, choices=(2, 3), default=2)
    p.add_argument("--out", default=None, help="report JSON (default stdout)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("analyze", help="morphology statistics of predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--multiclass", required=True,
                   help="directory of *_gtmc.png masks (overlap source)")
    p.add_argument("--out", default=None, help="stats CSV (default stdout)")
    p.add_argument("--pixel-size", type=float, default=80.0)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("track", help="track components across mask frames")
    p.add_argument("--masks", required=True,
                   help="directory of per-frame binary masks (sorted order)")
    p.add_argument("--out", required=True, help="tracks JSON")
    p.add_argument("--events", required=True, help="events CSV")
    p.add_argument("--gate", type=float, default=20.0)
    p.add_argument("--max-miss", type=int, default=2)
    p.set_defaults(fn=cmd_track)

    p = sub.add_parser("calibrate-snr",
                       help="find the photon rate hitting a target SNR")
    _add_config_args(p)
    p.add_argument("--target", type=float, default=3.0)
    p.add_argument("--tolerance", type=float, default=0.25)
    p.add_argument("--n", type=int, default=20, help="samples per measurement")
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("gt-compare",
                       help="compare GT techniques against physical GT")
    _add_config_args(p)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--out", default=None, help="CSV (default stdout)")
    p.set_defaults(fn=cmd_gt_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as exc:
        print(f"mitosim: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"mitosim: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
