"""Command line interface: train and predict."""

import argparse
import sys

from .config import TrainConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mito-trainer",
                     description="U-Net training harness for simulator datasets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--dataset", required=True, help="dataset root with manifest.jsonl")
    p.add_argument("--out", required=True, help="run directory for checkpoint and logs")
    p.add_argument("--classes", type=int, choices=(2, 3), default=2)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--crop", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-factor", type=float, default=0.5)
    p.add_argument("--lr-patience", type=int, default=3)
    p.add_argument("--early-stop", type=int, default=8, dest="early_stop")
    p.add_argument("--no-flip", action="store_true")
    p.add_argument("--no-rotate", action="store_true")
    p.add_argument("--no-crop", action="store_true",
                   help="train on full images instead of random crops")
    p.add_argument("--val-max", type=int, default=0,
                   help="validate on at most this many images (0 = all)")
    p.add_argument("--backbone", choices=("resnet34", "small"),
                   default="resnet34")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="write predicted masks for a directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True,
                   help="images dir or dataset root")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, choices=(2, 3), default=0,
                   help="expected class count (checkpoint must match)")

    p = sub.add_parser("check",
                       help="collapse detector: predicted vs ground-truth "
                            "class frequencies on a split")
    p.add_argument("--dataset", required=True,
                   help="dataset root with manifest.jsonl")
    p.add_argument("--pred", required=True,
                   help="directory of *_pred.png masks")
    p.add_argument("--classes", type=int, choices=(2, 3), default=2)
    p.add_argument("--split", choices=("train", "val", "test"),
                   default="test")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "train":
            from .train import train

            cfg = TrainConfig(
                dataset_dir=args.dataset, out_dir=args.out,
                classes=args.classes, epochs=args.epochs,
                batch_size=args.batch_size, crop=args.crop, lr=args.lr,
                lr_factor=args.lr_factor, lr_patience=args.lr_patience,
                early_stop_patience=args.early_stop, flip=not args.no_flip,
                rotate=not args.no_rotate, random_crop=not args.no_crop,
                val_max=args.val_max, backbone=args.backbone, seed=args.seed)
            metrics = train(cfg)
            print(f"[trainer] best val loss {metrics['best_val_loss']:.4f} "
                  f"(epoch {metrics['best_epoch']})", flush=True)
        elif args.command == "predict":
            from .predict import predict_dir

            predict_dir(args.checkpoint, args.images, args.out,
                        classes=args.classes)
        else:
            from .predict import class_frequency_check

            report = class_frequency_check(args.dataset, args.pred,
                                           classes=args.classes,
                                           split=args.split)
            for c in report["classes"]:
                print(f"[trainer] class {c['label']}: gt {c['gt_freq']:.4g} "
                      f"pred {c['pred_freq']:.4g}", flush=True)
            if report["collapsed"]:
                print("error: class collapse on the "
                      f"{report['split']} split: predicted frequencies more "
                      "than an order of magnitude off", file=sys.stderr)
                return 1
            print(f"[trainer] {report['split']} split class frequencies "
                  "within an order of magnitude of ground truth", flush=True)
        return 0
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
