"""Inference: checkpoint + images directory -> PNG masks.

Masks use the simulator's formats: binary masks as {0, 255} 8-bit PNG,
3-class label maps as raw 8-bit values, named `<image stem>_pred.png`.
"""

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .model import ResUNet


def load_checkpoint(path) -> tuple[ResUNet, dict]:
    state = torch.load(path, map_location="cpu", weights_only=True)
    model = ResUNet(classes=state["classes"], backbone=state["backbone"])
    model.load_state_dict(state["model"])
    model.eval()
    return model, state


def image_files(images_dir) -> list[Path]:
    """Noisy TIFFs in sorted order; descends into an images/ subdirectory."""
    root = Path(images_dir)
    if (root / "images").is_dir():
        root = root / "images"
    files = sorted(p for p in root.glob("*.tif") if not p.stem.endswith("_nf"))
    if not files:
        raise FileNotFoundError(f"no noisy .tif images under {images_dir}")
    return files


def predict_image(model: ResUNet, pixels: np.ndarray) -> np.ndarray:
    arr = pixels.astype(np.float32)
    arr = (arr - arr.mean()) / (arr.std() + 1e-6)
    h, w = arr.shape
    if h % 32 or w % 32:
        raise ValueError(f"image dimensions must be multiples of 32, "
                         f"got {h}x{w}")
    with torch.no_grad():
        logits = model(torch.from_numpy(arr)[None, None])
    return logits.argmax(dim=1)[0].numpy().astype(np.uint8)


def save_mask(path, labels: np.ndarray, classes: int) -> None:
    if classes == 2:
        arr = (labels > 0).astype(np.uint8) * np.uint8(255)
    else:
        arr = labels.astype(np.uint8)
    Image.fromarray(arr, mode="L").save(str(path), format="PNG")


def class_frequency_check(dataset_dir, pred_dir, classes: int = 2,
                          split: str = "test") -> dict:
    """Collapse detector: predicted class frequencies on a split must stay
    within an order of magnitude of the ground-truth frequencies."""
    from .data import load_mask, read_manifest, split_entries

    root = Path(dataset_dir)
    entries = split_entries(read_manifest(dataset_dir), split)
    gt_counts = np.zeros(classes, dtype=np.int64)
    pred_counts = np.zeros(classes, dtype=np.int64)
    for entry in entries:
        gt = load_mask(root, entry, classes)
        pred_path = Path(pred_dir) / f"{entry['id']}_pred.png"
        if not pred_path.exists():
            raise FileNotFoundError(f"manifest entry {entry['id']}: "
                                    f"missing prediction {pred_path.name}")
        with Image.open(pred_path) as im:
            pred = np.array(im).astype(np.int64)
        if classes == 2:
            pred = (pred > 0).astype(np.int64)
        elif pred.max() >= classes:
            raise ValueError(f"{pred_path.name}: label {int(pred.max())} "
                             f"outside {classes} classes")
        if pred.shape != gt.shape:
            raise ValueError(f"{pred_path.name}: shape {pred.shape} does not "
                             f"match ground truth {gt.shape}")
        gt_counts += np.bincount(gt.ravel(), minlength=classes)[:classes]
        pred_counts += np.bincount(pred.ravel(), minlength=classes)[:classes]
    total = int(gt_counts.sum())
    report = {"split": split, "n_images": len(entries),
              "classes": [], "collapsed": False}
    for c in range(classes):
        gt_f = gt_counts[c] / total
        pred_f = pred_counts[c] / total
        ok = gt_f == 0.0 or gt_f / 10.0 <= pred_f <= gt_f * 10.0
        report["classes"].append(
            {"label": c, "gt_freq": gt_f, "pred_freq": pred_f, "ok": ok})
        if not ok:
            report["collapsed"] = True
    return report


def predict_dir(checkpoint, images_dir, out_dir, classes: int = 0) -> int:
    """Predict every noisy image; returns the number of masks written."""
    model, state = load_checkpoint(checkpoint)
    if classes and classes != state["classes"]:
        raise ValueError(f"checkpoint has {state['classes']} classes, "
                         f"{classes} requested")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = image_files(images_dir)
    for i, path in enumerate(files):
        with Image.open(path) as im:
            pixels = np.array(im)
        labels = predict_image(model, pixels)
        save_mask(out / f"{path.stem}_pred.png", labels, state["classes"])
        if (i + 1) % 20 == 0 or i + 1 == len(files):
            print(f"[trainer] predicted {i + 1}/{len(files)}", flush=True)
    return len(files)
