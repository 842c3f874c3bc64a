"""Dataset access through the simulator's documented on-disk format.

Reads manifest.jsonl plus the TIFF/PNG files it points to. Splits are taken
from the manifest's `split` field as-is, never re-shuffled. Augmentation is
restricted to flips, 90-degree rotations, and crops; nothing here ever
resamples pixel values, so the physical pixel size is preserved.
"""

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

SPLITS = ("train", "val", "test")


def read_manifest(dataset_dir) -> list[dict]:
    """Manifest entries in file order; the trailing footer line is skipped."""
    path = Path(dataset_dir) / "manifest.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"no manifest.jsonl under {dataset_dir}")
    entries = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if not obj.get("footer"):
                entries.append(obj)
    if not entries:
        raise ValueError(f"manifest {path} contains no samples")
    return entries


def split_entries(entries: list[dict], split: str) -> list[dict]:
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    kept = [e for e in entries if e["split"] == split]
    if not kept:
        raise ValueError(f"manifest has no {split!r} entries")
    return kept


def _load_file(root: Path, entry: dict, key: str) -> np.ndarray:
    rel = entry["files"][key]
    path = root / rel
    if not path.exists():
        raise FileNotFoundError(
            f"manifest entry {entry['id']}: missing file {rel}")
    with Image.open(path) as im:
        return np.array(im)


def load_image(root: Path, entry: dict) -> np.ndarray:
    """Noisy image as float32, standardized per image."""
    arr = _load_file(root, entry, "image").astype(np.float32)
    return (arr - arr.mean()) / (arr.std() + 1e-6)


def load_mask(root: Path, entry: dict, classes: int) -> np.ndarray:
    key = "gt" if classes == 2 else "gtmc"
    arr = _load_file(root, entry, key)
    if classes == 2:
        return (arr > 0).astype(np.int64)
    return arr.astype(np.int64)


class MitoDataset(Dataset):
    """One split of a simulator dataset, with optional train augmentation."""

    def __init__(self, dataset_dir, entries: list[dict], classes: int = 2,
                 crop: int = 0, flip: bool = False, rotate: bool = False,
                 seed: int = 0):
        self.root = Path(dataset_dir)
        self.entries = entries
        self.classes = classes
        self.crop = crop
        self.flip = flip
        self.rotate = rotate
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int):
        entry = self.entries[i]
        img = load_image(self.root, entry)
        mask = load_mask(self.root, entry, self.classes)
        if img.shape != mask.shape:
            raise ValueError(
                f"manifest entry {entry['id']}: image {img.shape} and "
                f"mask {mask.shape} dimensions differ")
        if self.crop:
            h, w = img.shape
            if self.crop > h or self.crop > w:
                raise ValueError(
                    f"crop {self.crop} exceeds image size {h}x{w}; "
                    "cropping never pads or resizes")
            y0 = int(self.rng.integers(0, h - self.crop + 1))
            x0 = int(self.rng.integers(0, w - self.crop + 1))
            img = img[y0:y0 + self.crop, x0:x0 + self.crop]
            mask = mask[y0:y0 + self.crop, x0:x0 + self.crop]
        if self.flip:
            if self.rng.random() < 0.5:
                img, mask = img[:, ::-1], mask[:, ::-1]
            if self.rng.random() < 0.5:
                img, mask = img[::-1, :], mask[::-1, :]
        if self.rotate:
            k = int(self.rng.integers(0, 4))
            if k:
                img, mask = np.rot90(img, k), np.rot90(mask, k)
        return (torch.from_numpy(np.ascontiguousarray(img)).unsqueeze(0),
                torch.from_numpy(np.ascontiguousarray(mask)))
