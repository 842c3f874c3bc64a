"""Deterministic raster and metadata I/O.

Noisy images are 16-bit little-endian grayscale TIFF; noise-free images are
32-bit float TIFF; binary masks are 8-bit PNG with values {0, 255};
multi-class masks are 8-bit PNG with raw labels {0, 1, 2}. PSF stacks are
multi-page float32 TIFF with a JSON sidecar describing the grid. All
writers avoid timestamps and unordered dicts so identical data yields
identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .imaging import FloatImage, Image
from .optics import PsfStack


def save_tiff_u16(path, pixels: np.ndarray) -> None:
    arr = np.ascontiguousarray(pixels.astype("<u2"))
    h, w = arr.shape
    im = PILImage.frombytes("I;16", (w, h), arr.tobytes())
    im.save(str(path), format="TIFF")


def load_tiff_u16(path) -> np.ndarray:
    with PILImage.open(str(path)) as im:
        arr = np.array(im)
    if arr.dtype != np.uint16:
        raise ValueError(f"{path}: expected 16-bit grayscale TIFF")
    return arr


def save_tiff_f32(path, pixels: np.ndarray) -> None:
    arr = np.ascontiguousarray(pixels.astype("<f4"))
    h, w = arr.shape
    im = PILImage.frombytes("F", (w, h), arr.tobytes())
    im.save(str(path), format="TIFF")


def load_tiff_f32(path) -> np.ndarray:
    with PILImage.open(str(path)) as im:
        arr = np.array(im)
    if arr.dtype != np.float32:
        raise ValueError(f"{path}: expected 32-bit float TIFF")
    return arr


def save_png_binary(path, mask: np.ndarray) -> None:
    """Binary mask as {0, 255} 8-bit PNG."""
    arr = (np.asarray(mask).astype(bool) * np.uint8(255))
    PILImage.fromarray(arr, mode="L").save(str(path), format="PNG")


def load_png_binary(path) -> np.ndarray:
    with PILImage.open(str(path)) as im:
        arr = np.array(im.convert("L"))
    return arr > 0


def save_png_labels(path, labels: np.ndarray) -> None:
    """Small-integer label map as raw 8-bit PNG values."""
    arr = np.asarray(labels)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("labels must fit in 8 bits")
    PILImage.fromarray(arr.astype(np.uint8), mode="L").save(str(path), format="PNG")


def load_png_labels(path) -> np.ndarray:
    with PILImage.open(str(path)) as im:
        return np.array(im.convert("L"))


def save_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())


def save_psf(path, psf: PsfStack) -> None:
    """Multi-page float32 TIFF (one page per z plane) plus JSON sidecar."""
    pages = [
        PILImage.frombytes(
            "F", (psf.values.shape[2], psf.values.shape[1]),
            np.ascontiguousarray(plane.astype("<f4")).tobytes())
        for plane in psf.values
    ]
    pages[0].save(str(path), format="TIFF", save_all=True,
                  append_images=pages[1:])
    sidecar = {
        "axial_step_nm": psf.axial_step,
        "lateral_step_nm": psf.lateral_step,
        "n_planes": int(psf.values.shape[0]),
        "normalization": psf.normalization,
        "shape": list(psf.values.shape),
    }
    save_json(str(path) + ".json", sidecar)


def noisy_path(images_dir, sample_id: str) -> Path:
    return Path(images_dir) / f"{sample_id}.tif"


def noisefree_path(images_dir, sample_id: str) -> Path:
    return Path(images_dir) / f"{sample_id}_nf.tif"


def gt_path(gt_dir, sample_id: str) -> Path:
    return Path(gt_dir) / f"{sample_id}_gt.png"


def gtmc_path(gt_dir, sample_id: str) -> Path:
    return Path(gt_dir) / f"{sample_id}_gtmc.png"


def load_image(path, pixel_size: float) -> Image:
    return Image(pixels=load_tiff_u16(path), pixel_size=pixel_size)


def load_float_image(path, pixel_size: float) -> FloatImage:
    return FloatImage(pixels=load_tiff_f32(path).astype(np.float64),
                      pixel_size=pixel_size)
