"""Ground-truth masks: physical (geometry-derived) and image-derived variants.

The physical mask is the canonical ground truth: each mitochondrion's
emitters are projected onto a 1 nm grid, binarized, and max-pooled down to
the camera pixel size. Because pooling windows tile the plane, that whole
procedure collapses to marking pixel floor(position / pixel_size) per
emitter, which is how it is computed here; the explicit grid formulation is
kept for intuition (and is reproduced verbatim in the test suite as an
oracle). The mask therefore depends only on emitter positions and pixel
geometry, never on photon counts, PSF, or noise.

Three image-derived alternatives (Otsu on the noise-free image, its eroded
variant, and SNR-scaled peak thresholding on the noisy image) are provided
for comparison experiments; they are not used to label datasets.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .imaging import CameraParams, FloatImage, Image
from .optics import PsfStack, lateral_fwhm
from .photophysics import EmitterSet
from .segmentation import otsu_threshold


@dataclass
class InstanceMask:
    """Binary silhouette of one mitochondrion on the camera grid."""

    pixels: np.ndarray   # (h, w) bool
    instance_id: int


@dataclass
class MultiClassMask:
    """Per-pixel labels: 0 background, 1 single instance, 2 overlap."""

    pixels: np.ndarray   # (h, w) uint8


def physical_gt(emitter_set: EmitterSet, cam: CameraParams) -> InstanceMask:
    """Project emitters to pixels: occupied iff the pixel holds an emitter.

    Equivalent to 1 nm rasterization followed by max-pooling with pool size
    and stride pixel_size/1 nm: a pooled cell is set exactly when some
    emitter's floor(coord) lands in it, i.e. floor(position / pixel_size)
    indexes the set pixel directly.
    """
    cam.validate()
    mask = np.zeros((cam.height, cam.width), dtype=bool)
    if len(emitter_set.positions) == 0:
        warnings.warn("empty emitter set produces an empty mask")
        return InstanceMask(pixels=mask, instance_id=emitter_set.instance_id)
    px = np.floor(emitter_set.positions[:, 0] / cam.pixel_size).astype(np.int64)
    py = np.floor(emitter_set.positions[:, 1] / cam.pixel_size).astype(np.int64)
    keep = (px >= 0) & (px < cam.width) & (py >= 0) & (py < cam.height)
    mask[py[keep], px[keep]] = True
    return InstanceMask(pixels=mask, instance_id=emitter_set.instance_id)


def _check_dims(instances: Sequence[InstanceMask]) -> None:
    if not instances:
        raise ValueError("need at least one instance mask")
    shape = instances[0].pixels.shape
    for inst in instances:
        if inst.pixels.shape != shape:
            raise ValueError("instance masks must share dimensions")


def merge_binary(instances: Sequence[InstanceMask]) -> np.ndarray:
    """Pixelwise union of instance masks."""
    _check_dims(instances)
    out = np.zeros(instances[0].pixels.shape, dtype=bool)
    for inst in instances:
        out |= inst.pixels
    return out


def multiclass_gt(instances: Sequence[InstanceMask]) -> MultiClassMask:
    """Label each pixel by how many instances cover it, saturating at 2."""
    _check_dims(instances)
    count = np.zeros(instances[0].pixels.shape, dtype=np.int64)
    for inst in instances:
        count += inst.pixels
    return MultiClassMask(pixels=np.minimum(count, 2).astype(np.uint8))


def otsu_gt(noisefree: FloatImage) -> np.ndarray:
    """Otsu threshold applied to the noise-free image."""
    return otsu_threshold(noisefree.pixels)


def erosion_radius(psf: PsfStack, pixel_size: float) -> int:
    """Disk radius in pixels for half the in-focus FWHM."""
    return int(round(lateral_fwhm(psf, 0.0) / 2.0 / pixel_size))


def _disk(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    return xx * xx + yy * yy <= radius * radius


def otsu_eroded_gt(noisefree: FloatImage, psf: PsfStack) -> np.ndarray:
    """Otsu mask eroded by a disk of half the PSF FWHM.

    The erosion compensates the blur-driven dilation of the thresholded
    silhouette. A sub-pixel radius rounds to 0 and leaves the mask unchanged
    (with a warning), since erosion by a single-pixel disk is the identity.
    """
    mask = otsu_gt(noisefree)
    radius = erosion_radius(psf, noisefree.pixel_size)
    if radius == 0:
        warnings.warn("erosion radius rounded to 0 pixels; mask unchanged")
        return mask
    return ndimage.binary_erosion(mask, structure=_disk(radius))


def noise_threshold_gt(noisy: Image, snr: float) -> np.ndarray:
    """Threshold the noisy image at its 99th-percentile peak divided by SNR."""
    if snr <= 0:
        raise ValueError("snr must be positive")
    pixels = noisy.pixels if hasattr(noisy, "pixels") else np.asarray(noisy)
    threshold = np.percentile(pixels.astype(np.float64), 99) / snr
    return pixels > threshold
