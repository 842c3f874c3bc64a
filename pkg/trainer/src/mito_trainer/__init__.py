"""Simulation-supervised U-Net training harness.

Trains a segmentation network on a simulator dataset directory (read only
through its documented on-disk format: manifest.jsonl, TIFF images, PNG
masks) and writes predicted masks in the same PNG format, so the primary
toolchain's `eval` and `track` commands consume them directly.
"""

from .config import TrainConfig
from .model import ResUNet

__all__ = ["TrainConfig", "ResUNet"]
