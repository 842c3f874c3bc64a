"""mitosim: simulated fluorescence microscopy of mitochondria with physical ground truth."""

from .config import Config, ConfigError, load_config
from .dataset import Manifest, Sample, augment, generate_dataset, generate_sample
from .errors import CalibrationError
from .geometry import GeometryParams, Mitochondrion, Skeleton, gen_skeleton
from .groundtruth import (InstanceMask, MultiClassMask, merge_binary,
                          multiclass_gt, physical_gt)
from .imaging import (CameraParams, FloatImage, Image, add_noise,
                      calibrate_snr, measure_snr, montage, render)
from .optics import OpticalParams, PsfStack, compute_psf, lateral_fwhm
from .photophysics import EmitterSet, KineticsParams, place_emitters, simulate_photons
from .segmentation import (LabelMap, adaptive_threshold, connected_components,
                           otsu_threshold)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError", "CameraParams", "Config", "ConfigError", "EmitterSet",
    "FloatImage", "GeometryParams", "Image", "InstanceMask", "KineticsParams",
    "LabelMap", "Manifest", "Mitochondrion", "MultiClassMask", "OpticalParams",
    "PsfStack", "Sample", "Skeleton", "adaptive_threshold", "add_noise",
    "augment", "calibrate_snr", "compute_psf", "connected_components",
    "gen_skeleton", "generate_dataset", "generate_sample", "lateral_fwhm",
    "load_config", "measure_snr", "merge_binary", "montage", "multiclass_gt",
    "otsu_threshold", "physical_gt", "place_emitters", "render",
    "simulate_photons",
]
