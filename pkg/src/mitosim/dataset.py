"""End-to-end sample generation, on-disk dataset layout, and augmentation.

A sample is four independently simulated 128x128 tiles montaged into one
256x256 field; each tile holds one or two mitochondria. Noise is applied
once, to the montage. Ground truth comes from the emitter positions alone.

Determinism contract: every random draw in a sample flows from its
sample_seed through fixed stream tags, one substream per (stage, tile,
instance), so samples are independent of each other and of the order in
which worker threads run. generate_dataset derives sample_seed(i) =
stable_hash(master_seed, i) and writes manifest entries ordered by index;
two runs with the same master seed are byte-identical at any thread count.
"""

from __future__ import annotations

import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .config import Config
from .errors import CalibrationError
from .geometry import Skeleton, gen_skeleton, make_mitochondrion
from .groundtruth import (InstanceMask, MultiClassMask, merge_binary,
                          multiclass_gt, noise_threshold_gt, otsu_eroded_gt,
                          otsu_gt, physical_gt)
from .imaging import (CameraParams, FloatImage, Image, add_noise, measure_snr,
                      montage, render)
from .io import (gt_path, gtmc_path, load_json, noisefree_path, noisy_path,
                 save_json, save_png_binary, save_png_labels, save_tiff_f32,
                 save_tiff_u16)
from .optics import PsfStack, compute_psf
from .photophysics import place_emitters, simulate_photons
from .rng import (STREAM_GEOMETRY, STREAM_KINETICS, STREAM_LAYOUT,
                  STREAM_NOISE, STREAM_PLACEMENT, STREAM_SPLIT, make_rng,
                  stable_hash)

SPLIT_RATIOS = (("train", 0.7), ("val", 0.2), ("test", 0.1))

_PSF_CACHE: dict[tuple, PsfStack] = {}
_PSF_LOCK = threading.Lock()


@dataclass
class Sample:
    id: str
    noisy: Image
    noisefree: FloatImage
    binary_gt: np.ndarray              # (h, w) bool
    multiclass: MultiClassMask
    instances: list[InstanceMask]
    emitters: list                     # EmitterSet per instance, montage frame
    metadata: dict
    snr: float | None


@dataclass
class Manifest:
    entries: list[dict]
    failures: list[dict]

    def save(self, path) -> None:
        import json
        lines = [json.dumps(e, sort_keys=True) for e in self.entries]
        lines.append(json.dumps(
            {"footer": True, "generated": len(self.entries),
             "failures": self.failures}, sort_keys=True))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Manifest":
        import json
        entries, failures = [], []
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("footer"):
                failures = obj.get("failures", [])
            else:
                entries.append(obj)
        return cls(entries=entries, failures=failures)

    def split(self, name: str) -> list[dict]:
        return [e for e in self.entries if e["split"] == name]


def psf_for(optics) -> PsfStack:
    """Per-process PSF cache keyed by the full optical parameter set."""
    key = tuple(getattr(optics, f.name) for f in fields(optics))
    with _PSF_LOCK:
        if key not in _PSF_CACHE:
            _PSF_CACHE[key] = compute_psf(optics)
        return _PSF_CACHE[key]


def _stage(name: str, fn: Callable):
    try:
        return fn()
    except Exception as exc:
        raise RuntimeError(f"stage {name}: {exc}") from exc


def generate_sample(config: Config, sample_seed: int,
                    sample_id: str | None = None) -> Sample:
    """Simulate one montaged sample with physical ground truth."""
    config.validate()
    sample_seed = int(sample_seed)
    if sample_id is None:
        sample_id = f"{sample_seed:016x}"
    tile_cam = config.camera
    full_cam = replace(tile_cam, width=2 * tile_cam.width,
                       height=2 * tile_cam.height)
    psf = _stage("psf", lambda: psf_for(config.optics))
    kin = config.photophysics.kinetics()
    layout_rng = make_rng(sample_seed, STREAM_LAYOUT)

    tile_w_nm = tile_cam.width * tile_cam.pixel_size
    tile_h_nm = tile_cam.height * tile_cam.pixel_size
    box_w, box_h = config.geometry.knot_box

    tile_sets = [[] for _ in range(4)]   # emitter sets in tile coordinates
    montage_sets = []                    # same sets in montage coordinates
    meta_instances = []
    iid = 0
    for t in range(4):
        n_mito = 2 if layout_rng.random() < config.dataset.pair_probability else 1
        tx = (t % 2) * tile_w_nm
        ty = (t // 2) * tile_h_nm
        for m in range(n_mito):
            iid += 1
            geo_rng = make_rng(sample_seed, STREAM_GEOMETRY, t, m)

            def make_geometry():
                skel = gen_skeleton(config.geometry, geo_rng)
                radius = geo_rng.uniform(config.geometry.radius_min,
                                         config.geometry.radius_max)
                ox = geo_rng.uniform(0.0, max(tile_w_nm - box_w, 0.0))
                oy = geo_rng.uniform(0.0, max(tile_h_nm - box_h, 0.0))
                moved = Skeleton(points=skel.points + np.array([ox, oy, 0.0]),
                                 arc_step=skel.arc_step,
                                 knots=skel.knots + np.array([ox, oy, 0.0]))
                return make_mitochondrion(moved, radius, iid)

            mito = _stage("geometry", make_geometry)
            eset = _stage("placement", lambda: place_emitters(
                mito, config.photophysics.density,
                make_rng(sample_seed, STREAM_PLACEMENT, t, m)))
            eset = _stage("kinetics", lambda: simulate_photons(
                eset, kin, stable_hash(sample_seed, STREAM_KINETICS, t, m)))
            tile_sets[t].append(eset)
            montage_sets.append(eset.translated((tx, ty, 0.0)))
            meta_instances.append({
                "instance_id": iid,
                "tile": t,
                "knots_nm": (mito.skeleton.knots
                             + np.array([tx, ty, 0.0])).tolist(),
                "radius_nm": float(mito.radius),
                "length_nm": float(mito.skeleton.length),
                "emitter_count": int(len(eset.positions)),
                "photons_total": int(eset.photons.sum()),
                "photons_mean": float(eset.photons.mean())
                if len(eset.positions) else 0.0,
            })

    tiles = [_stage("render", lambda ts=ts: render(ts, psf, tile_cam))
             for ts in tile_sets]
    noisefree = _stage("montage", lambda: montage(tiles))
    noisy = _stage("noise", lambda: add_noise(
        noisefree, full_cam, make_rng(sample_seed, STREAM_NOISE)))

    def make_gt():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return [physical_gt(es, full_cam) for es in montage_sets]

    instance_masks = _stage("groundtruth", make_gt)
    binary = merge_binary(instance_masks)
    multi = multiclass_gt(instance_masks)
    try:
        snr = measure_snr(noisy, binary)
    except ValueError:
        snr = None

    metadata = {
        "id": sample_id,
        "seed": sample_seed,
        "pixel_size_nm": tile_cam.pixel_size,
        "width": full_cam.width,
        "height": full_cam.height,
        "photon_rate": config.photophysics.photon_rate,
        "snr": snr,
        "instances": meta_instances,
    }
    return Sample(id=sample_id, noisy=noisy, noisefree=noisefree,
                  binary_gt=binary, multiclass=multi,
                  instances=instance_masks, emitters=montage_sets,
                  metadata=metadata, snr=snr)


def write_sample(sample: Sample, root) -> dict:
    """Write a sample under root (images/, gt/, meta/); returns relative paths."""
    root = Path(root)
    for sub in ("images", "gt", "meta"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    save_tiff_u16(noisy_path(root / "images", sample.id), sample.noisy.pixels)
    save_tiff_f32(noisefree_path(root / "images", sample.id),
                  sample.noisefree.pixels)
    save_png_binary(gt_path(root / "gt", sample.id), sample.binary_gt)
    save_png_labels(gtmc_path(root / "gt", sample.id), sample.multiclass.pixels)
    save_json(root / "meta" / f"{sample.id}.json", sample.metadata)
    return {
        "image": f"images/{sample.id}.tif",
        "noisefree": f"images/{sample.id}_nf.tif",
        "gt": f"gt/{sample.id}_gt.png",
        "gtmc": f"gt/{sample.id}_gtmc.png",
        "meta": f"meta/{sample.id}.json",
    }


def assign_splits(n: int, master_seed: int) -> list[str]:
    """70:20:10 split assignment from a seeded shuffle (largest remainder).

    Remainders are rounded to 9 decimals so ties (e.g. n=12 giving .4/.4)
    break by section order, not by float representation error.
    """
    targets = [round(n * r, 9) for _, r in SPLIT_RATIOS]
    counts = [int(np.floor(t)) for t in targets]
    leftover = n - sum(counts)
    by_frac = sorted(range(3), key=lambda i: (-round(targets[i] - counts[i], 9), i))
    for i in range(leftover):
        counts[by_frac[i % 3]] += 1
    perm = make_rng(master_seed, STREAM_SPLIT).permutation(n)
    splits = [""] * n
    pos = 0
    for (name, _), c in zip(SPLIT_RATIOS, counts):
        for idx in perm[pos:pos + c]:
            splits[idx] = name
        pos += c
    return splits


def generate_dataset(config: Config, n: int, master_seed: int, out_dir,
                     threads: int = 1,
                     progress: Callable[[str], None] | None = None) -> Manifest:
    """Generate n samples under out_dir and write manifest.jsonl.

    Per-sample failures are recorded in the manifest footer and do not stop
    the run. The PSF is computed once up front so worker threads only run
    per-sample simulation.
    """
    if n < 10:
        raise ValueError("n must be at least 10")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    psf_for(config.optics)
    splits = assign_splits(n, master_seed)
    ids = [f"{i:05d}" for i in range(n)]

    def worker(i: int):
        seed_i = stable_hash(master_seed, i)
        sample = generate_sample(config, seed_i, ids[i])
        files = write_sample(sample, out_dir)
        if progress is not None:
            progress(f"sample {ids[i]} done")
        return {"id": ids[i], "split": splits[i], "seed": seed_i,
                "snr": sample.snr, "files": files}

    results: list[dict | None] = [None] * n
    errors: list[dict] = []
    if threads == 1:
        for i in range(n):
            try:
                results[i] = worker(i)
            except Exception as exc:
                errors.append({"index": i, "id": ids[i], "error": str(exc)})
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(worker, i): i for i in range(n)}
            for fut, i in futures.items():
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    errors.append({"index": i, "id": ids[i], "error": str(exc)})

    errors.sort(key=lambda e: e["index"])
    manifest = Manifest(entries=[r for r in results if r is not None],
                        failures=errors)
    manifest.save(out_dir / "manifest.jsonl")
    return manifest


_FLIPS = {"flip_h": lambda a: a[:, ::-1], "flip_v": lambda a: a[::-1, :],
          "rot90": lambda a: np.rot90(a, 1), "rot180": lambda a: np.rot90(a, 2),
          "rot270": lambda a: np.rot90(a, 3)}


def augment(sample: Sample, op: str, box: tuple[int, int, int, int] | None = None
            ) -> Sample:
    """Apply one geometric op to the image and every mask identically.

    op is one of flip_h, flip_v, rot90, rot180, rot270, crop; crop takes
    box = (x, y, w, h) in pixels. Pixel size never changes (no resizing).
    Augmented samples are raster-level objects: emitter lists are dropped
    rather than transformed.
    """
    if op == "crop":
        if box is None:
            raise ValueError("crop requires box=(x, y, w, h)")
        x, y, w, h = box
        height, width = sample.noisy.pixels.shape
        if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > width or y + h > height:
            raise ValueError("crop window out of bounds")
        f = lambda a: a[y:y + h, x:x + w]
    elif op in _FLIPS:
        f = _FLIPS[op]
    else:
        raise ValueError(f"unknown augmentation op: {op}")

    t = lambda a: np.ascontiguousarray(f(a))
    metadata = dict(sample.metadata)
    metadata["augmented"] = metadata.get("augmented", []) + [
        {"op": op, "box": list(box)} if op == "crop" else {"op": op}]
    return Sample(
        id=sample.id,
        noisy=Image(pixels=t(sample.noisy.pixels),
                    pixel_size=sample.noisy.pixel_size),
        noisefree=FloatImage(pixels=t(sample.noisefree.pixels),
                             pixel_size=sample.noisefree.pixel_size),
        binary_gt=t(sample.binary_gt),
        multiclass=MultiClassMask(pixels=t(sample.multiclass.pixels)),
        instances=[InstanceMask(pixels=t(im.pixels), instance_id=im.instance_id)
                   for im in sample.instances],
        emitters=[],
        metadata=metadata,
        snr=sample.snr)


def gt_compare(config: Config, n: int, seed: int) -> list[dict]:
    """Paired foreground areas of the four GT techniques on fresh samples.

    The SNR-scaled threshold runs on the baseline-subtracted noisy image:
    the peak/SNR rule presumes counts measured from zero, and the sensor
    baseline would otherwise dominate both sides of the comparison. The
    per-sample SNR used is the measured one (falling back to 3.0 when a
    sample has no measurable foreground).
    """
    psf = psf_for(config.optics)
    rows = []
    for i in range(n):
        sample = generate_sample(config, stable_hash(seed, i), f"cmp{i:04d}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            otsu_mask = otsu_gt(sample.noisefree)
            eroded_mask = otsu_eroded_gt(sample.noisefree, psf)
        signal = sample.noisy.pixels.astype(np.int64) - int(round(
            config.camera.baseline))
        np.clip(signal, 0, None, out=signal)
        noise_mask = noise_threshold_gt(
            signal, sample.snr if sample.snr else 3.0)
        phys = int(sample.binary_gt.sum())
        rows.append({
            "id": sample.id,
            "physical_px": phys,
            "otsu_px": int(otsu_mask.sum()),
            "otsu_eroded_px": int(eroded_mask.sum()),
            "noise_threshold_px": int(noise_mask.sum()),
        })
    return rows
