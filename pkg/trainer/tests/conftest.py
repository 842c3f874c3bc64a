import json

import numpy as np
import pytest
from PIL import Image


def _write_sample(root, sample_id, split, rng):
    """One 64x64 sample in the simulator's on-disk format."""
    mask = np.zeros((64, 64), dtype=bool)
    y, x = rng.integers(8, 40, size=2)
    mask[y:y + 16, x:x + 16] = True
    noisy = np.where(mask, 3000, 100).astype(np.float64)
    noisy = rng.poisson(noisy).clip(0, 65535).astype(np.uint16)
    mc = mask.astype(np.uint8)

    Image.fromarray(noisy).save(root / "images" / f"{sample_id}.tif")
    Image.fromarray(noisy.astype(np.float32)).save(
        root / "images" / f"{sample_id}_nf.tif")
    Image.fromarray(mask.astype(np.uint8) * 255, mode="L").save(
        root / "gt" / f"{sample_id}_gt.png")
    Image.fromarray(mc, mode="L").save(root / "gt" / f"{sample_id}_gtmc.png")
    (root / "meta" / f"{sample_id}.json").write_text("{}")
    return {
        "id": sample_id,
        "split": split,
        "seed": int(rng.integers(0, 2**31)),
        "snr": 5.0,
        "files": {
            "image": f"images/{sample_id}.tif",
            "noisefree": f"images/{sample_id}_nf.tif",
            "gt": f"gt/{sample_id}_gt.png",
            "gtmc": f"gt/{sample_id}_gtmc.png",
            "meta": f"meta/{sample_id}.json",
        },
    }


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """8-sample dataset directory matching the documented manifest format."""
    root = tmp_path_factory.mktemp("tiny_ds")
    for sub in ("images", "gt", "meta"):
        (root / sub).mkdir()
    rng = np.random.default_rng(42)
    splits = ["train"] * 5 + ["val"] * 2 + ["test"]
    entries = [_write_sample(root, f"{i:05d}", split, rng)
               for i, split in enumerate(splits)]
    with open(root / "manifest.jsonl", "w") as f:
        for e in entries:
            f.write(json.dumps(e, sort_keys=True) + "\n")
        f.write(json.dumps({"footer": True, "generated": len(entries),
                            "failures": []}) + "\n")
    return root
