"""Raster and metadata round trips."""

import numpy as np
import pytest

from mitosim.io import (gt_path, gtmc_path, load_json, load_png_binary,
                        load_png_labels, load_tiff_f32, load_tiff_u16,
                        noisefree_path, noisy_path, save_json,
                        save_png_binary, save_png_labels, save_psf,
                        save_tiff_f32, save_tiff_u16)
from mitosim.rng import make_rng


def test_u16_tiff_round_trip(tmp_path):
    rng = make_rng(1)
    pixels = rng.integers(0, 65536, size=(32, 48)).astype(np.uint16)
    p = tmp_path / "img.tif"
    save_tiff_u16(p, pixels)
    assert np.array_equal(load_tiff_u16(p), pixels)


def test_f32_tiff_round_trip(tmp_path):
    rng = make_rng(2)
    pixels = rng.uniform(0.0, 1e4, size=(16, 16)).astype(np.float32)
    p = tmp_path / "img_nf.tif"
    save_tiff_f32(p, pixels)
    assert np.array_equal(load_tiff_f32(p), pixels)


def test_tiff_loaders_reject_wrong_depth(tmp_path):
    u16 = tmp_path / "a.tif"
    save_tiff_u16(u16, np.zeros((4, 4), dtype=np.uint16))
    with pytest.raises(ValueError):
        load_tiff_f32(u16)
    f32 = tmp_path / "b.tif"
    save_tiff_f32(f32, np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        load_tiff_u16(f32)


def test_binary_png_is_0_255(tmp_path):
    mask = np.zeros((8, 8), dtype=bool)
    mask[2:4, 3:7] = True
    p = tmp_path / "m_gt.png"
    save_png_binary(p, mask)
    assert np.array_equal(load_png_binary(p), mask)
    raw = load_png_labels(p)
    assert set(np.unique(raw)) == {0, 255}


def test_label_png_round_trip(tmp_path):
    labels = np.zeros((6, 6), dtype=np.uint8)
    labels[1, 1] = 1
    labels[4, 4] = 2
    p = tmp_path / "mc.png"
    save_png_labels(p, labels)
    assert np.array_equal(load_png_labels(p), labels)


def test_label_png_rejects_wide_values(tmp_path):
    with pytest.raises(ValueError):
        save_png_labels(tmp_path / "bad.png", np.array([[0, 300]]))
    with pytest.raises(ValueError):
        save_png_labels(tmp_path / "bad.png", np.array([[-1, 0]]))


def test_json_round_trip_is_stable(tmp_path):
    obj = {"b": 2, "a": [1, 2, 3], "c": {"z": True, "y": None}}
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_json(p1, obj)
    save_json(p2, load_json(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_save_psf_pages_and_sidecar(tmp_path, default_psf):
    from PIL import Image as PILImage

    p = tmp_path / "psf.tif"
    save_psf(p, default_psf)
    with PILImage.open(str(p)) as im:
        assert im.n_frames == default_psf.values.shape[0]
        im.seek(3)
        page = np.array(im)
    assert np.array_equal(page, default_psf.values[3])
    sidecar = load_json(str(p) + ".json")
    assert sidecar["shape"] == list(default_psf.values.shape)
    assert sidecar["lateral_step_nm"] == default_psf.lateral_step


def test_writers_are_byte_deterministic(tmp_path):
    rng = make_rng(3)
    pixels = rng.integers(0, 65536, size=(32, 32)).astype(np.uint16)
    a, b = tmp_path / "a.tif", tmp_path / "b.tif"
    save_tiff_u16(a, pixels)
    save_tiff_u16(b, pixels)
    assert a.read_bytes() == b.read_bytes()

    mask = pixels > 30000
    pa, pb = tmp_path / "a.png", tmp_path / "b.png"
    save_png_binary(pa, mask)
    save_png_binary(pb, mask)
    assert pa.read_bytes() == pb.read_bytes()


def test_layout_helpers():
    assert noisy_path("/d/images", "s001").name == "s001.tif"
    assert noisefree_path("/d/images", "s001").name == "s001_nf.tif"
    assert gt_path("/d/gt", "s001").name == "s001_gt.png"
    assert gtmc_path("/d/gt", "s001").name == "s001_gtmc.png"
