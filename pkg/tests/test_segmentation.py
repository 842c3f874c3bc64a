"""Otsu and adaptive thresholding plus connected components."""

import numpy as np
import pytest

from mitosim.segmentation import (LabelMap, N_BINS, adaptive_threshold,
                                  connected_components, otsu_bin,
                                  otsu_threshold)
from mitosim.rng import make_rng


def brute_force_sigma(values):
    """Between-class variance per bin, straight from the definition.

    Bins past the maximum value have an empty upper class and stay invalid,
    so the sweep stops there.
    """
    hist = np.bincount(values.ravel(), minlength=N_BINS).astype(np.float64)
    total = hist.sum()
    idx = np.arange(N_BINS, dtype=np.float64)
    sigma = np.full(N_BINS, -1.0)
    for t in range(int(values.max()) + 1):
        w0 = hist[:t + 1].sum()
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        m0 = (hist[:t + 1] * idx[:t + 1]).sum() / w0
        m1 = (hist[t + 1:] * idx[t + 1:]).sum() / w1
        sigma[t] = w0 * w1 * (m0 - m1) ** 2
    return sigma


def test_two_level_image_splits_exactly():
    rng = make_rng(0)
    img = np.where(rng.uniform(size=(64, 64)) < 0.9, 100, 1000).astype(np.uint16)
    mask = otsu_threshold(img)
    assert np.array_equal(mask, img == 1000)


def test_constant_image_selects_nothing():
    img = np.full((16, 16), 42, dtype=np.uint16)
    assert not otsu_threshold(img).any()
    assert otsu_bin(img) == N_BINS - 1


def test_otsu_against_exhaustive_variance_sweep():
    for seed in range(8):
        rng = make_rng(seed, 0x4F545355)
        img = rng.integers(0, 256, size=(32, 32)).astype(np.uint16)
        sigma = brute_force_sigma(img)
        t = otsu_bin(img)
        assert sigma[t] >= sigma.max() * (1.0 - 1e-12)
        assert np.array_equal(otsu_threshold(img), img > t)


def test_otsu_shift_invariance():
    rng = make_rng(3)
    img = rng.integers(0, 200, size=(32, 32)).astype(np.uint16)
    base = otsu_threshold(img)
    assert np.array_equal(base, otsu_threshold(img + 500))


def test_float_images_are_quantized():
    rng = make_rng(4)
    img = np.where(rng.uniform(size=(32, 32)) < 0.8, 1.5, 20.25)
    mask = otsu_threshold(img)
    assert np.array_equal(mask, img > 1.5)


def test_otsu_rejects_out_of_range_integers():
    with pytest.raises(ValueError):
        otsu_threshold(np.array([[70000, 0]], dtype=np.int64))
    with pytest.raises(ValueError):
        otsu_threshold(np.array([[-1, 5]], dtype=np.int64))


def test_adaptive_constant_image_is_empty():
    img = np.full((32, 32), 7.0)
    assert not adaptive_threshold(img, window=5, offset=1.0).any()


def test_adaptive_step_edge_band():
    # only columns whose window straddles the edge from the bright side can
    # clear the offset: 32..38 for a window of 15 (margin >= 100/15 counts);
    # offset 1 absorbs filter rounding on the constant regions
    img = np.full((64, 64), 100.0)
    img[:, 32:] = 200.0
    mask = adaptive_threshold(img, window=15, offset=1.0)
    cols = np.flatnonzero(mask.any(axis=0))
    assert np.array_equal(cols, np.arange(32, 39))
    assert mask[:, 32:39].all()


def test_adaptive_matches_brute_force_intersection_mean():
    rng = make_rng(5)
    img = rng.uniform(0.0, 100.0, size=(20, 20))
    window, offset = 9, 3.0
    half = window // 2
    expected = np.zeros((20, 20), dtype=bool)
    for y in range(20):
        for x in range(20):
            patch = img[max(y - half, 0):y + half + 1,
                        max(x - half, 0):x + half + 1]
            expected[y, x] = img[y, x] > patch.mean() + offset
    assert np.array_equal(adaptive_threshold(img, window, offset), expected)


def test_adaptive_huge_window_is_global_mean():
    rng = make_rng(6)
    img = rng.uniform(0.0, 100.0, size=(15, 15))
    mask = adaptive_threshold(img, window=31, offset=0.0)
    assert np.array_equal(mask, img > img.mean())


def test_adaptive_rejects_bad_windows():
    img = np.zeros((8, 8))
    with pytest.raises(ValueError):
        adaptive_threshold(img, window=4)
    with pytest.raises(ValueError):
        adaptive_threshold(img, window=1)


def test_components_empty_mask():
    out = connected_components(np.zeros((8, 8), dtype=bool))
    assert out.count == 0
    assert not out.pixels.any()
    out.validate()


def test_components_diagonal_touch_is_one_component():
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, 0] = mask[1, 1] = mask[2, 2] = True
    out = connected_components(mask)
    assert out.count == 1
    assert (out.pixels[mask] == 1).all()


def test_components_first_touch_ordering():
    mask = np.zeros((5, 7), dtype=bool)
    mask[4, 0:2] = True    # touched last in raster order
    mask[0, 5] = True      # touched first
    mask[2, 2] = True      # touched second
    out = connected_components(mask)
    assert out.count == 3
    assert out.pixels[0, 5] == 1
    assert out.pixels[2, 2] == 2
    assert out.pixels[4, 0] == 3


def flood_fill_labels(mask):
    """Raster-order BFS reference labeling with 8-connectivity."""
    labels = np.zeros(mask.shape, dtype=np.int32)
    nxt = 0
    for sy in range(mask.shape[0]):
        for sx in range(mask.shape[1]):
            if not mask[sy, sx] or labels[sy, sx]:
                continue
            nxt += 1
            stack = [(sy, sx)]
            labels[sy, sx] = nxt
            while stack:
                y, x = stack.pop()
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = y + dy, x + dx
                        if (0 <= ny < mask.shape[0] and 0 <= nx < mask.shape[1]
                                and mask[ny, nx] and not labels[ny, nx]):
                            labels[ny, nx] = nxt
                            stack.append((ny, nx))
    return labels, nxt


def test_components_against_flood_fill_oracle():
    for seed in range(300):
        rng = make_rng(seed, 0x434F4D50)
        mask = rng.uniform(size=(32, 32)) < rng.uniform(0.2, 0.7)
        out = connected_components(mask)
        expected, n = flood_fill_labels(mask)
        assert out.count == n
        assert np.array_equal(out.pixels, expected)
        out.validate()


def test_components_reject_non_binary():
    with pytest.raises(ValueError):
        connected_components(np.array([[0, 2], [1, 0]]))


def test_labelmap_validate_rejects_gaps():
    bad = LabelMap(pixels=np.array([[0, 1], [3, 0]], dtype=np.int32), count=2)
    with pytest.raises(ValueError):
        bad.validate()
    wrong_count = LabelMap(pixels=np.array([[0, 1]], dtype=np.int32), count=2)
    with pytest.raises(ValueError):
        wrong_count.validate()
