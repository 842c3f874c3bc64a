"""Morphology classification and summary statistics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mitosim.analytics import (CLASSES, FALLBACK_AREA_UM2, HIST_BIN_UM2,
                               MorphologyRecord, classify_morphology,
                               morphology_stats, split_1d_2means, stats_to_csv)
from mitosim.groundtruth import MultiClassMask
from mitosim.segmentation import LabelMap, connected_components


def label_map_from_rects(shape, rects):
    """Disjoint axis-aligned rectangles, one component each."""
    mask = np.zeros(shape, dtype=bool)
    for y0, x0, h, w in rects:
        mask[y0:y0 + h, x0:x0 + w] = True
    return connected_components(mask)


def plain_multiclass(components):
    return MultiClassMask(pixels=(components.pixels > 0).astype(np.uint8))


def brute_force_split(values):
    v = np.sort(np.asarray(values, dtype=np.float64))
    best_s, best_cost = 1, np.inf
    for s in range(1, v.size):
        a, b = v[:s], v[s:]
        cost = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
        if cost < best_cost - 1e-12:
            best_s, best_cost = s, cost
    return best_s, best_cost


def cost_of_split(values, s):
    v = np.sort(np.asarray(values, dtype=np.float64))
    a, b = v[:s], v[s:]
    return ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-50.0, max_value=50.0,
                          allow_nan=False, allow_infinity=False),
                min_size=2, max_size=12))
def test_split_matches_exhaustive_enumeration(values):
    s = split_1d_2means(np.array(values))
    best_s, best_cost = brute_force_split(values)
    assert s == best_s
    assert cost_of_split(values, s) <= best_cost + 1e-9


def test_split_requires_two_values():
    with pytest.raises(ValueError):
        split_1d_2means(np.array([1.0]))


def test_two_obvious_clusters():
    # pixel areas 8, 9, 187, 203 at 80nm -> um2 0.0512..1.2992
    comps = label_map_from_rects(
        (64, 64), [(2, 2, 2, 4), (2, 20, 3, 3), (20, 2, 11, 17), (40, 30, 7, 29)])
    records = classify_morphology(comps, plain_multiclass(comps), 80.0)
    assert [r.morphology for r in records] == ["dot", "dot", "rod", "rod"]
    assert records[0].area_um2 == pytest.approx(8 * 0.0064)
    assert all(not r.fallback_rule for r in records)
    assert [r.component_id for r in records] == [1, 2, 3, 4]


def test_overlap_pixel_forces_network_regardless_of_area():
    comps = label_map_from_rects(
        (64, 64), [(2, 2, 2, 4), (2, 20, 3, 3), (20, 2, 11, 17), (40, 30, 7, 29)])
    mc = plain_multiclass(comps).pixels
    mc[2, 2] = 2  # a single overlap pixel inside the first (tiny) component
    records = classify_morphology(comps, MultiClassMask(pixels=mc), 80.0)
    assert records[0].morphology == "network"
    assert records[0].contains_overlap
    # the remaining three still split by 2-means: one dot, two rods
    assert [r.morphology for r in records[1:]] == ["dot", "rod", "rod"]


def test_fallback_threshold_when_too_few_components():
    small = label_map_from_rects((32, 32), [(2, 2, 3, 3)])  # 9 px = 0.0576 um2
    rec, = classify_morphology(small, plain_multiclass(small), 80.0)
    assert rec.morphology == "dot" and rec.fallback_rule
    assert rec.area_um2 < FALLBACK_AREA_UM2

    big = label_map_from_rects((32, 32), [(2, 2, 8, 8)])   # 64 px = 0.4096 um2
    rec, = classify_morphology(big, plain_multiclass(big), 80.0)
    assert rec.morphology == "rod" and rec.fallback_rule


def test_fallback_applies_to_single_leftover_next_to_networks():
    comps = label_map_from_rects((32, 32), [(2, 2, 3, 3), (10, 10, 4, 4)])
    mc = plain_multiclass(comps).pixels
    mc[11, 11] = 2
    records = classify_morphology(comps, MultiClassMask(pixels=mc), 80.0)
    by_id = {r.component_id: r for r in records}
    assert by_id[2].morphology == "network" and not by_id[2].fallback_rule
    assert by_id[1].morphology == "dot" and by_id[1].fallback_rule


def test_empty_label_map():
    empty = LabelMap(pixels=np.zeros((8, 8), dtype=np.int32), count=0)
    assert classify_morphology(empty, MultiClassMask(
        pixels=np.zeros((8, 8), dtype=np.uint8)), 80.0) == []


def test_shape_mismatch_rejected():
    comps = label_map_from_rects((8, 8), [(1, 1, 2, 2)])
    with pytest.raises(ValueError):
        classify_morphology(comps, MultiClassMask(
            pixels=np.zeros((9, 8), dtype=np.uint8)), 80.0)


def test_stats_counts_and_histogram():
    records = [
        MorphologyRecord(1, 0.0512, "dot", False),
        MorphologyRecord(2, 0.0576, "dot", False),
        MorphologyRecord(3, 0.0512, "dot", False),
        MorphologyRecord(4, 1.2992, "rod", False),
        MorphologyRecord(5, 0.9000, "network", True),
    ]
    stats = morphology_stats(records)
    assert stats["dot"]["count"] == 3
    assert stats["dot"]["total_area_um2"] == pytest.approx(0.16)
    assert stats["dot"]["mean_area_um2"] == pytest.approx(0.16 / 3)
    # all three dots land in bin 1 ([0.05, 0.10))
    assert stats["dot"]["histogram"] == [0, 3]
    assert stats["rod"]["histogram"] == [0] * 25 + [1]
    assert sum(stats["network"]["histogram"]) == stats["network"]["count"]
    assert stats["bin_um2"] == HIST_BIN_UM2


def test_stats_empty_classes():
    stats = morphology_stats([])
    for cls in CLASSES:
        assert stats[cls] == {"count": 0, "total_area_um2": 0.0,
                              "mean_area_um2": 0.0, "histogram": []}


def test_csv_layout_round_trips():
    records = [MorphologyRecord(1, 0.0512, "dot", False),
               MorphologyRecord(2, 1.25, "rod", False)]
    text = stats_to_csv(morphology_stats(records))
    lines = text.strip().split("\n")
    assert lines[0] == "morphology,count,total_area_um2,mean_area_um2,area_histogram"
    assert len(lines) == 4
    dot_row = lines[1].split(",")
    assert dot_row[0] == "dot"
    assert int(dot_row[1]) == 1
    assert float(dot_row[2]) == pytest.approx(0.0512)
    assert [int(c) for c in dot_row[4].split("|")] == [0, 1]
    net_row = lines[3].split(",")
    assert net_row[0] == "network" and net_row[1] == "0" and net_row[4] == ""
