"""Morphology classification (dot / rod / network) and summary statistics.

A component is a network exactly when it contains at least one overlap
pixel of the multi-class mask; overlapping tubes are how networks arise in
these images. The remaining components are split into dot and rod by
two-cluster k-means on log(area). In one dimension the optimal 2-means
partition is a split of the sorted values, so it is computed exactly by
enumerating split points rather than by Lloyd iteration; the cluster with
the smaller centroid is the dot class. With fewer than two non-network
components the clustering is undefined and a fixed area threshold is used
instead, flagged on the affected records.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .groundtruth import MultiClassMask
from .segmentation import LabelMap

FALLBACK_AREA_UM2 = 0.15
HIST_BIN_UM2 = 0.05
CLASSES = ("dot", "rod", "network")


@dataclass
class MorphologyRecord:
    component_id: int
    area_um2: float
    morphology: str          # dot | rod | network
    contains_overlap: bool
    fallback_rule: bool = False  # dot/rod decided by area threshold, not 2-means


def split_1d_2means(values: np.ndarray) -> int:
    """Exact 1-D 2-means: index s splitting sorted values into [:s] and [s:].

    Every optimal 2-means partition in one dimension is an interval split,
    so minimizing within-cluster sum of squares over all n-1 splits is
    exhaustive. Ties break toward the smallest split index.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = v.size
    if n < 2:
        raise ValueError("need at least 2 values to split")
    best_s, best_cost = 1, np.inf
    for s in range(1, n):
        a, b = v[:s], v[s:]
        cost = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
        if cost < best_cost - 1e-12:
            best_s, best_cost = s, cost
    return best_s


def classify_morphology(components: LabelMap, multiclass: MultiClassMask,
                        pixel_size: float) -> list[MorphologyRecord]:
    """Assign each component a morphology class."""
    mc = multiclass.pixels if hasattr(multiclass, "pixels") else np.asarray(multiclass)
    if components.pixels.shape != mc.shape:
        raise ValueError("components and multiclass mask dimensions differ")
    n = components.count
    if n == 0:
        return []
    labels = components.pixels
    px_area_um2 = (pixel_size / 1000.0) ** 2
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:] * px_area_um2
    overlap = np.zeros(n + 1, dtype=bool)
    overlap_labels = labels[mc == 2]
    overlap[overlap_labels[overlap_labels > 0]] = True
    is_network = overlap[1:]

    records = [
        MorphologyRecord(component_id=i + 1, area_um2=float(areas[i]),
                         morphology="network", contains_overlap=True)
        for i in range(n) if is_network[i]
    ]
    rest = np.flatnonzero(~is_network)
    if rest.size >= 2:
        logs = np.log(areas[rest])
        order = np.argsort(logs, kind="stable")
        s = split_1d_2means(logs)
        dot_ids = set(rest[order[:s]])
        for i in rest:
            records.append(MorphologyRecord(
                component_id=int(i + 1), area_um2=float(areas[i]),
                morphology="dot" if i in dot_ids else "rod",
                contains_overlap=False))
    else:
        for i in rest:
            records.append(MorphologyRecord(
                component_id=int(i + 1), area_um2=float(areas[i]),
                morphology="dot" if areas[i] < FALLBACK_AREA_UM2 else "rod",
                contains_overlap=False, fallback_rule=True))
    records.sort(key=lambda r: r.component_id)
    return records


def morphology_stats(records: Sequence[MorphologyRecord]) -> dict:
    """Per-class count, total and mean area, and a fixed-bin area histogram."""
    stats = {}
    for cls in CLASSES:
        areas = np.array([r.area_um2 for r in records if r.morphology == cls])
        if areas.size:
            n_bins = int(np.floor(areas.max() / HIST_BIN_UM2)) + 1
            hist = np.bincount(
                np.floor(areas / HIST_BIN_UM2).astype(np.int64), minlength=n_bins)
            stats[cls] = {
                "count": int(areas.size),
                "total_area_um2": float(areas.sum()),
                "mean_area_um2": float(areas.mean()),
                "histogram": hist.tolist(),
            }
        else:
            stats[cls] = {"count": 0, "total_area_um2": 0.0,
                          "mean_area_um2": 0.0, "histogram": []}
    stats["bin_um2"] = HIST_BIN_UM2
    return stats


def stats_to_csv(stats: dict) -> str:
    """Flatten a stats summary to CSV; histogram counts are |-joined."""
    buf = io.StringIO()
    buf.write("morphology,count,total_area_um2,mean_area_um2,area_histogram\n")
    for cls in CLASSES:
        s = stats[cls]
        hist = "|".join(str(c) for c in s["histogram"])
        buf.write(f"{cls},{s['count']},{s['total_area_um2']:.6f},"
                  f"{s['mean_area_um2']:.6f},{hist}\n")
    return buf.getvalue()
