"""Random 3D mitochondrion geometries.

A mitochondrion is modeled as a tube: a smooth 3D skeleton curve swept by a
cylinder of fixed radius. Skeletons start as a planar cubic spline through a
handful of random control points and are lifted to 3D by interpolating random
per-knot axial offsets, mirroring how the tubes wander in and out of the focal
plane in live-cell data.

All positions are in nanometers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator


@dataclass
class GeometryParams:
    """Bounds for random skeleton generation.

    knot_box is the (width, height) of the region control points are drawn
    from; the tube is translated into the field of view by the caller, so the
    box only controls the spatial scale of one structure.
    """

    n_knots_min: int = 3
    n_knots_max: int = 5
    knot_box: tuple[float, float] = (2500.0, 2500.0)
    z_low: float = -600.0
    z_high: float = 600.0
    radius_min: float = 50.0
    radius_max: float = 400.0
    length_min: float = 100.0
    length_max: float = 5000.0

    def validate(self) -> None:
        if not (3 <= self.n_knots_min <= self.n_knots_max <= 5):
            raise ValueError("knot counts must satisfy 3 <= min <= max <= 5")
        if not self.z_low <= self.z_high:
            raise ValueError("z_low must not exceed z_high")
        if not 0 < self.radius_min <= self.radius_max:
            raise ValueError("radii must satisfy 0 < min <= max")
        if self.length_min <= 0 or self.length_max <= 0:
            raise ValueError("arc-length bounds must be positive")
        if self.length_min > self.length_max:
            raise ValueError("length_min must not exceed length_max")
        if self.knot_box[0] <= 0 or self.knot_box[1] <= 0:
            raise ValueError("knot_box extents must be positive")


# skeleton sample spacing; <= 1/8 of the smallest tube radius, and fine
# enough that polyline arc length is within 0.1% of the continuous curve
ARC_STEP_NM = 5.0


@dataclass
class Skeleton:
    """Dense polyline sampling of the skeleton spline."""

    points: np.ndarray           # (n, 3) float64, nm
    arc_step: float = ARC_STEP_NM
    knots: np.ndarray = field(default=None, repr=False)  # (k, 3) control points

    @property
    def length(self) -> float:
        """Total polyline arc length in nm."""
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def cumulative_length(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])


@dataclass
class Mitochondrion:
    """Tube: every point within ``radius`` of the skeleton polyline."""

    skeleton: Skeleton
    radius: float
    instance_id: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def contains(self, point) -> bool:
        """True when ``point`` lies inside the swept tube."""
        return point_polyline_distance(np.asarray(point, dtype=float),
                                       self.skeleton.points) <= self.radius


def point_polyline_distance(point: np.ndarray, polyline: np.ndarray) -> float:
    """Minimum distance from a 3D point to a polyline (segment-exact)."""
    a = polyline[:-1]
    b = polyline[1:]
    ab = b - a
    ap = point[None, :] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.divide(np.einsum("ij,ij->i", ab, ap), denom,
                          out=np.zeros_like(denom), where=denom > 0), 0.0, 1.0)
    closest = a + t[:, None] * ab
    d = np.linalg.norm(point[None, :] - closest, axis=1)
    # lone-vertex degenerate polyline
    if len(polyline) == 1:
        return float(np.linalg.norm(point - polyline[0]))
    return float(d.min())


def _spline_through_knots(knots: np.ndarray) -> tuple:
    """Natural cubic spline in x/y over chordal parameter; monotone cubic in z.

    Chordal parameterization keeps the curve from looping between unevenly
    spaced knots. z uses a shape-preserving interpolant so samples never
    overshoot the drawn per-knot values, which keeps the whole curve inside
    the configured axial slab.
    """
    chords = np.linalg.norm(np.diff(knots[:, :2], axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(chords)])
    xy = CubicSpline(t, knots[:, :2], bc_type="natural")
    z = PchipInterpolator(t, knots[:, 2])
    return xy, z, t


def _sample_spline(knots: np.ndarray, arc_step: float) -> np.ndarray:
    """Sample the spline at ~arc_step spacing with every knot hit exactly.

    Each inter-knot span is measured with a dense parameter grid and split
    into equal arc-length steps no longer than arc_step, so consecutive
    samples are within arc_step and knots are sample points.
    """
    xy, z, t_knots = _spline_through_knots(knots)

    def eval_at(ts):
        p = np.empty((len(ts), 3))
        p[:, :2] = xy(ts)
        p[:, 2] = z(ts)
        return p

    pieces = []
    for i in range(len(t_knots) - 1):
        t0, t1 = t_knots[i], t_knots[i + 1]
        # dense probe: chord error at this resolution is far below 1 nm
        n_dense = max(int(np.ceil((t1 - t0) / (arc_step / 8.0))), 8)
        ts = np.linspace(t0, t1, n_dense + 1)
        pts = eval_at(ts)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        span = cum[-1]
        n_steps = max(int(np.ceil(span / arc_step)), 1)
        targets = np.linspace(0.0, span, n_steps + 1)
        t_samples = np.interp(targets, cum, ts)
        t_samples[0], t_samples[-1] = t0, t1
        piece = eval_at(t_samples)
        if pieces:
            piece = piece[1:]  # knot shared with previous span
        pieces.append(piece)
    return np.vstack(pieces)


def gen_skeleton(params: GeometryParams, rng: np.random.Generator) -> Skeleton:
    """Draw a random skeleton within the configured bounds.

    Knot count is uniform on [n_knots_min, n_knots_max]; knot positions are
    uniform over knot_box with per-knot z uniform on [z_low, z_high]. Draws
    whose arc length falls outside [length_min, length_max], and degenerate
    draws (coincident consecutive knots), are redone; after 100 failed
    attempts a RuntimeError is raised.
    """
    params.validate()
    for _ in range(100):
        n = int(rng.integers(params.n_knots_min, params.n_knots_max + 1))
        knots = np.empty((n, 3))
        knots[:, 0] = rng.uniform(0.0, params.knot_box[0], size=n)
        knots[:, 1] = rng.uniform(0.0, params.knot_box[1], size=n)
        knots[:, 2] = rng.uniform(params.z_low, params.z_high, size=n)
        chords = np.linalg.norm(np.diff(knots[:, :2], axis=0), axis=1)
        if np.any(chords <= 0):
            continue
        points = _sample_spline(knots, ARC_STEP_NM)
        skel = Skeleton(points=points, arc_step=ARC_STEP_NM, knots=knots)
        if params.length_min <= skel.length <= params.length_max:
            return skel
    raise RuntimeError(
        "failed to draw a valid skeleton in 100 attempts; "
        "check knot_box against the arc-length bounds"
    )


def make_mitochondrion(skeleton: Skeleton, radius: float, instance_id: int) -> Mitochondrion:
    """Wrap a skeleton and radius into a tube; rejects non-positive radii."""
    return Mitochondrion(skeleton=skeleton, radius=float(radius), instance_id=instance_id)
