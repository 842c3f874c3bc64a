"""Multi-object tracking: constant-velocity Kalman filter plus Hungarian
assignment over gated centroid distances, with fusion/fission flagging.

State is (x, y, vx, vy) in pixels and pixels/frame; the measurement is the
detection centroid. Process noise Q = q*I and measurement noise R = m*I
keep the filter minimal and hand-checkable.

Events are detected around the assignment. Fusion: two or more tracks gate
onto one detection whose area is at least `area_ratio` of their combined
area; the unmatched participants are absorbed (ended) there, so a merged
component that persists for several frames fires the event exactly once.
Fission: a track's matched detection shrank below `area_ratio` of its
previous area while unmatched detections inside its gate restore at least
`area_ratio` of it; those detections' fresh tracks are the event's sinks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .segmentation import LabelMap

F_CV = np.array([[1.0, 0, 1, 0],
                 [0, 1, 0, 1],
                 [0, 0, 1, 0],
                 [0, 0, 0, 1]])
H_POS = np.array([[1.0, 0, 0, 0],
                  [0, 1, 0, 0]])
INIT_VEL_VAR = 10.0  # px^2/frame^2 prior spread on unobserved velocity


@dataclass
class Detection:
    frame: int
    centroid: tuple[float, float]    # (x, y) px
    area: int                        # px
    bbox: tuple[int, int, int, int]  # (x0, y0, x1, y1) inclusive
    component_id: int


@dataclass
class KalmanState:
    x: np.ndarray                    # (4,) state (x, y, vx, vy)
    p: np.ndarray                    # (4, 4) covariance
    q: float = 1.0                   # process noise scale
    m: float = 1.0                   # measurement noise scale


@dataclass
class TrackPoint:
    frame: int
    x: float
    y: float
    area: int
    status: str                      # active | lost


@dataclass
class Track:
    id: int
    points: list[TrackPoint] = field(default_factory=list)
    status: str = "active"           # active | lost | ended
    miss: int = 0
    state: KalmanState | None = None
    last_area: int = 0
    last_cid: int = 0                # component id at the last matched frame
    last_cid_frame: int = -1


@dataclass
class EventRecord:
    type: str                        # fusion | fission
    frame: int
    sources: tuple[int, ...]
    sinks: tuple[int, ...]


@dataclass
class TrackParams:
    gate: float = 20.0               # px
    max_miss: int = 2
    area_ratio: float = 0.8
    q: float = 1.0
    m: float = 1.0
    cost_metric: str = "euclidean"   # euclidean | iou

    def validate(self) -> None:
        if self.gate <= 0:
            raise ValueError("gate must be positive")
        if self.max_miss < 0:
            raise ValueError("max_miss must be non-negative")
        if not 0 < self.area_ratio <= 1:
            raise ValueError("area_ratio must be in (0, 1]")
        if self.q < 0 or self.m < 0:
            raise ValueError("noise scales must be non-negative")
        if self.cost_metric not in ("euclidean", "iou"):
            raise ValueError("cost_metric must be euclidean or iou")


def kalman_predict(s: KalmanState) -> KalmanState:
    """Constant-velocity time update."""
    x = F_CV @ s.x
    p = F_CV @ s.p @ F_CV.T + s.q * np.eye(4)
    return KalmanState(x=x, p=p, q=s.q, m=s.m)


def kalman_update(s: KalmanState, z: Sequence[float]) -> KalmanState:
    """Standard measurement update with centroid measurement z = (x, y)."""
    z = np.asarray(z, dtype=np.float64)
    innovation_cov = H_POS @ s.p @ H_POS.T + s.m * np.eye(2)
    det = np.linalg.det(innovation_cov)
    if not np.isfinite(det) or abs(det) < 1e-300:
        raise ValueError("singular innovation covariance")
    gain = s.p @ H_POS.T @ np.linalg.inv(innovation_cov)
    x = s.x + gain @ (z - H_POS @ s.x)
    p = (np.eye(4) - gain @ H_POS) @ s.p
    p = (p + p.T) / 2.0
    return KalmanState(x=x, p=p, q=s.q, m=s.m)


def hungarian(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment; inf entries mark forbidden pairs.

    Forbidden entries are replaced by a constant exceeding the total finite
    cost, so the solver uses as few of them as possible; any that remain in
    its output are dropped. All pairs forbidden yields an empty assignment.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        return []
    finite = np.isfinite(cost)
    if not finite.any():
        return []
    big = np.abs(cost[finite]).sum() + 1.0
    rows, cols = linear_sum_assignment(np.where(finite, cost, big))
    return [(int(r), int(c)) for r, c in zip(rows, cols) if finite[r, c]]


def detections_from(label_map: LabelMap, frame: int) -> list[Detection]:
    """Extract per-component centroids, areas, and bounding boxes."""
    dets = []
    pixels = label_map.pixels
    for cid in range(1, label_map.count + 1):
        ys, xs = np.nonzero(pixels == cid)
        dets.append(Detection(
            frame=frame,
            centroid=(float(xs.mean()), float(ys.mean())),
            area=int(xs.size),
            bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
            component_id=cid))
    return dets


def _mask_iou(pix_a, cid_a, pix_b, cid_b) -> float:
    a = pix_a == cid_a
    b = pix_b == cid_b
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def track_sequence(frames: Sequence[LabelMap],
                   params: TrackParams | None = None
                   ) -> tuple[list[Track], list[EventRecord]]:
    """Track components across frames and flag fusion/fission events."""
    params = params or TrackParams()
    params.validate()
    if len(frames) < 2:
        raise ValueError("need at least 2 frames")

    tracks: list[Track] = []
    live: list[Track] = []
    events: list[EventRecord] = []
    next_id = 1
    prev_pixels = None

    for f, label_map in enumerate(frames):
        dets = detections_from(label_map, f)
        for t in live:
            t.state = kalman_predict(t.state)

        # gated assignment costs, normalized to [0, 1] within the gate
        n_t, n_d = len(live), len(dets)
        cost = np.full((n_t, n_d), np.inf)
        gated = np.zeros((n_t, n_d), dtype=bool)
        for i, t in enumerate(live):
            px, py = float(t.state.x[0]), float(t.state.x[1])
            for j, d in enumerate(dets):
                dist = float(np.hypot(d.centroid[0] - px, d.centroid[1] - py))
                if dist > params.gate:
                    continue
                gated[i, j] = True
                if (params.cost_metric == "iou" and prev_pixels is not None
                        and t.last_cid_frame == f - 1):
                    iou = _mask_iou(prev_pixels, t.last_cid,
                                    label_map.pixels, d.component_id)
                    cost[i, j] = 1.0 - iou
                else:
                    cost[i, j] = dist / params.gate
        matches = hungarian(cost)
        matched_t = {i for i, _ in matches}
        matched_d = {j for _, j in matches}
        match_of_track = {i: j for i, j in matches}

        # fusion: several tracks gate onto one detection and the losers
        # have no detection of their own anymore
        absorbed: set[int] = set()
        for j, d in enumerate(dets):
            cand = [i for i in range(n_t) if gated[i, j]]
            if len(cand) < 2:
                continue
            winner = [i for i in cand if match_of_track.get(i) == j]
            losers = [i for i in cand
                      if i not in matched_t and i not in absorbed]
            if not winner or not losers:
                continue
            participants = winner + losers
            total_area = sum(live[i].last_area for i in participants)
            if d.area >= params.area_ratio * total_area:
                events.append(EventRecord(
                    type="fusion", frame=f,
                    sources=tuple(sorted(live[i].id for i in participants)),
                    sinks=(live[winner[0]].id,)))
                absorbed.update(losers)

        # update matched tracks
        prev_areas = {}
        for i, j in matches:
            t, d = live[i], dets[j]
            prev_areas[i] = t.last_area
            t.state = kalman_update(t.state, d.centroid)
            t.points.append(TrackPoint(
                frame=f, x=float(t.state.x[0]), y=float(t.state.x[1]),
                area=d.area, status="active"))
            t.status = "active"
            t.miss = 0
            t.last_cid = d.component_id
            t.last_cid_frame = f
            t.last_area = d.area

        # spawn tracks for unmatched detections
        new_tracks: dict[int, Track] = {}
        for j, d in enumerate(dets):
            if j in matched_d:
                continue
            state = KalmanState(
                x=np.array([d.centroid[0], d.centroid[1], 0.0, 0.0]),
                p=np.diag([params.m, params.m, INIT_VEL_VAR, INIT_VEL_VAR]),
                q=params.q, m=params.m)
            t = Track(id=next_id, state=state, last_area=d.area,
                      last_cid=d.component_id, last_cid_frame=f)
            t.points.append(TrackPoint(
                frame=f, x=d.centroid[0], y=d.centroid[1],
                area=d.area, status="active"))
            next_id += 1
            tracks.append(t)
            new_tracks[j] = t

        # fission: a matched track shrank and unmatched gated detections
        # restore its area
        for i, j in matches:
            t, d = live[i], dets[j]
            prev_area = prev_areas[i]
            if prev_area <= 0 or d.area >= params.area_ratio * prev_area:
                continue
            extras = [jj for jj in range(n_d)
                      if jj not in matched_d and gated[i, jj]]
            if not extras:
                continue
            child_area = d.area + sum(dets[jj].area for jj in extras)
            if child_area >= params.area_ratio * prev_area:
                sinks = [t.id] + [new_tracks[jj].id for jj in extras]
                events.append(EventRecord(
                    type="fission", frame=f,
                    sources=(t.id,), sinks=tuple(sorted(sinks))))

        # misses, absorption, expiry
        survivors = []
        for i, t in enumerate(live):
            if i in matched_t:
                survivors.append(t)
                continue
            if i in absorbed:
                t.status = "ended"
                continue
            t.miss += 1
            if t.miss > params.max_miss:
                t.status = "ended"
                continue
            t.status = "lost"
            t.points.append(TrackPoint(
                frame=f, x=float(t.state.x[0]), y=float(t.state.x[1]),
                area=t.last_area, status="lost"))
            survivors.append(t)

        live = survivors + list(new_tracks.values())
        prev_pixels = label_map.pixels

    return tracks, events
