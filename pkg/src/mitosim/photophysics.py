"""Fluorophore placement and per-exposure photon emission.

Labels sit on the tube surface at a fixed surface density. During one camera
exposure each fluorophore blinks between an emitting ON state and a dark OFF
state; the detected photon count is Poisson in the integrated ON time, with a
yield factor absorbing non-radiative losses and the collection efficiency of
the optics. Defaults are calibrated against the camera model so that rendered
images land in the target signal-to-noise regime (see imaging.calibrate_snr).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Mitochondrion
from .rng import make_rng

DEFAULT_EMITTER_DENSITY = 1000.0  # emitters per um^2 of tube surface


@dataclass
class KineticsParams:
    """Two-state blinking kinetics and emission budget for one exposure.

    photon_rate is the emission rate while ON (photons/s); quantum_yield is
    the fraction of emitted photons that survive non-radiative dissipation
    and the detection chain. The product photon_rate * quantum_yield * ON-time
    sets the detected count.
    """

    k_on: float = 5.0            # 1/s, OFF -> ON
    k_off: float = 5.0           # 1/s, ON -> OFF
    photon_rate: float = 2300.0  # photons/s while ON (pre-yield)
    quantum_yield: float = 0.0035
    exposure: float = 50.0       # ms

    def validate(self) -> None:
        if self.k_on < 0 or self.k_off < 0 or self.photon_rate < 0:
            raise ValueError("rates must be non-negative")
        if not 0 < self.quantum_yield <= 1:
            raise ValueError("quantum_yield must be in (0, 1]")
        if self.exposure <= 0:
            raise ValueError("exposure must be positive")

    @property
    def stationary_on_fraction(self) -> float:
        total = self.k_on + self.k_off
        return self.k_on / total if total > 0 else 1.0

    @property
    def emitted_photon_budget(self) -> float:
        """Photons emitted (pre-yield) by an uninterrupted ON fluorophore.

        Blinking scales realized emission by the ON-time fraction; the
        budget is the per-exposure ceiling.
        """
        return self.photon_rate * self.exposure / 1000.0


@dataclass
class Emitter:
    position: np.ndarray  # (3,) nm
    photons: int = 0


@dataclass
class EmitterSet:
    """All fluorophores of one mitochondrion."""

    positions: np.ndarray              # (n, 3) nm
    photons: np.ndarray = None         # (n,) int64 detected counts
    instance_id: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if self.photons is None:
            self.photons = np.zeros(len(self.positions), dtype=np.int64)
        self.photons = np.asarray(self.photons, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def emitters(self) -> list[Emitter]:
        return [Emitter(position=p, photons=int(c))
                for p, c in zip(self.positions, self.photons)]

    def translated(self, offset) -> "EmitterSet":
        return EmitterSet(positions=self.positions + np.asarray(offset, dtype=float),
                          photons=self.photons.copy(), instance_id=self.instance_id)


def _surface_frames(points: np.ndarray):
    """Per-sample tangents plus an orthonormal normal pair for each tangent."""
    tangents = np.gradient(points, axis=0)
    norms = np.linalg.norm(tangents, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    tangents /= norms
    # reference axis least aligned with each tangent avoids degenerate crosses
    ref = np.zeros_like(tangents)
    ref[np.arange(len(tangents)), np.argmin(np.abs(tangents), axis=1)] = 1.0
    n1 = np.cross(tangents, ref)
    n1 /= np.linalg.norm(n1, axis=1, keepdims=True)
    n2 = np.cross(tangents, n1)
    return n1, n2


def place_emitters(mito: Mitochondrion, density: float,
                   rng: np.random.Generator) -> EmitterSet:
    """Scatter fluorophores uniformly over the lateral tube surface.

    Count ~ Poisson(density * 2*pi*r*L); each position is a uniform arc
    coordinate paired with a uniform azimuth, offset by the tube radius along
    the local surface normal. End caps carry no labels.
    """
    if density < 0:
        raise ValueError("density must be non-negative")
    skel = mito.skeleton
    length_um = skel.length / 1000.0
    radius_um = mito.radius / 1000.0
    area_um2 = 2.0 * np.pi * radius_um * length_um
    count = int(rng.poisson(density * area_um2)) if density > 0 else 0
    if count == 0:
        return EmitterSet(positions=np.empty((0, 3)), instance_id=mito.instance_id)

    cum = skel.cumulative_length()
    s = rng.uniform(0.0, cum[-1], size=count)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=count)

    idx = np.searchsorted(cum, s, side="right") - 1
    idx = np.clip(idx, 0, len(cum) - 2)
    seg_len = cum[idx + 1] - cum[idx]
    frac = np.where(seg_len > 0, (s - cum[idx]) / np.where(seg_len > 0, seg_len, 1.0), 0.0)
    centers = skel.points[idx] + frac[:, None] * (skel.points[idx + 1] - skel.points[idx])

    n1, n2 = _surface_frames(skel.points)
    normal = (np.cos(phi)[:, None] * n1[idx] + np.sin(phi)[:, None] * n2[idx])
    positions = centers + mito.radius * normal
    return EmitterSet(positions=positions, instance_id=mito.instance_id)


def on_times(n: int, k_on: float, k_off: float, t_total: float,
             rng: np.random.Generator) -> np.ndarray:
    """Integrated ON time of n independent telegraph trajectories.

    Exact event-time sampling: each trajectory starts from the stationary
    state distribution and evolves by exponential dwell times, no fixed time
    step. A zero rate pins the current state for the rest of the exposure.
    Trajectories advance in lockstep (one dwell draw per still-running
    trajectory per round) so the draw sequence depends only on n.
    """
    total_rate = k_on + k_off
    p_on = k_on / total_rate if total_rate > 0 else 1.0
    on = rng.random(n) < p_on
    remaining = np.full(n, t_total)
    on_time = np.zeros(n)
    active = np.arange(n)
    while active.size:
        rates = np.where(on[active], k_off, k_on)
        std_exp = rng.exponential(1.0, size=active.size)
        with np.errstate(divide="ignore"):
            dwell = std_exp / rates   # rate 0 -> inf, state pinned
        used = np.minimum(dwell, remaining[active])
        on_time[active] += np.where(on[active], used, 0.0)
        remaining[active] -= used
        flips = dwell < remaining[active] + used  # event before exposure end
        flipped = active[flips]
        on[flipped] = ~on[flipped]
        active = flipped
    return on_time


def simulate_photons(emitter_set: EmitterSet, kin: KineticsParams,
                     rng) -> EmitterSet:
    """Draw per-exposure detected photon counts for every fluorophore.

    Each fluorophore runs an independent ON/OFF telegraph process whose
    initial state is drawn from the stationary distribution; photons are
    Poisson(photon_rate * quantum_yield * ON-time). ``rng`` is either an
    integer seed or a Generator from which one is drawn; counts depend only
    on the seed and the number of emitters, never on positions or on
    evaluation order.
    """
    kin.validate()
    seed = int(rng.integers(0, 2**63)) if isinstance(rng, np.random.Generator) else int(rng)
    sub = make_rng(seed)
    t_total = kin.exposure / 1000.0
    n = len(emitter_set)
    times = on_times(n, kin.k_on, kin.k_off, t_total, sub)
    lam = kin.photon_rate * kin.quantum_yield * times
    counts = sub.poisson(lam).astype(np.int64)
    return EmitterSet(positions=emitter_set.positions.copy(), photons=counts,
                      instance_id=emitter_set.instance_id)
