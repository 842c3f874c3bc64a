"""Camera-plane image formation: PSF rendering, sensor noise, montage, SNR.

Rendering is a gather: for every emitter the PSF stack is sampled (trilinear)
at each pixel center's offset from the emitter, scaled by the emitter's
photon count. Stack values are energy fractions per lateral grid cell, so a
factor (pixel_size / psf_lateral_step)^2 converts them to fractions per
pixel; pixel values are then expected detected photons, and the image sum of
a single in-focus emitter recovers its photon count up to tail truncation
and center-sampling error.

The sensor model is a photon-counting camera at unit gain: Poisson shot
noise on signal plus dark current, plus a constant baseline offset, clamped
to the ADC ceiling. No read-noise term; dark current supplies the
noise-floor role it plays in low-light microscopy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CalibrationError
from .optics import PsfStack, psf_values
from .photophysics import EmitterSet
from .rng import stable_hash

CAL_STREAM = 0x53435246  # calibration sample substream tag


@dataclass
class CameraParams:
    pixel_size: float = 80.0      # nm
    width: int = 128              # pixels
    height: int = 128
    dark_current: float = 1000.0  # electrons/pixel/s
    baseline: float = 100.0       # counts
    exposure: float = 50.0        # ms
    max_count: int = 65535

    def validate(self) -> None:
        if self.pixel_size <= 0:
            raise ValueError("pixel_size must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.dark_current < 0 or self.baseline < 0:
            raise ValueError("dark_current and baseline must be non-negative")
        if self.exposure <= 0:
            raise ValueError("exposure must be positive")

    @property
    def dark_counts(self) -> float:
        """Mean dark counts per pixel per exposure."""
        return self.dark_current * self.exposure / 1000.0


@dataclass
class FloatImage:
    """Noise-free expected photon counts per pixel."""

    pixels: np.ndarray   # (h, w) float64, >= 0
    pixel_size: float    # nm


@dataclass
class Image:
    """Camera output in 16-bit counts."""

    pixels: np.ndarray   # (h, w) uint16
    pixel_size: float    # nm


def _render_emitter_generic(img, psf, cam, x, y, z, photons, scale):
    """Slow exact path for non-integer pixel/grid ratios."""
    half = psf.lateral_half
    px_lo = max(int(np.floor((x - half) / cam.pixel_size - 0.5)), 0)
    px_hi = min(int(np.ceil((x + half) / cam.pixel_size - 0.5)), cam.width - 1)
    py_lo = max(int(np.floor((y - half) / cam.pixel_size - 0.5)), 0)
    py_hi = min(int(np.ceil((y + half) / cam.pixel_size - 0.5)), cam.height - 1)
    if px_lo > px_hi or py_lo > py_hi:
        return
    pxs = (np.arange(px_lo, px_hi + 1) + 0.5) * cam.pixel_size - x
    pys = (np.arange(py_lo, py_hi + 1) + 0.5) * cam.pixel_size - y
    dx, dy = np.meshgrid(pxs, pys)
    vals = psf_values(psf, dx, dy, np.full_like(dx, z))
    img[py_lo:py_hi + 1, px_lo:px_hi + 1] += photons * scale * vals


def _phase_tables(psf: PsfStack, m: int):
    """Contiguous m-decimated copies of the stack, one per lateral phase.

    tables[ry, rx, z, j, i] = values[z, ry + m*j, rx + m*i] for j < ch and
    i < cw; one extra zero row and column pad each plane so that shifted
    full-plane reads stay in bounds. Pixel-grid gathers at stride m become
    flat contiguous runs instead of touching m times the needed memory.
    Total size is about one extra copy of the stack; built lazily per
    stride and cached on the PSF instance. Returns (tables, planes) where
    planes is the flat list of raveled plane views indexed by
    (ry*m + rx)*nz + z.
    """
    cache = getattr(psf, "_decimation_cache", None)
    if cache is None:
        cache = {}
        psf._decimation_cache = cache
    entry = cache.get(m)
    if entry is None:
        nz, ny, nx = psf.values.shape
        ch, cw = -(-ny // m), -(-nx // m)
        tables = np.zeros((m, m, nz, ch + 1, cw + 1), dtype=psf.values.dtype)
        for ry in range(m):
            for rx in range(m):
                sub = psf.values[:, ry::m, rx::m]
                tables[ry, rx, :, :sub.shape[1], :sub.shape[2]] = sub
        planes = [tables[ry, rx, z].ravel()
                  for ry in range(m) for rx in range(m) for z in range(nz)]
        entry = (tables, planes)
        cache[m] = entry
    return entry


def _render_set_fast(img, eset, psf, cam, m, scale, planes):
    """Integer pixel/grid ratio path: batched setup, 8 flat reads each.

    Every term of the trilinear gather reads one zero-padded plane as a
    flat run of fixed length L shifted by its sub-cell offset, so each
    ufunc call is a single contiguous loop. The flat accumulator viewed
    with the padded row pitch recovers the 2-d block to scatter into the
    image.
    """
    nz, ny, nx = psf.values.shape
    pos = np.asarray(eset.positions, dtype=np.float64).reshape(-1, 3)
    pho = np.asarray(eset.photons, dtype=np.float64).reshape(-1)
    if pos.shape[0] == 0:
        return
    fz = (pos[:, 2] + psf.axial_half) / psf.axial_step
    keep = (pho > 0) & (fz >= 0.0) & (fz <= nz - 1)
    # pixel p samples grid index m*p + c along each lateral axis
    cx = m * 0.5 + (psf.lateral_half - pos[:, 0]) / psf.lateral_step
    cy = m * 0.5 + (psf.lateral_half - pos[:, 1]) / psf.lateral_step
    bx = np.floor(cx).astype(np.int64)
    by = np.floor(cy).astype(np.int64)
    # ceil(-b/m) = -(b//m) and floor((n-2-b)/m) = (n-2-b)//m for ints
    px_lo = np.maximum(-(bx // m), 0)
    px_hi = np.minimum((nx - 2 - bx) // m, cam.width - 1)
    py_lo = np.maximum(-(by // m), 0)
    py_hi = np.minimum((ny - 2 - by) // m, cam.height - 1)
    keep &= (px_lo <= px_hi) & (py_lo <= py_hi)
    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        return
    fx = (cx - bx)[idx]
    fy = (cy - by)[idx]
    z0 = np.minimum(fz[idx].astype(np.int64), nz - 2)
    tz = fz[idx] - z0
    bx, by = bx[idx], by[idx]
    ry0, qy0 = by % m, by // m
    ry1, qy1 = (by + 1) % m, (by + 1) // m
    rx0, qx0 = bx % m, bx // m
    rx1, qx1 = (bx + 1) % m, (bx + 1) // m
    pylo = py_lo[idx]
    pxlo = px_lo[idx]
    hh = py_hi[idx] - pylo + 1
    ww = px_hi[idx] - pxlo + 1
    # plane ids; the z0+1 sibling of any term is pid + 1
    p00 = (ry0 * m + rx0) * nz + z0
    p01 = (ry0 * m + rx1) * nz + z0
    p10 = (ry1 * m + rx0) * nz + z0
    p11 = (ry1 * m + rx1) * nz + z0
    w8 = np.empty((idx.size, 8))
    wx1, wx0 = fx, 1.0 - fx
    wy1, wy0 = fy, 1.0 - fy
    awz0 = pho[idx] * scale * (1.0 - tz)
    awz1 = pho[idx] * scale * tz
    w8[:, 0] = awz0 * wy0 * wx0
    w8[:, 1] = awz0 * wy0 * wx1
    w8[:, 2] = awz0 * wy1 * wx0
    w8[:, 3] = awz0 * wy1 * wx1
    w8[:, 4] = awz1 * wy0 * wx0
    w8[:, 5] = awz1 * wy0 * wx1
    w8[:, 6] = awz1 * wy1 * wx0
    w8[:, 7] = awz1 * wy1 * wx1
    # flat offsets into the padded planes (pitch cw + 1)
    ch, cw = -(-ny // m), -(-nx // m)
    pitch = cw + 1
    length = ch * pitch - 1
    o01 = qx1 - qx0
    o10 = (qy1 - qy0) * pitch
    o11 = o10 + o01
    flat = np.empty(ch * pitch, dtype=np.float32)
    tbuf = np.empty(length, dtype=np.float32)
    a = flat[:length]
    acc2d = flat.reshape(ch, pitch)[:, :cw]
    cols = [arr.tolist() for arr in
            (pylo, hh, pxlo, ww, pylo + qy0, pxlo + qx0,
             o01, o10, o11, p00, p01, p10, p11)]
    cols.append(w8.tolist())
    mul, add = np.multiply, np.add
    n = length
    for py0, h, px0, w, y0, x0, s01, s10, s11, i00, i01, i10, i11, wv \
            in zip(*cols):
        mul(planes[i00][:n], wv[0], out=a)
        mul(planes[i01][s01:s01 + n], wv[1], out=tbuf)
        add(a, tbuf, out=a)
        mul(planes[i10][s10:s10 + n], wv[2], out=tbuf)
        add(a, tbuf, out=a)
        mul(planes[i11][s11:s11 + n], wv[3], out=tbuf)
        add(a, tbuf, out=a)
        mul(planes[i00 + 1][:n], wv[4], out=tbuf)
        add(a, tbuf, out=a)
        mul(planes[i01 + 1][s01:s01 + n], wv[5], out=tbuf)
        add(a, tbuf, out=a)
        mul(planes[i10 + 1][s10:s10 + n], wv[6], out=tbuf)
        add(a, tbuf, out=a)
        mul(planes[i11 + 1][s11:s11 + n], wv[7], out=tbuf)
        add(a, tbuf, out=a)
        img[py0:py0 + h, px0:px0 + w] += acc2d[y0:y0 + h, x0:x0 + w]


def render(sets: Iterable[EmitterSet], psf: PsfStack, cam: CameraParams) -> FloatImage:
    """Accumulate all emitters' PSF contributions on the pixel grid.

    Additive over emitters and over sets. When pixel_size is an integer
    multiple of the PSF lateral step (the default 80/10 case) each emitter's
    pixel samples share one sub-cell offset, so the trilinear gather
    collapses to eight contiguous block reads from phase-decimated copies
    of the stack; otherwise a generic per-pixel interpolation path is used.
    Both paths produce the value
    photons * psf_value(pixel_center - emitter) * (pixel_size / step)^2.
    """
    cam.validate()
    img = np.zeros((cam.height, cam.width), dtype=np.float64)
    scale = (cam.pixel_size / psf.lateral_step) ** 2
    ratio = cam.pixel_size / psf.lateral_step
    m = int(round(ratio))
    if abs(ratio - m) < 1e-9 and m >= 1:
        _, planes = _phase_tables(psf, m)
        for eset in sets:
            _render_set_fast(img, eset, psf, cam, m, scale, planes)
    else:
        nz = psf.values.shape[0]
        for eset in sets:
            for (x, y, z), photons in zip(eset.positions, eset.photons):
                if photons == 0:
                    continue
                fz = (z + psf.axial_half) / psf.axial_step
                if fz < 0 or fz > nz - 1:
                    continue
                _render_emitter_generic(img, psf, cam, x, y, z, photons,
                                        scale)
    return FloatImage(pixels=img, pixel_size=cam.pixel_size)


def add_noise(img: FloatImage, cam: CameraParams, rng: np.random.Generator) -> Image:
    """Shot + dark-current noise and baseline, clamped to the ADC ceiling."""
    cam.validate()
    lam = img.pixels + cam.dark_counts
    counts = rng.poisson(lam).astype(np.int64) + int(round(cam.baseline))
    counts = np.minimum(counts, cam.max_count)
    return Image(pixels=counts.astype(np.uint16), pixel_size=img.pixel_size)


def montage(tiles: Sequence[FloatImage]) -> FloatImage:
    """Place four equal square tiles on a 2x2 grid (row-major order)."""
    if len(tiles) != 4:
        raise ValueError("montage needs exactly 4 tiles")
    shapes = {t.pixels.shape for t in tiles}
    sizes = {t.pixel_size for t in tiles}
    if len(shapes) != 1 or len(sizes) != 1:
        raise ValueError("tiles must share shape and pixel_size")
    h, w = tiles[0].pixels.shape
    if h != w:
        raise ValueError("tiles must be square")
    out = np.zeros((2 * h, 2 * w), dtype=np.float64)
    out[:h, :w] = tiles[0].pixels
    out[:h, w:] = tiles[1].pixels
    out[h:, :w] = tiles[2].pixels
    out[h:, w:] = tiles[3].pixels
    return FloatImage(pixels=out, pixel_size=tiles[0].pixel_size)


def measure_snr(img: Image, foreground: np.ndarray) -> float:
    """Peak-over-noise SNR: (99th pct foreground - bg mean) / bg std."""
    pixels = img.pixels if hasattr(img, "pixels") else np.asarray(img)
    fg = np.asarray(foreground).astype(bool)
    if fg.shape != pixels.shape:
        raise ValueError("foreground mask shape mismatch")
    if not fg.any() or fg.all():
        raise ValueError("foreground must be non-empty and non-full")
    fg_vals = pixels[fg].astype(np.float64)
    bg_vals = pixels[~fg].astype(np.float64)
    bg_std = bg_vals.std()
    if bg_std == 0:
        raise ValueError("degenerate background: zero variance")
    return float((np.percentile(fg_vals, 99) - bg_vals.mean()) / bg_std)


def mean_snr_over_samples(config, photon_rate: float, seed: int, n_samples: int) -> float:
    """Mean measured SNR of freshly generated samples at the given rate."""
    from .dataset import generate_sample  # deferred: dataset depends on imaging

    cfg = config.with_photon_rate(photon_rate)
    snrs = []
    for i in range(n_samples):
        sample = generate_sample(cfg, stable_hash(seed, CAL_STREAM, i))
        if sample.snr is not None:
            snrs.append(sample.snr)
    if not snrs:
        raise CalibrationError("no sample produced a measurable SNR")
    return float(np.mean(snrs))


def calibrate_snr(target: float, tolerance: float, config, seed: int = 0,
                  n_samples: int = 20, max_iter: int = 24) -> float:
    """Bisect the photophysics photon_rate until mean sample SNR hits target.

    The initial bracket spans [rate/32, rate*32] around the configured rate;
    failure to bracket the target raises CalibrationError with both endpoint
    measurements. Deterministic for a given seed; the same seeds are reused
    at every trial rate, so the objective is effectively noise-free across
    iterations.
    """
    if target <= 0:
        raise ValueError("target SNR must be positive")
    rate0 = config.photophysics.photon_rate
    lo, hi = rate0 / 32.0, rate0 * 32.0
    f_lo = mean_snr_over_samples(config, lo, seed, n_samples)
    f_hi = mean_snr_over_samples(config, hi, seed, n_samples)
    if f_hi <= f_lo:
        raise CalibrationError(
            f"mean SNR did not increase with photon rate: "
            f"f({lo:.3g})={f_lo:.3f}, f({hi:.3g})={f_hi:.3f}"
        )
    if not (f_lo < target < f_hi):
        raise CalibrationError(
            f"target SNR {target} not bracketed: f({lo:.3g})={f_lo:.3f}, "
            f"f({hi:.3g})={f_hi:.3f}; adjust the configured photon_rate"
        )
    rate = rate0
    for _ in range(max_iter):
        rate = float(np.sqrt(lo * hi))  # bisect in log space
        snr = mean_snr_over_samples(config, rate, seed, n_samples)
        if abs(snr - target) <= 0.5 * tolerance:
            return rate
        if snr < target:
            lo = rate
        else:
            hi = rate
    return rate
