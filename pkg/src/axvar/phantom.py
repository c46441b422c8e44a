"""Experiment inputs: the depth-dependent Gaussian-cosine kernel family,
synthetic reflectivity maps, noise, quality metrics and B-mode display."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import hilbert

from .axial_model import AxialKernelStack
from .noise import NO_NOISE, add_awgn, rng_for, snr_db  # noqa: F401  (re-exported)

F0_HZ = 3e6
FS_HZ = 20e6
PSNR_CAP_DB = 999.0
# intensity maps in [0, 1] stand in for 8-bit grayscale scans
GRAY_LEVELS = 255.0

# (m_t, n_t, m_r, n_r) per reference configuration
REFERENCE_SIZES = {
    "trf1": (2480, 480, 9, 50),
    "trf2": (2598, 480, 7, 35),
    "trf3": (2598, 480, 5, 25),
}


def gaussian_window(x, mu, sigma):
    """Normalized Gaussian density evaluated at ``x``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-((x - mu) ** 2) / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi))


@dataclass
class KernelParams:
    """Kernel family parameters; sigmas default to radius / 3.

    A zero radius has no natural width, so its default sigma is 1 pixel;
    the resulting 1x1 kernel is a pure gain.
    """

    m_t: int
    m_r: int
    n_r: int
    f0: float = F0_HZ
    fs: float = FS_HZ
    sigma1: Optional[float] = None
    sigma2: Optional[float] = None

    def __post_init__(self):
        if self.m_t < 1 or self.m_r < 0 or self.n_r < 0:
            raise ValueError("need m_t >= 1 and nonnegative radii")
        if self.sigma1 is None:
            self.sigma1 = self.m_r / 3.0 if self.m_r > 0 else 1.0
        if self.sigma2 is None:
            self.sigma2 = self.n_r / 3.0 if self.n_r > 0 else 1.0
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("kernel standard deviations must be positive")
        if not 0 < self.f0 < self.fs / 2:
            raise ValueError(f"need 0 < f0 < fs/2, got f0={self.f0}, fs={self.fs}")

    @property
    def center(self):
        """1-based kernel centre (mu_z, mu_x)."""
        return (self.m_r + 1, self.n_r + 1)


def lateral_sigma(i_h, p: KernelParams):
    """Lateral SD at row ``i_h``: sigma1 at the focal row m_t/2, sigma2 at row m_t."""
    i_h = np.asarray(i_h, dtype=np.float64)
    t = 2.0 * i_h / p.m_t - 1.0
    return np.sqrt(t * t * (p.sigma2 ** 2 - p.sigma1 ** 2) + p.sigma1 ** 2)


def make_kernel(i_h: int, p: KernelParams) -> np.ndarray:
    if not 1 <= i_h <= p.m_t:
        raise ValueError(f"row index {i_h} outside 1..{p.m_t}")
    mu_z, mu_x = p.center
    i = np.arange(1, 2 * p.m_r + 2)
    j = np.arange(1, 2 * p.n_r + 2)
    axial = gaussian_window(i, mu_z, p.sigma1) * np.cos(2.0 * math.pi * p.f0 / p.fs * (i - mu_z))
    lateral = gaussian_window(j, mu_x, float(lateral_sigma(i_h, p)))
    return np.outer(axial, lateral)


def make_stack(p: KernelParams) -> AxialKernelStack:
    return AxialKernelStack(np.stack([make_kernel(i_h, p) for i_h in range(1, p.m_t + 1)]))


# -- reflectivity -------------------------------------------------------------


@dataclass
class TrfSpec:
    """Reflectivity request: scatterer SD scale per pixel, plus a seed.

    The TRF is ``amplitude * map * scatterers``. With ``upsample > 1``
    scatterers are drawn on a grid ``upsample`` times coarser and
    bilinearly interpolated before modulation.
    """

    rows: int
    cols: int
    intensity_map: np.ndarray
    seed: int = 0
    upsample: int = 1
    amplitude: float = 1.0


def _bilinear_upsample(coarse, shape, factor):
    rows, cols = shape
    ri = np.arange(rows) / factor
    ci = np.arange(cols) / factor
    r0 = np.minimum(np.floor(ri).astype(int), coarse.shape[0] - 2)
    c0 = np.minimum(np.floor(ci).astype(int), coarse.shape[1] - 2)
    fr = (ri - r0)[:, None]
    fc = (ci - c0)[None, :]
    a = coarse[np.ix_(r0, c0)]
    b = coarse[np.ix_(r0 + 1, c0)]
    c = coarse[np.ix_(r0, c0 + 1)]
    d = coarse[np.ix_(r0 + 1, c0 + 1)]
    return (1 - fr) * (1 - fc) * a + fr * (1 - fc) * b + (1 - fr) * fc * c + fr * fc * d


def make_trf(spec: TrfSpec) -> np.ndarray:
    imap = np.asarray(spec.intensity_map, dtype=np.float64)
    shape = (spec.rows, spec.cols)
    if imap.shape != shape:
        raise ValueError(f"intensity map {imap.shape} does not match TRF size {shape}")
    if spec.upsample < 1:
        raise ValueError("upsample factor must be >= 1")
    rng = rng_for(spec.seed)
    u = spec.upsample
    if u == 1:
        scat = rng.standard_normal(shape)
    else:
        coarse = rng.standard_normal(((spec.rows - 1) // u + 2, (spec.cols - 1) // u + 2))
        scat = _bilinear_upsample(coarse, shape, u)
    return spec.amplitude * scat * imap


def synthetic_map(rows: int, cols: int) -> np.ndarray:
    """Deterministic intensity map in [0, 1] built from geometric primitives.

    A depth gradient background with an anechoic cyst, a bright inclusion,
    a hyperechoic wedge and a column of point targets.
    """
    r = (np.arange(rows)[:, None] + 0.5) / rows
    c = (np.arange(cols)[None, :] + 0.5) / cols
    aspect = cols / rows
    m = np.broadcast_to(0.35 + 0.2 * r, (rows, cols)).copy()

    def disk(cr, cc, rad):
        return ((r - cr) ** 2 + ((c - cc) * aspect) ** 2) <= rad ** 2

    m = np.where(disk(0.25, 0.3, 0.09), 0.05, m)
    m = np.where(disk(0.7, 0.65, 0.11), 0.9, m)
    wedge = (r > 0.4) & (r < 0.6) & (np.abs(c - 0.25) < (r - 0.4) * 0.8)
    m = np.where(wedge, 0.75, m)
    for cr in (0.15, 0.35, 0.55, 0.75, 0.9):
        ir = min(rows - 1, int(cr * rows))
        ic = min(cols - 1, int(0.85 * cols))
        m[ir, ic] = 1.0
    return np.clip(m, 0.0, 1.0)


# -- metrics --------------------------------------------------------------


def _pair(ref, est):
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {est.shape}")
    return ref, est


def nrmse(ref, est) -> float:
    ref, est = _pair(ref, est)
    den = np.linalg.norm(ref)
    if den == 0:
        raise ValueError("nrmse undefined for an all-zero reference")
    return float(np.linalg.norm(est - ref) / den)


def psnr(ref, est) -> float:
    ref, est = _pair(ref, est)
    rms = math.sqrt(float(np.mean((est - ref) ** 2)))
    peak = float(np.max(np.abs(ref)))
    if rms == 0.0:
        return PSNR_CAP_DB
    if peak == 0.0:
        return -PSNR_CAP_DB
    return min(PSNR_CAP_DB, 20.0 * math.log10(peak / rms))


# -- display ------------------------------------------------------------------


def envelope(rf) -> np.ndarray:
    """Per-column analytic-signal magnitude along the axial (row) axis."""
    rf = np.asarray(rf, dtype=np.float64)
    return np.abs(hilbert(rf, axis=0))


def bmode_render(rf, dynamic_range_db: float = 40.0) -> np.ndarray:
    """Envelope, normalize to the global max, log-compress, map to uint8."""
    if not dynamic_range_db > 0:
        raise ValueError("dynamic range must be positive")
    env = envelope(rf)
    peak = env.max()
    if not peak > 0:
        raise ValueError("cannot render an all-zero image")
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(env / peak)
    db = np.clip(db, -dynamic_range_db, 0.0)
    return np.rint((db + dynamic_range_db) * (255.0 / dynamic_range_db)).astype(np.uint8)


def kernel_preview(stack: AxialKernelStack, depths: int = 20, gap: int = 2) -> np.ndarray:
    """Envelopes of kernels at regularly spaced depths, side by side.

    Each envelope is min-max normalized to [0, 255]; ``gap`` blank
    columns separate neighbours.
    """
    rows = np.unique(np.linspace(1, stack.m_t, depths).round().astype(int))
    tiles = []
    for i_h in rows:
        env = envelope(stack.kernel(int(i_h)))
        lo, hi = env.min(), env.max()
        tile = (env - lo) / (hi - lo) if hi > lo else np.zeros_like(env)
        tiles.append(tile)
        tiles.append(np.zeros((env.shape[0], gap)))
    strip = np.hstack(tiles[:-1])
    return np.rint(255.0 * strip).astype(np.uint8)
