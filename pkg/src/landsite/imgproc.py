"""Self-contained raster primitives: color conversion, Canny edges, exact
Euclidean distance transform, Gabor filter bank, connected-region extraction.

All operations are stateless and reentrant. Images are numpy arrays, RGB as
(H, W, 3) uint8, grayscale as (H, W) uint8, masks as (H, W) bool or 0/1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage
from scipy.signal import fftconvolve

# Squared-distance sentinel for "no feature pixel"; large enough to dominate
# any real squared distance on supported image sizes, small enough to square-add
# without overflowing int64.
_INF_COST = np.int64(1) << 40


# ---------------------------------------------------------------------------
# Color conversion
# ---------------------------------------------------------------------------

def rgb_to_gray(img):
    """Luma grayscale: 0.299 R + 0.587 G + 0.114 B, rounded half-up to uint8."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected (H, W, 3) RGB image")
    g = 0.299 * img[..., 0].astype(np.float64) + 0.587 * img[..., 1] + 0.114 * img[..., 2]
    return np.floor(g + 0.5).astype(np.uint8)


def rgb_to_hsv(img):
    """Standard hexcone HSV. Returns float (H, W, 3) with H in [0, 360), S, V in [0, 1]."""
    rgb = np.asarray(img, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(v > 0, c / v, 0.0)
        hr = np.where(c > 0, ((g - b) / c) % 6.0, 0.0)
        hg = np.where(c > 0, (b - r) / c + 2.0, 0.0)
        hb = np.where(c > 0, (r - g) / c + 4.0, 0.0)
    h = np.where(v == r, hr, np.where(v == g, hg, hb))
    h = np.where(c > 0, h * 60.0, 0.0) % 360.0
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv):
    """Inverse of rgb_to_gray's companion; used for round-trip checks."""
    h = np.asarray(hsv[..., 0], dtype=np.float64) / 60.0
    s = np.asarray(hsv[..., 1], dtype=np.float64)
    v = np.asarray(hsv[..., 2], dtype=np.float64)
    c = v * s
    x = c * (1.0 - np.abs(h % 2.0 - 1.0))
    m = v - c
    sector = np.floor(h).astype(int) % 6
    shapes = [(c, x, 0), (x, c, 0), (0, c, x), (0, x, c), (x, 0, c), (c, 0, x)]
    r = np.choose(sector, [sh[0] for sh in shapes])
    g = np.choose(sector, [sh[1] for sh in shapes])
    b = np.choose(sector, [sh[2] for sh in shapes])
    rgb = np.stack([r + m, g + m, b + m], axis=-1)
    return np.floor(rgb * 255.0 + 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# Canny edge detector
# ---------------------------------------------------------------------------

CANNY_GAUSS_SIGMA = 1.4
CANNY_GAUSS_TAPS = 5


def _gauss_kernel_1d(sigma, taps):
    r = taps // 2
    k = np.exp(-0.5 * (np.arange(-r, r + 1) / sigma) ** 2)
    return k / k.sum()


def _smooth(gray):
    k = _gauss_kernel_1d(CANNY_GAUSS_SIGMA, CANNY_GAUSS_TAPS)
    r = CANNY_GAUSS_TAPS // 2
    pad = np.pad(gray.astype(np.float64), r, mode="symmetric")
    out = fftconvolve(pad, k[None, :], mode="valid")
    out = fftconvolve(out, k[:, None], mode="valid")
    return out


def sobel(gray):
    """Sobel gradients of a (smoothed) image. Returns (gx, gy) float arrays."""
    img = np.asarray(gray, dtype=np.float64)
    pad = np.pad(img, 1, mode="symmetric")
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
    gx = fftconvolve(pad, kx[::-1, ::-1], mode="valid")
    gy = fftconvolve(pad, kx.T[::-1, ::-1], mode="valid")
    return gx, gy


def canny(gray, threshold):
    """Canny edges with hysteresis high = threshold, low = threshold / 2.

    Returns a uint8 mask, 1 on edge pixels. The threshold applies to the
    Sobel gradient magnitude of the Gaussian-smoothed 8-bit image.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ValueError("expected a grayscale image")
    smoothed = _smooth(gray)
    gx, gy = sobel(smoothed)
    mag = np.hypot(gx, gy)

    # Non-maximum suppression with the gradient direction quantized to
    # 4 sectors; strict > toward the forward neighbor thins 2-px plateaus.
    angle = np.arctan2(gy, gx) % np.pi
    sector = np.floor((angle + np.pi / 8) / (np.pi / 4)).astype(np.int8) % 4
    offs = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    padm = np.pad(mag, 1, mode="constant", constant_values=-1.0)
    keep = np.zeros_like(mag, dtype=bool)
    for s, (di, dj) in offs.items():
        fwd = padm[1 + di : padm.shape[0] - 1 + di, 1 + dj : padm.shape[1] - 1 + dj]
        bwd = padm[1 - di : padm.shape[0] - 1 - di, 1 - dj : padm.shape[1] - 1 - dj]
        sel = sector == s
        keep |= sel & (mag > fwd) & (mag >= bwd)
    keep[0, :] = keep[-1, :] = False
    keep[:, 0] = keep[:, -1] = False

    strong = keep & (mag >= threshold)
    weak = keep & (mag >= threshold / 2.0)
    if not strong.any():
        return np.zeros_like(gray, dtype=np.uint8)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    seeded = np.zeros(n + 1, dtype=bool)
    seeded[np.unique(labels[strong])] = True
    seeded[0] = False
    return seeded[labels].astype(np.uint8)


# ---------------------------------------------------------------------------
# Exact Euclidean distance transform (two-pass lower-envelope algorithm)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _edt_cols(mask, g):
    h, w = mask.shape
    inf = h + w + 1
    for j in range(w):
        d = inf
        for i in range(h):
            d = 0 if mask[i, j] else min(d + 1, inf)
            g[i, j] = d
        d = inf
        for i in range(h - 1, -1, -1):
            d = 0 if mask[i, j] else min(d + 1, inf)
            if d < g[i, j]:
                g[i, j] = d


@njit(cache=True)
def _edt_rows(g, out, inf_cost):
    h, w = g.shape
    v = np.empty(w, dtype=np.int64)
    z = np.empty(w + 1, dtype=np.float64)
    f = np.empty(w, dtype=np.int64)
    big = np.int64(h + w + 1)
    for i in range(h):
        for j in range(w):
            gij = g[i, j]
            f[j] = inf_cost if gij >= big else gij * gij
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, w):
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
            while s <= z[k]:
                k -= 1
                s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k += 1
            out[i, q] = (q - v[k]) * (q - v[k]) + f[v[k]]


def edt_squared(mask):
    """Exact squared Euclidean distance to the nearest non-zero pixel (int64).

    Raises ValueError on an all-zero mask (squared distances are undefined;
    use edt(), which returns the +inf sentinel for that case).
    """
    m = np.ascontiguousarray(np.asarray(mask) != 0)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("expected a non-empty 2D mask")
    if not m.any():
        raise ValueError("mask has no non-zero pixel")
    g = np.empty(m.shape, dtype=np.int64)
    _edt_cols(m, g)
    out = np.empty(m.shape, dtype=np.int64)
    _edt_rows(g, out, _INF_COST)
    return out


def edt(mask):
    """Exact Euclidean distance (px, float64) to the nearest non-zero pixel.

    Zero on non-zero pixels; +inf everywhere if the mask is all zero.
    """
    m = np.asarray(mask)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("expected a non-empty 2D mask")
    if not (m != 0).any():
        return np.full(m.shape, np.inf, dtype=np.float64)
    return np.sqrt(edt_squared(m).astype(np.float64))


# ---------------------------------------------------------------------------
# Gabor filter bank
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaborParams:
    wavelengths: tuple = (0.5, 1.0, 5.0)
    orientations: tuple = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)
    phase: float = 0.0
    sigma: float = 4.0
    aspect_ratio: float = 0.02
    kernel_size: int = 25  # 2 * ceil(3 * sigma) + 1

    def __post_init__(self):
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 3")
        if self.sigma <= 0 or any(w <= 0 for w in self.wavelengths):
            raise ValueError("sigma and wavelengths must be positive")


def gabor_kernel(wavelength, theta, phase, sigma, gamma, size):
    """Real Gabor kernel: oriented Gaussian envelope times a cosine carrier."""
    r = size // 2
    y, x = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    xr = x * np.cos(theta) + y * np.sin(theta)
    yr = -x * np.sin(theta) + y * np.cos(theta)
    return np.exp(-(xr**2 + (gamma * yr) ** 2) / (2.0 * sigma**2)) * np.cos(
        2.0 * np.pi * xr / wavelength + phase
    )


def gabor_bank(gray, params: GaborParams = GaborParams()):
    """One orientation-averaged Gabor response image per wavelength.

    The response at each wavelength is the mean over the four oriented
    convolutions; by linearity this equals one convolution with the
    orientation-averaged kernel. Borders are handled by reflection.
    """
    img = np.asarray(gray, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a grayscale image")
    r = params.kernel_size // 2
    pad = np.pad(img, r, mode="symmetric")
    out = []
    for lam in params.wavelengths:
        k = np.mean(
            [
                gabor_kernel(lam, th, params.phase, params.sigma, params.aspect_ratio, params.kernel_size)
                for th in params.orientations
            ],
            axis=0,
        )
        out.append(fftconvolve(pad, k[::-1, ::-1], mode="valid"))
    return out


# ---------------------------------------------------------------------------
# Connected-region extraction
# ---------------------------------------------------------------------------

@dataclass
class RegionMask:
    """One 8-connected component: full-frame boolean mask plus its ordered
    outer contour as (u, v) pixel coordinates."""

    mask: np.ndarray
    contour: np.ndarray
    area: int = field(default=0)

    def __post_init__(self):
        if self.area == 0:
            self.area = int(self.mask.sum())


_MOORE = np.array(
    [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)],
    dtype=np.int64,
)


@njit(cache=True)
def _dir_index(di, dj):
    if di == -1:
        return 0 if dj == 0 else (1 if dj == 1 else 7)
    if di == 0:
        return 2 if dj == 1 else 6
    return 4 if dj == 0 else (3 if dj == 1 else 5)


@njit(cache=True)
def _trace_contour(mask, start_i, start_j, offs):
    h, w = mask.shape
    max_steps = 4 * h * w + 8
    path = np.empty((max_steps, 2), dtype=np.int64)
    path[0, 0] = start_i
    path[0, 1] = start_j
    n = 1
    ci, cj = start_i, start_j
    # Backtrack starts due west of the topmost-leftmost pixel (background).
    bi, bj = start_i, start_j - 1
    first_i, first_j, first_dir = -1, -1, -1
    while n < max_steps:
        db = _dir_index(bi - ci, bj - cj)
        found = -1
        pbi, pbj = bi, bj
        for s in range(1, 9):
            d = (db + s) % 8
            ni = ci + offs[d, 0]
            nj = cj + offs[d, 1]
            if 0 <= ni < h and 0 <= nj < w and mask[ni, nj]:
                found = d
                break
            pbi, pbj = ni, nj
        if found < 0:
            break  # isolated pixel
        if first_dir < 0:
            first_i, first_j, first_dir = ci, cj, found
        elif ci == first_i and cj == first_j and found == first_dir:
            break  # same cell left in the same direction: cycle complete
        ci += offs[found, 0]
        cj += offs[found, 1]
        bi, bj = pbi, pbj
        path[n, 0] = ci
        path[n, 1] = cj
        n += 1
    return path[:n]


def region_contour(mask):
    """Ordered outer boundary pixels of a connected mask as (u, v) float array."""
    idx = np.argwhere(mask)
    if len(idx) == 0:
        raise ValueError("empty mask")
    start = idx[np.lexsort((idx[:, 1], idx[:, 0]))][0]
    path = _trace_contour(np.ascontiguousarray(mask, dtype=np.bool_), start[0], start[1], _MOORE)
    # Deduplicate consecutive repeats of the start pixel, keep order.
    uv = np.stack([path[:, 1], path[:, 0]], axis=1).astype(np.float64)
    if len(uv) > 1 and (uv[-1] == uv[0]).all():
        uv = uv[:-1]
    return uv


def extract_regions(mask, min_area_px):
    """8-connected components of a binary mask with at least min_area_px pixels.

    Components are returned largest-first, each with its outer contour.
    """
    if min_area_px < 1:
        raise ValueError("min_area_px must be >= 1")
    m = np.asarray(mask) != 0
    labels, n = ndimage.label(m, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return []
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    keep = [k for k in range(1, n + 1) if counts[k] >= min_area_px]
    keep.sort(key=lambda k: -counts[k])
    regions = []
    for k in keep:
        rm = labels == k
        regions.append(RegionMask(mask=rm, contour=region_contour(rm), area=int(counts[k])))
    return regions
