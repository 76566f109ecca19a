"""Image-quality and diversity metrics.

Images are H x W x C float arrays in [0, 1]; accumulation happens in
float64 throughout.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.signal import correlate2d

from .errors import ShapeError

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def as_image(arr: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] float64."""
    return np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10 log10(1 / MSE) with MAX = 1; identical images report the 99 dB cap."""
    a, b = _check_pair(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(1.0 / mse)), PSNR_CAP_DB)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Single-scale SSIM: 11 x 11 Gaussian window (sigma 1.5), K1=0.01,
    K2=0.03, L=1, averaged over valid window positions and channels."""
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ShapeError(
            f"image min dimension must be >= {SSIM_WINDOW}, got {a.shape[:2]}"
        )
    win = _gaussian_window()
    c1 = (SSIM_K1) ** 2
    c2 = (SSIM_K2) ** 2
    scores = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mu_x = correlate2d(x, win, mode="valid")
        mu_y = correlate2d(y, win, mode="valid")
        var_x = correlate2d(x * x, win, mode="valid") - mu_x**2
        var_y = correlate2d(y * y, win, mode="valid") - mu_y**2
        cov = correlate2d(x * y, win, mode="valid") - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def foreground_mask(
    img: np.ndarray, background: float = 1.0, tau: float = 0.05
) -> np.ndarray:
    """Foreground where the max-channel deviation from the background
    exceeds tau."""
    img = as_image(img)
    if img.ndim == 2:
        img = img[..., None]
    return np.max(np.abs(img - background), axis=-1) > tau


def iou_mask(
    a: np.ndarray, b: np.ndarray, background: float = 1.0, tau: float = 0.05
) -> float:
    """Intersection over union of thresholded foreground masks; two empty
    masks count as a perfect match."""
    a, b = _check_pair(a, b)
    fa = foreground_mask(a, background, tau)
    fb = foreground_mask(b, background, tau)
    union = np.logical_or(fa, fb).sum()
    if union == 0:
        return 1.0
    inter = np.logical_and(fa, fb).sum()
    return float(inter / union)


def seed_diversity(samples: list[np.ndarray]) -> float:
    """Mean pairwise per-pixel RMS distance across a set of generations."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    imgs = [as_image(s) for s in samples]
    shape = imgs[0].shape
    if any(im.shape != shape for im in imgs):
        raise ShapeError("all samples must share one shape")
    dists = [
        float(np.sqrt(np.mean((x - y) ** 2)))
        for x, y in itertools.combinations(imgs, 2)
    ]
    return float(np.mean(dists))
