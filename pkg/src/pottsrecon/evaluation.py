"""Test phantoms, additive noise and the mean structural similarity index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .core import as_image

__all__ = ["NoiseSpec", "add_noise", "disk_phantom", "mssim", "shepp_logan"]

# (intensity, semi-axis x, semi-axis y, center x, center y, rotation in degrees)
# modified (high-contrast) Shepp-Logan on [-1, 1]^2, y pointing up
_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def shepp_logan(n: int) -> np.ndarray:
    """Modified 10-ellipse Shepp-Logan phantom sampled at pixel centers, values in [0, 1]."""
    if n < 16:
        raise ValueError(f"phantom size must be at least 16, got {n}")
    coords = (np.arange(n) + 0.5) / n * 2 - 1
    x = coords[None, :]
    y = -coords[:, None]
    img = np.zeros((n, n))
    for value, ax, ay, x0, y0, deg in _SHEPP_LOGAN:
        th = np.deg2rad(deg)
        c, s = np.cos(th), np.sin(th)
        xr = (x - x0) * c + (y - y0) * s
        yr = -(x - x0) * s + (y - y0) * c
        img[(xr / ax) ** 2 + (yr / ay) ** 2 <= 1.0] += value
    # snap accumulated roundoff so equal regions stay exactly equal
    return np.clip(np.round(img, 12), 0.0, 1.0)


def disk_phantom(n: int, radius: float, supersample: int = 8) -> np.ndarray:
    """Centered disk with area-weighted edge pixels."""
    ss = supersample
    grid = (np.arange(n * ss) + 0.5) / ss - 0.5 - (n - 1) / 2
    inside = (grid[:, None] ** 2 + grid[None, :] ** 2) < radius**2
    return inside.reshape(n, ss, n, ss).mean(axis=(1, 3))


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("noise sigma must be nonnegative")


def add_noise(v, spec: NoiseSpec) -> np.ndarray:
    """Add i.i.d. ``N(0, sigma^2)`` noise drawn from ``default_rng(seed)``."""
    v = np.asarray(v, dtype=np.float64)
    if spec.sigma == 0:
        return v.copy()
    rng = np.random.default_rng(spec.seed)
    return v + spec.sigma * rng.standard_normal(v.shape)


def _gaussian_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def _filter_valid(img, w):
    # separable correlation, keeping only windows fully inside the image
    r = (len(w) - 1) // 2
    out = correlate1d(correlate1d(img, w, axis=0, mode="constant"), w, axis=1, mode="constant")
    return out[r:-r, r:-r]


def mssim(x, y, data_range: float = 1.0, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5) over all interior windows.

    Inputs are clipped to ``[0, data_range]`` before comparison.
    """
    x = as_image(x, "x")
    y = as_image(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if min(x.shape) < 11:
        raise ValueError("images must be at least 11x11 for an 11x11 window")
    x = np.clip(x, 0.0, data_range)
    y = np.clip(y, 0.0, data_range)
    w = _gaussian_window()
    mx, my = _filter_valid(x, w), _filter_valid(y, w)
    sxx = _filter_valid(x * x, w) - mx * mx
    syy = _filter_valid(y * y, w) - my * my
    sxy = _filter_valid(x * y, w) - mx * my
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))
