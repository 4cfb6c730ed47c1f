"""Image quality metrics: peak signal-to-noise ratio and structural similarity."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def psnr(ref: np.ndarray, test: np.ndarray, peak: float = 2.0) -> float:
    """10 log10(peak^2 / MSE), capped at 100 dB for vanishing error."""
    ref = np.asarray(ref, float)
    test = np.asarray(test, float)
    if ref.shape != test.shape:
        raise ShapeError(f"shape mismatch {ref.shape} vs {test.shape}")
    mse = float(np.mean((ref - test) ** 2))
    if mse < 1e-300:
        return 100.0
    return min(100.0, 10.0 * np.log10(peak * peak / mse))


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    w = np.exp(-0.5 * (x / sigma) ** 2)
    w2 = np.outer(w, w)
    return w2 / w2.sum()


def _window_means(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Valid-mode weighted local means via a sliding-window view."""
    k = window.shape[0]
    view = np.lib.stride_tricks.sliding_window_view(img, (k, k))
    return np.einsum("ijkl,kl->ij", view, window)


def ssim(ref: np.ndarray, test: np.ndarray, peak: float = 2.0) -> float:
    """Mean structural similarity over valid 11x11 Gaussian windows (sigma 1.5).

    Stabilizers K1 = 0.01 and K2 = 0.03 of the dynamic range ``peak``.
    """
    ref = np.asarray(ref, float)
    test = np.asarray(test, float)
    if ref.shape != test.shape:
        raise ShapeError(f"shape mismatch {ref.shape} vs {test.shape}")
    if ref.ndim != 2:
        raise ShapeError("ssim expects 2-D images")
    win = _gaussian_window(11, 1.5)
    if ref.shape[0] < 11 or ref.shape[1] < 11:
        raise ShapeError("images smaller than the 11x11 window")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    mu_x = _window_means(ref, win)
    mu_y = _window_means(test, win)
    xx = _window_means(ref * ref, win) - mu_x * mu_x
    yy = _window_means(test * test, win) - mu_y * mu_y
    xy = _window_means(ref * test, win) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))
