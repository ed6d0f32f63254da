"""PSNR and single-scale SSIM on [0,1]-ranged NCHW tensors."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ops import ShapeError

PSNR_CAP = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def psnr(a, b):
    """10*log10(1/MSE) in dB, capped at 99 when MSE < 1e-10."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-10:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _ssim_window():
    r = SSIM_WINDOW // 2
    ax = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * SSIM_SIGMA ** 2))
    return g / g.sum()


def ssim(a, b):
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), valid positions."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    N, C, H, W = a.shape
    if H < SSIM_WINDOW or W < SSIM_WINDOW:
        raise ShapeError(
            f"image {H}x{W} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    win = _ssim_window()

    def local(x, y):
        # windowed first/second moments at every valid position
        wa = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW), axis=(2, 3))
        wb = sliding_window_view(y, (SSIM_WINDOW, SSIM_WINDOW), axis=(2, 3))
        mu_a = np.einsum("nchwij,ij->nchw", wa, win)
        mu_b = np.einsum("nchwij,ij->nchw", wb, win)
        var_a = np.einsum("nchwij,ij->nchw", wa * wa, win) - mu_a ** 2
        var_b = np.einsum("nchwij,ij->nchw", wb * wb, win) - mu_b ** 2
        cov = np.einsum("nchwij,ij->nchw", wa * wb, win) - mu_a * mu_b
        return mu_a, mu_b, var_a, var_b, cov

    mu_a, mu_b, var_a, var_b, cov = local(a, b)
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))
