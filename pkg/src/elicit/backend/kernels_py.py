"""Pure-numpy implementation of the MMD^2 pair-sum kernels.

Mirrors the interface of the compiled ``_kernels`` extension; selected by
``elicit.backend`` when the extension is unavailable or disabled. The
broadcasting here materialises the full [B, n, m] difference tensors, which
the compiled version avoids.
"""

import numpy as np


def mmd2_energy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-batch biased MMD^2 with the energy kernel k(a, b) = -|a - b|.

    x: [B, n] model statistic samples, y: [m] reference samples.
    Returns one value per batch row.
    """
    n = x.shape[1]
    m = y.shape[0]
    dxx = np.abs(x[:, :, None] - x[:, None, :]).sum(axis=(1, 2))
    dxy = np.abs(x[:, :, None] - y[None, None, :]).sum(axis=(1, 2))
    dyy = np.abs(y[:, None] - y[None, :]).sum()
    return -dxx / (n * n) - dyy / (m * m) + 2.0 * dxy / (n * m)


def mmd2_energy_grad(x: np.ndarray, y: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of ``upstream . mmd2_energy(x, y)`` with respect to x."""
    n = x.shape[1]
    m = y.shape[0]
    sxx = np.sign(x[:, :, None] - x[:, None, :]).sum(axis=2)
    sxy = np.sign(x[:, :, None] - y[None, None, :]).sum(axis=2)
    return upstream[:, None] * (-2.0 * sxx / (n * n) + 2.0 * sxy / (n * m))


def mmd2_gaussian(x: np.ndarray, y: np.ndarray, sigma: float) -> np.ndarray:
    """Per-batch biased MMD^2 with k(a, b) = exp(-(a - b)^2 / (2 sigma^2))."""
    n = x.shape[1]
    m = y.shape[0]
    c = 1.0 / (2.0 * sigma * sigma)
    kxx = np.exp(-c * (x[:, :, None] - x[:, None, :]) ** 2).sum(axis=(1, 2))
    kxy = np.exp(-c * (x[:, :, None] - y[None, None, :]) ** 2).sum(axis=(1, 2))
    kyy = np.exp(-c * (y[:, None] - y[None, :]) ** 2).sum()
    return kxx / (n * n) + kyy / (m * m) - 2.0 * kxy / (n * m)


def mmd2_gaussian_grad(
    x: np.ndarray, y: np.ndarray, sigma: float, upstream: np.ndarray
) -> np.ndarray:
    """Gradient of ``upstream . mmd2_gaussian(x, y, sigma)`` with respect to x."""
    n = x.shape[1]
    m = y.shape[0]
    s2 = sigma * sigma
    c = 1.0 / (2.0 * s2)
    dxx = x[:, :, None] - x[:, None, :]
    dxy = x[:, :, None] - y[None, None, :]
    gxx = (np.exp(-c * dxx**2) * dxx).sum(axis=2)
    gxy = (np.exp(-c * dxy**2) * dxy).sum(axis=2)
    return upstream[:, None] * (-2.0 * gxx / (n * n * s2) + 2.0 * gxy / (n * m * s2))
