"""PSNR and uniform-window SSIM."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInput, ShapeError


@dataclass(frozen=True)
class MetricConfig:
    data_range: float = 1.0
    window: int = 7
    k1: float = 0.01
    k2: float = 0.03

    def __post_init__(self):
        if self.data_range <= 0:
            raise InvalidInput("data_range must be positive")
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidInput("window must be a positive odd integer")


DEFAULT = MetricConfig()


def _pair(ref, test):
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ShapeError(f"shapes differ: {ref.shape} vs {test.shape}")
    return ref, test


def psnr(ref, test, cfg: MetricConfig = DEFAULT) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical."""
    ref, test = _pair(ref, test)
    mse = float(np.mean((ref - test) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(cfg.data_range ** 2 / mse)


def _window_mean(a: np.ndarray, w: int) -> np.ndarray:
    return sliding_window_view(a, (w, w)).mean(axis=(-1, -2))


def ssim(ref, test, cfg: MetricConfig = DEFAULT) -> float:
    """Mean SSIM over all fully contained ``window x window`` patches.

    Statistics use uniform weights (population variance); no padding.
    """
    ref, test = _pair(ref, test)
    w = cfg.window
    if ref.ndim != 2:
        raise ShapeError("ssim expects 2-D images")
    if min(ref.shape) < w:
        raise InvalidInput(f"image {ref.shape} smaller than the {w}x{w} window")
    c1 = (cfg.k1 * cfg.data_range) ** 2
    c2 = (cfg.k2 * cfg.data_range) ** 2
    mx = _window_mean(ref, w)
    my = _window_mean(test, w)
    vx = _window_mean(ref * ref, w) - mx * mx
    vy = _window_mean(test * test, w) - my * my
    cxy = _window_mean(ref * test, w) - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))
