"""Cartesian 1D undersampling masks and the k-space degradation model.

Masks are stored in the centered (fftshifted) column layout used by fastMRI
style masks, so the fully sampled band sits around ``width // 2``. They are
shifted back to the unshifted DFT layout when applied.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import InvalidInput, ShapeError

DEFAULT_CENTER_FRACTION = {4: 0.08, 6: 0.06, 8: 0.06}


def default_center_fraction(accel: float) -> float:
    return DEFAULT_CENTER_FRACTION.get(int(round(accel)), 0.08)


@dataclass(frozen=True)
class Mask1D:
    columns: np.ndarray
    accel: float
    center_fraction: float

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=bool)
        object.__setattr__(self, "columns", cols)
        if cols.ndim != 1 or cols.size < 1:
            raise InvalidInput("mask columns must be a non-empty vector")
        if not cols.any():
            raise InvalidInput("mask samples no columns")

    @property
    def width(self) -> int:
        return int(self.columns.size)

    @property
    def sampled_fraction(self) -> float:
        return float(self.columns.mean())

    def kspace_columns(self) -> np.ndarray:
        """Column mask in the unshifted DFT layout."""
        return np.fft.ifftshift(self.columns)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidInput("noise sigma must be non-negative")


def _center_band(width: int, center_fraction: float) -> np.ndarray:
    num_low = math.floor(round(center_fraction * width, 9))
    band = np.zeros(width, dtype=bool)
    if num_low < 1:
        warnings.warn(f"center band is empty for width={width}, center_fraction={center_fraction}")
        return band
    start = (width - num_low + 1) // 2
    band[start:start + num_low] = True
    return band


def _check_args(width: int, accel: float, center_fraction: float) -> None:
    if width < 4:
        raise InvalidInput("mask width must be >= 4")
    if accel < 1:
        raise InvalidInput("acceleration must be >= 1")
    if not 0.0 <= center_fraction <= 1.0:
        raise InvalidInput("center_fraction must lie in [0, 1]")


def make_equispaced_mask(width: int, accel: float, center_fraction: float) -> Mask1D:
    """Central band plus every ``round(accel)``-th column starting at column 0."""
    _check_args(width, accel, center_fraction)
    cols = _center_band(width, center_fraction)
    cols[::max(1, int(round(accel)))] = True
    return Mask1D(cols, float(accel), float(center_fraction))


def make_random_mask(width: int, accel: float, center_fraction: float, seed: int) -> Mask1D:
    """Central band plus i.i.d. outer columns; expected sampled fraction is ``1/accel``."""
    _check_args(width, accel, center_fraction)
    cols = _center_band(width, center_fraction)
    num_low = int(cols.sum())
    outer = width - num_low
    prob = 0.0 if outer == 0 else (width / accel - num_low) / outer
    prob = min(max(prob, 0.0), 1.0)
    rng = np.random.default_rng(seed)
    draw = rng.uniform(size=width) < prob
    cols |= draw
    if not cols.any():
        cols[width // 2] = True
    return Mask1D(cols, float(accel), float(center_fraction))


def make_mask(kind: str, width: int, accel: float, center_fraction: float | None = None,
              seed: int = 0) -> Mask1D:
    if center_fraction is None:
        center_fraction = default_center_fraction(accel)
    if kind == "equispaced":
        return make_equispaced_mask(width, accel, center_fraction)
    if kind == "random":
        return make_random_mask(width, accel, center_fraction, seed)
    raise InvalidInput(f"unknown mask type {kind!r}")


def undersample(y: np.ndarray, mask: Mask1D, noise: NoiseSpec | None = None) -> np.ndarray:
    """Zero-filled reconstruction ``ifft2(M * (fft2(y) + eps))``.

    ``y`` may be a single image or a stack; noise only reaches sampled entries.
    """
    y = np.asarray(y)
    if y.shape[-1] != mask.width:
        raise ShapeError(f"image width {y.shape[-1]} != mask width {mask.width}")
    kspace = numerics.fft2(y)
    if noise is not None and noise.sigma > 0:
        rng = np.random.default_rng(noise.seed)
        scale = noise.sigma / np.sqrt(2.0)
        kspace = kspace + scale * (rng.standard_normal(kspace.shape)
                                   + 1j * rng.standard_normal(kspace.shape))
    kspace = kspace * mask.kspace_columns()
    return numerics.ifft2(kspace)
