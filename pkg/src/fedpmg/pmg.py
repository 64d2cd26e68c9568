"""Pseudo-modality generation from a shared amplitude centroid and local phase."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import InvalidInput, MissingModalityError, ShapeError


@dataclass(frozen=True)
class BlendParams:
    alpha: float = 0.09

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInput(f"alpha must be in [0, 1], got {self.alpha}")


def _alpha(p) -> float:
    return p.alpha if isinstance(p, BlendParams) else BlendParams(float(p)).alpha


def blend_amplitude(local: np.ndarray, centroid: np.ndarray, p: BlendParams | float) -> np.ndarray:
    """``(1 - alpha) * local + alpha * centroid``, elementwise."""
    local = np.asarray(local, dtype=np.float64)
    centroid = np.asarray(centroid, dtype=np.float64)
    if local.shape[-2:] != centroid.shape[-2:]:
        raise ShapeError(f"amplitude {local.shape} vs centroid {centroid.shape}")
    a = _alpha(p)
    return (1.0 - a) * local + a * centroid


def pseudo_spectrum(local_img: np.ndarray, centroid: np.ndarray, p: BlendParams | float) -> np.ndarray:
    """Blended amplitude recombined with the local phase (before inversion)."""
    local_img = np.asarray(local_img)
    centroid = np.asarray(centroid)
    if centroid.shape != local_img.shape[-2:]:
        raise ShapeError(f"centroid {centroid.shape} does not match image {local_img.shape[-2:]}")
    amp, phase = numerics.decompose(numerics.fft2(local_img))
    return numerics.recompose(blend_amplitude(amp, centroid, p), phase)


def generate_pseudo(local_img: np.ndarray, centroid: np.ndarray, p: BlendParams | float,
                    clamp: bool = True) -> np.ndarray:
    """Pseudo image of the missing modality; ``local_img`` may be a stack sharing one centroid."""
    out = numerics.ifft2(pseudo_spectrum(local_img, centroid, p))
    return np.clip(out, 0.0, 1.0) if clamp else out


def sample_centroid(memory, modality: int, rng: int | np.random.Generator) -> np.ndarray:
    """Uniform draw from the pooled centroids of ``modality``."""
    pool = memory.pool(modality)
    if len(pool) == 0:
        raise MissingModalityError(f"no centroids stored for modality {modality}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return pool[int(rng.integers(len(pool)))]
