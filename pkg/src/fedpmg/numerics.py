"""2D DFT and the amplitude/phase factorization of spectra.

All transforms act on the last two axes and use the unshifted layout
(DC at ``[0, 0]``). The forward transform is unnormalized; the inverse
carries the ``1/(H*W)`` factor.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidInput, ShapeError


def _check_grid(a: np.ndarray, what: str) -> None:
    if a.ndim < 2:
        raise InvalidInput(f"{what} must be at least 2-D, got shape {a.shape}")
    if a.shape[-2] < 2 or a.shape[-1] < 2:
        raise InvalidInput(f"{what} needs height, width >= 2, got {a.shape[-2:]}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{what} contains non-finite values")


def fft2(img: np.ndarray) -> np.ndarray:
    """Forward DFT of a real image (or a stack of images) in double precision."""
    img = np.asarray(img)
    if np.iscomplexobj(img):
        raise InvalidInput("fft2 expects a real image")
    _check_grid(img, "image")
    return np.fft.fft2(img.astype(np.float64, copy=False))


def ifft2(spec: np.ndarray, check_hermitian: bool = False) -> np.ndarray:
    """Inverse DFT, returning the real part.

    With ``check_hermitian`` the discarded imaginary residue must stay below
    ``1e-5 * (1 + max|real|)``; otherwise the real part is returned as is.
    """
    spec = np.asarray(spec)
    _check_grid(spec, "spectrum")
    out = np.fft.ifft2(spec.astype(np.complex128, copy=False))
    if check_hermitian:
        resid = np.max(np.abs(out.imag))
        bound = 1e-5 * (1.0 + np.max(np.abs(out.real)))
        if resid > bound:
            raise InvalidInput(f"imaginary residue {resid:.3g} exceeds {bound:.3g}")
    return out.real


def decompose(spec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a spectrum into amplitude (modulus) and phase in (-pi, pi].

    Zero entries get phase 0.
    """
    spec = np.asarray(spec)
    amp = np.abs(spec)
    phase = np.angle(spec)
    phase[amp == 0] = 0.0
    # atan2 returns -pi for (-0.0) imaginary parts
    phase[phase <= -np.pi] = np.pi
    return amp, phase


def recompose(amp: np.ndarray, phase: np.ndarray) -> np.ndarray:
    amp = np.asarray(amp, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    if amp.shape != phase.shape:
        raise ShapeError(f"amplitude {amp.shape} and phase {phase.shape} differ")
    return amp * np.cos(phase) + 1j * (amp * np.sin(phase))


def amplitude(img: np.ndarray) -> np.ndarray:
    """Amplitude spectrum of an image or a stack of images."""
    return np.abs(fft2(img))
