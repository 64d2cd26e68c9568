"""Synthetic paired-modality phantoms, dataset splitting and file formats.

Each subject is a set of random 3D ellipsoids; slices cut through them so
neighbouring slices share anatomy. Modality 1 paints every ellipse with its
base intensity ``t``; modality 2 paints the same geometry with
``gain * (1 - t) ** gamma``. A site-specific smooth bias field and pixel noise
model the scanner.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import FormatError, InvalidInput

SLICES_PER_SUBJECT = 16
BIAS_STRENGTH = 0.15
SUPERSAMPLE = 3


@dataclass(frozen=True)
class SiteParams:
    gain: float = 1.0
    gamma: float = 1.0
    noise_sigma: float = 0.01
    bias_smoothness: float = 0.3

    def __post_init__(self):
        if self.gain <= 0 or self.gamma <= 0:
            raise InvalidInput("gain and gamma must be positive")
        if self.noise_sigma < 0 or self.bias_smoothness <= 0:
            raise InvalidInput("noise_sigma must be >= 0 and bias_smoothness > 0")


# stand-ins for the fastMRI 1.5T / fastMRI 3T / uMR scanners
SITE_PRESETS = {
    "fastmri_1.5t": SiteParams(gain=0.85, gamma=1.3, noise_sigma=0.02, bias_smoothness=0.35),
    "fastmri_3t": SiteParams(gain=1.0, gamma=1.0, noise_sigma=0.01, bias_smoothness=0.25),
    "umr": SiteParams(gain=0.75, gamma=1.8, noise_sigma=0.015, bias_smoothness=0.5),
}


@dataclass
class PhantomSpec:
    size: int = 32
    seed: int = 0
    site: SiteParams = field(default_factory=SiteParams)
    min_ellipses: int = 3
    max_ellipses: int = 7
    slices: int = SLICES_PER_SUBJECT

    def __post_init__(self):
        if self.size < 16:
            raise InvalidInput("phantom size must be >= 16")
        if not 1 <= self.min_ellipses <= self.max_ellipses:
            raise InvalidInput("bad ellipse count range")
        if self.slices < 1:
            raise InvalidInput("need at least one slice per subject")


@dataclass
class PairedSlice:
    modality1: np.ndarray
    modality2: np.ndarray
    subject: int
    index: int

    def image(self, modality: int) -> np.ndarray:
        if modality == 1:
            return self.modality1
        if modality == 2:
            return self.modality2
        raise InvalidInput(f"unknown modality {modality}")


def _ellipsoids(rng: np.random.Generator, spec: PhantomSpec):
    # (cx, cy, cz, a, b, c, angle, t); the head comes first and encloses the rest
    head = (rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.0,
            rng.uniform(0.68, 0.82), rng.uniform(0.78, 0.9), 1.3,
            rng.uniform(-0.2, 0.2), rng.uniform(0.55, 0.8))
    out = [head]
    n = int(rng.integers(spec.min_ellipses, spec.max_ellipses + 1))
    for _ in range(n):
        a, b = rng.uniform(0.1, 0.35, size=2)
        r = rng.uniform(0, 0.45)
        th = rng.uniform(0, 2 * np.pi)
        out.append((head[0] + r * np.cos(th), head[1] + r * np.sin(th), rng.uniform(-0.5, 0.5),
                    a, b, rng.uniform(0.35, 0.9), rng.uniform(0, np.pi), rng.uniform(0.05, 0.95)))
    return out


def _coverage(ell, z: float, xx: np.ndarray, yy: np.ndarray) -> np.ndarray:
    cx, cy, cz, a, b, c, ang, _ = ell
    dz = (z - cz) / c
    if abs(dz) >= 1:
        return np.zeros(xx.shape[:2])
    s = np.sqrt(1 - dz * dz)
    xr = (xx - cx) * np.cos(ang) + (yy - cy) * np.sin(ang)
    yr = -(xx - cx) * np.sin(ang) + (yy - cy) * np.cos(ang)
    inside = (xr / (a * s)) ** 2 + (yr / (b * s)) ** 2 <= 1.0
    return inside.mean(axis=-1)


def _grid(size: int):
    sub = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE
    px = (np.arange(size)[:, None] + sub[None, :]).ravel() / size * 2 - 1
    # size x size x SUPERSAMPLE**2 sub-pixel coordinates
    ys = px.reshape(size, SUPERSAMPLE)
    yy = ys[:, None, :, None] * np.ones((1, size, 1, SUPERSAMPLE))
    xx = ys[None, :, None, :] * np.ones((size, 1, SUPERSAMPLE, 1))
    return (xx.reshape(size, size, -1), yy.reshape(size, size, -1))


def _bias_field(rng: np.random.Generator, size: int, smoothness: float) -> np.ndarray:
    g = gaussian_filter(rng.standard_normal((size, size)), sigma=smoothness * size, mode="wrap")
    g = (g - g.mean()) / (g.std() + 1e-12)
    return np.exp(BIAS_STRENGTH * g)


def generate_subject(spec: PhantomSpec, subject: int = 0) -> list[PairedSlice]:
    """All slices of one synthetic subject; deterministic in ``(spec.seed, subject)``."""
    rng = np.random.default_rng([spec.seed, subject])
    ells = _ellipsoids(rng, spec)
    site = spec.site
    bias = _bias_field(rng, spec.size, site.bias_smoothness)
    xx, yy = _grid(spec.size)
    zs = np.linspace(-0.6, 0.6, spec.slices) if spec.slices > 1 else np.zeros(1)
    out = []
    for j, z in enumerate(zs):
        m1 = np.zeros((spec.size, spec.size))
        m2 = np.zeros((spec.size, spec.size))
        for ell in ells:
            cov = _coverage(ell, z, xx, yy)
            t = ell[-1]
            m1 = m1 * (1 - cov) + t * cov
            m2 = m2 * (1 - cov) + site.gain * (1 - t) ** site.gamma * cov
        m1 = m1 * bias + site.noise_sigma * rng.standard_normal(m1.shape)
        m2 = m2 * bias + site.noise_sigma * rng.standard_normal(m2.shape)
        out.append(PairedSlice(np.clip(m1, 0, 1).astype(np.float32),
                               np.clip(m2, 0, 1).astype(np.float32), subject, j))
    return out


def generate_subjects(spec: PhantomSpec, n_subjects: int, first: int = 0) -> list[PairedSlice]:
    out = []
    for s in range(first, first + n_subjects):
        out.extend(generate_subject(spec, s))
    return out


def split_dataset(slices: list[PairedSlice], ratio: float = 0.7, seed: int = 0):
    """Subject-level train/test split; returns ``(train, test)``."""
    if not 0.0 < ratio < 1.0:
        raise InvalidInput(f"split ratio must lie in (0, 1), got {ratio}")
    subjects = sorted({s.subject for s in slices})
    if len(subjects) < 2:
        raise InvalidInput("need at least two subjects to split")
    n_train = min(max(int(round(ratio * len(subjects))), 1), len(subjects) - 1)
    perm = np.random.default_rng(seed).permutation(len(subjects))
    train_ids = {subjects[i] for i in perm[:n_train]}
    train = [s for s in slices if s.subject in train_ids]
    test = [s for s in slices if s.subject not in train_ids]
    return train, test


def stack(slices: list[PairedSlice], modality: int) -> np.ndarray:
    return np.stack([s.image(modality) for s in slices]).astype(np.float32)


# --- binary tensor format -------------------------------------------------
# "FPMG" | version u8 | dtype u8 (1 = f32) | ndim u8 | pad u8 | dims u32 LE | f32 LE payload

MAGIC = b"FPMG"
VERSION = 1
DTYPE_F32 = 1


def encode_tensor(arr) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim > 255:
        raise InvalidInput("too many dimensions")
    header = MAGIC + struct.pack("<BBBB", VERSION, DTYPE_F32, arr.ndim, 0)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_tensor(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one tensor starting at ``offset``; returns ``(array, next_offset)``."""
    if len(buf) - offset < 8:
        raise FormatError("truncated header")
    if buf[offset:offset + 4] != MAGIC:
        raise FormatError("bad magic")
    version, dtype, ndim, _ = struct.unpack_from("<BBBB", buf, offset + 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}")
    pos = offset + 8
    if len(buf) - pos < 4 * ndim:
        raise FormatError("truncated dims")
    dims = struct.unpack_from(f"<{ndim}I", buf, pos)
    pos += 4 * ndim
    nbytes = 4 * int(np.prod(dims, dtype=np.int64))
    if len(buf) - pos < nbytes:
        raise FormatError("truncated payload")
    arr = np.frombuffer(buf, dtype="<f4", count=nbytes // 4, offset=pos).reshape(dims)
    return arr.astype(np.float32), pos + nbytes


def decode_tensors(buf: bytes) -> list[np.ndarray]:
    """Decode a concatenation of tensors."""
    out, pos = [], 0
    while pos < len(buf):
        arr, pos = decode_tensor(buf, pos)
        out.append(arr)
    return out


def tensor_nbytes(shape) -> int:
    return 8 + 4 * len(shape) + 4 * int(np.prod(shape, dtype=np.int64))


def save_tensor(path, arr) -> None:
    Path(path).write_bytes(encode_tensor(arr))


def load_tensor(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    arr, end = decode_tensor(buf)
    if end != len(buf):
        raise FormatError("trailing bytes after tensor")
    return arr


# --- PGM ------------------------------------------------------------------

def to_bytes255(img) -> np.ndarray:
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(img * 255.0 + 0.5).astype(np.uint8)


def export_pgm(img, path) -> None:
    """Binary P5 PGM, maxval 255, ``[0, 1]`` mapped linearly with half-up rounding."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise InvalidInput("PGM export needs a 2-D image")
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + to_bytes255(img).tobytes())


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(buf[start:pos])
    if tokens[0] != b"P5":
        raise FormatError("not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    pos += 1
    data = np.frombuffer(buf, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).astype(np.float64) / maxval
