"""K-means projection of amplitude spectra onto a small set of centroids."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, ShapeError


@dataclass
class ClusterConfig:
    k: int = 50
    max_iter: int = 100
    tol: float = 1e-6
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.max_iter < 1 or self.restarts < 1:
            raise InvalidInput("k, max_iter and restarts must be positive")
        if self.tol < 0:
            raise InvalidInput("tol must be non-negative")


@dataclass
class CentroidSet:
    modality: int
    centroids: np.ndarray  # k x H x W, non-negative
    source_client: int = -1
    objective: float = float("nan")
    history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])


def _stack(spectra) -> np.ndarray:
    if len(spectra) == 0:
        raise InvalidInput("cannot cluster an empty set of spectra")
    arrs = [np.asarray(s, dtype=np.float64) for s in spectra]
    shape = arrs[0].shape
    if any(a.shape != shape for a in arrs):
        raise ShapeError("all spectra must share one shape")
    return np.stack(arrs)


def sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, n x k, computed by direct differences."""
    d = np.empty((X.shape[0], C.shape[0]))
    for j in range(C.shape[0]):
        diff = X - C[j]
        d[:, j] = np.einsum("ij,ij->i", diff, diff)
    return d


def objective(X: np.ndarray, C: np.ndarray, labels: np.ndarray) -> float:
    diff = X - C[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = sq_distances(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        closest = np.minimum(closest, sq_distances(X, X[idx:idx + 1])[:, 0])
    return X[chosen].copy()


def lloyd(X: np.ndarray, init: np.ndarray, max_iter: int = 100, tol: float = 1e-6):
    """Lloyd iterations from ``init``.

    Returns ``(centroids, labels, history)`` where ``history`` holds the
    objective after every assignment step. Empty clusters are re-seeded with
    the point farthest from its current centroid.
    """
    C = init.astype(np.float64, copy=True)
    k = C.shape[0]
    history: list[float] = []
    labels = np.zeros(X.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        d = sq_distances(X, C)
        labels = np.argmin(d, axis=1)
        history.append(objective(X, C, labels))
        if len(history) > 1:
            prev = history[-2]
            if prev - history[-1] <= tol * max(prev, np.finfo(float).tiny):
                break
        point_cost = d[np.arange(X.shape[0]), labels]
        taken: set[int] = set()
        newC = np.empty_like(C)
        for j in range(k):
            members = labels == j
            if members.any():
                newC[j] = X[members].mean(axis=0)
            else:
                order = np.argsort(-point_cost, kind="stable")
                far = next(int(i) for i in order if int(i) not in taken)
                taken.add(far)
                newC[j] = X[far]
        C = newC
    labels = np.argmin(sq_distances(X, C), axis=1)
    return C, labels, history


def kmeans(spectra, cfg: ClusterConfig, modality: int = 1, source_client: int = -1) -> CentroidSet:
    """Cluster amplitude spectra; ``k`` is clamped to the number of spectra."""
    X3 = _stack(spectra)
    shape = X3.shape[1:]
    X = X3.reshape(X3.shape[0], -1)
    n = X.shape[0]
    if cfg.k >= n:
        C = X.copy()
        labels = np.arange(n)
        return CentroidSet(modality, C.reshape((n,) + shape), source_client,
                           objective(X, C, labels), [0.0])

    best = None
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.restarts):
        rng = np.random.default_rng(child)
        C, labels, hist = lloyd(X, kmeans_pp_init(X, cfg.k, rng), cfg.max_iter, cfg.tol)
        obj = objective(X, C, labels)
        if best is None or obj < best[0]:
            best = (obj, C, hist)
    obj, C, hist = best
    if not np.all(np.isfinite(C)):
        raise AssertionError("k-means produced non-finite centroids")
    # means of non-negative data stay non-negative; clip rounding noise
    C = np.maximum(C, 0.0)
    return CentroidSet(modality, C.reshape((cfg.k,) + shape), source_client, obj, hist)


def assign(spectra, centroids) -> list[int]:
    """Nearest-centroid index per spectrum; ties go to the lowest index."""
    X3 = _stack(spectra)
    C3 = np.asarray(centroids, dtype=np.float64)
    if C3.ndim != X3.ndim or C3.shape[1:] != X3.shape[1:]:
        raise ShapeError(f"centroids {C3.shape[1:]} vs spectra {X3.shape[1:]}")
    d = sq_distances(X3.reshape(len(X3), -1), C3.reshape(len(C3), -1))
    return [int(i) for i in np.argmin(d, axis=1)]
