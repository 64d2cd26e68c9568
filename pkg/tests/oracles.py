"""Slow reference implementations used only by the tests."""
import itertools

import numpy as np

from fedpmg import model


def dft2_direct(img):
    """O(N^4) double-sum forward DFT."""
    h, w = img.shape
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            acc = 0j
            for y in range(h):
                for x in range(w):
                    acc += img[y, x] * np.exp(-2j * np.pi * (u * y / h + v * x / w))
            out[u, v] = acc
    return out


def idft2_direct(spec):
    h, w = spec.shape
    out = np.zeros((h, w), dtype=complex)
    for y in range(h):
        for x in range(w):
            acc = 0j
            for u in range(h):
                for v in range(w):
                    acc += spec[u, v] * np.exp(2j * np.pi * (u * y / h + v * x / w))
            out[y, x] = acc / (h * w)
    return out


def dft_matrix(n):
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def undersample_direct(img, centered_columns):
    """Zero-filled recon via explicit DFT matrices and column zeroing."""
    h, w = img.shape
    Fh, Fw = dft_matrix(h), dft_matrix(w)
    K = Fh @ img @ Fw.T
    keep = np.fft.ifftshift(np.asarray(centered_columns, dtype=bool))
    K[:, ~keep] = 0
    return (np.conj(Fh) @ K @ np.conj(Fw).T / (h * w)).real


def best_partition_cost(X, k):
    """Minimum k-means objective over all labelings into k non-empty groups."""
    n = len(X)
    best = np.inf
    for labels in itertools.product(range(k), repeat=n):
        if labels[0] != 0 or len(set(labels)) != k:
            continue
        lab = np.array(labels)
        cost = 0.0
        for j in range(k):
            pts = X[lab == j]
            cost += float(((pts - pts.mean(axis=0)) ** 2).sum())
        best = min(best, cost)
    return best


def nearest_scan(X, C):
    out = []
    for x in X:
        best, bi = np.inf, -1
        for i, c in enumerate(C):
            d = float(((x - c) ** 2).sum())
            if d < best:
                best, bi = d, i
        out.append(bi)
    return out


def finite_diff_grad(f, vec, coords, h=1e-3):
    out = []
    for i in coords:
        plus, minus = vec.copy(), vec.copy()
        plus[i] += h
        minus[i] -= h
        out.append((f(plus) - f(minus)) / (2 * h))
    return np.array(out)


def _relu_pattern(params, x):
    _, cache = model._forward(params, x)
    return np.concatenate([(cache[1] > 0).ravel(), (cache[4] > 0).ravel()])


def gradient_check_errors(seed, n_coords=20, h=1e-3):
    """Relative errors of analytic vs central-difference gradients of the
    residual net on one random batch of 8x8 images, skipping coordinates
    whose perturbation flips a ReLU."""
    rng = np.random.default_rng(seed)
    params = model.init_params(2, seed, dtype=np.float64)
    # conv3 starts at zero; give it weight so gradients reach the hidden layers
    params.vector[-145:] = rng.uniform(-0.3, 0.3, 145)
    x = rng.random((2, 2, 8, 8))
    gp = rng.standard_normal((2, 1, 8, 8))

    def f(vec):
        return float(np.sum(gp * model.forward(model.ModelParams(vec, 2), x)))

    grad = model.backward(params, x, gp)
    coords = rng.choice(params.vector.size, n_coords, replace=False)
    fd = finite_diff_grad(f, params.vector, coords, h)
    errs = []
    for c, g_fd in zip(coords, fd):
        # a coordinate is kink-adjacent when perturbing it flips any ReLU
        plus, minus = params.vector.copy(), params.vector.copy()
        plus[c] += h
        minus[c] -= h
        pats = [_relu_pattern(model.ModelParams(v, 2), x) for v in (plus, minus, params.vector)]
        if not (np.array_equal(pats[0], pats[2]) and np.array_equal(pats[1], pats[2])):
            continue
        errs.append(abs(grad[c] - g_fd) / max(abs(grad[c]), abs(g_fd), 1e-8))
    return errs
