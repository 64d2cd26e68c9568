import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.ndimage import sobel

from fedpmg import numerics, pmg
from fedpmg.clustering import CentroidSet
from fedpmg.data import SITE_PRESETS, PhantomSpec, generate_subject
from fedpmg.errors import InvalidInput, MissingModalityError, ShapeError
from fedpmg.federation import CentroidMemory


@pytest.fixture(scope="module")
def pair():
    s = generate_subject(PhantomSpec(size=32, seed=1, site=SITE_PRESETS["fastmri_3t"]), 0)[8]
    return s.modality1.astype(float), s.modality2.astype(float)


def memory_with(centroids, modality=2):
    mem = CentroidMemory()
    mem.add(CentroidSet(modality, np.asarray(centroids)))
    return mem


def test_blend_endpoints(rng):
    A, Z = rng.random((5, 5)), rng.random((5, 5)) * 4
    np.testing.assert_array_equal(pmg.blend_amplitude(A, Z, 0.0), A)
    np.testing.assert_array_equal(pmg.blend_amplitude(A, Z, 1.0), Z)
    out = pmg.blend_amplitude(np.full((3, 3), 2.0), np.full((3, 3), 10.0), pmg.BlendParams(0.09))
    np.testing.assert_allclose(out, 2.72, rtol=1e-15)


def test_blend_validation():
    with pytest.raises(InvalidInput):
        pmg.BlendParams(1.5)
    with pytest.raises(ShapeError):
        pmg.blend_amplitude(np.ones((2, 2)), np.ones((3, 3)), 0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0.01, 100), st.integers(0, 10_000))
def test_blend_homogeneous(alpha, c, seed):
    rng = np.random.default_rng(seed)
    A, Z = rng.random((4, 4)), rng.random((4, 4))
    lhs = pmg.blend_amplitude(c * A, c * Z, alpha)
    np.testing.assert_allclose(lhs, c * pmg.blend_amplitude(A, Z, alpha), rtol=1e-12)
    assert np.all(lhs >= 0)


def test_alpha_zero_is_identity(pair):
    y1, y2 = pair
    out = pmg.generate_pseudo(y1, numerics.amplitude(y2), 0.0)
    assert np.max(np.abs(out - y1)) <= 1e-5


def _phase_error(img, centroid, alpha):
    raw = pmg.generate_pseudo(img, centroid, alpha, clamp=False)
    A, P = numerics.decompose(numerics.fft2(img))
    Ahat = pmg.blend_amplitude(A, centroid, alpha)
    K = numerics.fft2(raw)
    sel = Ahat > 1e-6 * Ahat.max()
    dphi = np.angle(np.exp(1j * (np.angle(K[sel]) - P[sel])))
    return np.max(np.abs(dphi)), np.max(np.abs(np.abs(K) - Ahat)) / Ahat.max()


@pytest.mark.parametrize("alpha", [0.0, 0.09, 0.5, 1.0])
def test_phase_preserved(pair, alpha):
    y1, y2 = pair
    phase_err, amp_err = _phase_error(y1, numerics.amplitude(y2), alpha)
    assert phase_err <= 1e-6
    assert amp_err <= 1e-9


def test_alpha_one_transplants_amplitude_keeps_structure(pair):
    y1, y2 = pair
    donor = numerics.amplitude(y2)
    raw = pmg.generate_pseudo(y1, donor, 1.0, clamp=False)
    amp = np.abs(numerics.fft2(raw))
    sel = donor > 1e-9
    assert np.max(np.abs(amp[sel] - donor[sel]) / donor[sel]) <= 1e-6

    def grad(a):
        return np.hypot(sobel(a, 0), sobel(a, 1)).ravel()

    assert np.corrcoef(grad(y1), grad(raw))[0, 1] >= 0.8


def test_output_clamped(pair):
    y1, _ = pair
    out = pmg.generate_pseudo(y1, numerics.amplitude(y1) * 3.0, 1.0)
    assert out.min() >= 0 and out.max() <= 1


def test_batched_generation_matches_single(pair):
    y1, y2 = pair
    z = numerics.amplitude(y2)
    stack = np.stack([y1, y2])
    out = pmg.generate_pseudo(stack, z, 0.3)
    np.testing.assert_allclose(out[0], pmg.generate_pseudo(y1, z, 0.3), atol=1e-12)
    np.testing.assert_allclose(out[1], pmg.generate_pseudo(y2, z, 0.3), atol=1e-12)


def test_alpha_continuity(pair):
    y1, y2 = pair
    Z = numerics.amplitude(y2)
    A = numerics.amplitude(y1)
    lip = np.sum(np.abs(Z - A)) / y1.size
    alphas = np.linspace(0, 1, 21)
    outs = [pmg.generate_pseudo(y1, Z, a, clamp=False) for a in alphas]
    for a0, a1, o0, o1 in zip(alphas, alphas[1:], outs, outs[1:]):
        assert np.max(np.abs(o1 - o0)) <= lip * (a1 - a0) + 1e-12


def test_sample_centroid_single():
    c = np.ones((4, 4))
    mem = memory_with([c])
    for s in range(5):
        np.testing.assert_array_equal(pmg.sample_centroid(mem, 2, s), c)


def test_sample_centroid_uniform():
    cents = np.arange(50, dtype=float)[:, None, None] * np.ones((1, 2, 2))
    mem = memory_with(cents)
    rng = np.random.default_rng(0)
    idx = [int(pmg.sample_centroid(mem, 2, rng)[0, 0]) for _ in range(10_000)]
    counts = np.bincount(idx, minlength=50)
    assert counts.min() >= 140 and counts.max() <= 260


def test_sample_centroid_reproducible():
    mem = memory_with(np.random.default_rng(0).random((7, 2, 2)))
    a = [pmg.sample_centroid(mem, 2, np.random.default_rng(3)).sum() for _ in range(3)]
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    seq1 = [pmg.sample_centroid(mem, 2, r1).sum() for _ in range(20)]
    seq2 = [pmg.sample_centroid(mem, 2, r2).sum() for _ in range(20)]
    assert seq1 == seq2 and len(set(a)) == 1


def test_sample_centroid_empty():
    with pytest.raises(MissingModalityError):
        pmg.sample_centroid(memory_with(np.ones((1, 2, 2)), modality=1), 2, 0)
