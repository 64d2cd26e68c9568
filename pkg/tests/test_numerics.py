import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fedpmg import numerics
from fedpmg.errors import InvalidInput, ShapeError
from oracles import dft2_direct, idft2_direct


def test_constant_image_is_dc_only():
    K = numerics.fft2(np.ones((4, 4)))
    assert K[0, 0] == 16
    rest = K.copy()
    rest[0, 0] = 0
    assert np.max(np.abs(rest)) < 1e-12


def test_impulse_has_flat_spectrum():
    img = np.zeros((8, 8))
    img[0, 0] = 1
    np.testing.assert_allclose(numerics.fft2(img), np.ones((8, 8)), atol=1e-15)


@pytest.mark.parametrize("shape", [(2, 2), (3, 5), (8, 8), (7, 4)])
def test_fft2_matches_direct_sum(rng, shape):
    img = rng.random(shape)
    ref = dft2_direct(img)
    err = np.max(np.abs(numerics.fft2(img) - ref)) / np.max(np.abs(ref))
    assert err <= 1e-9


def test_dc_is_pixel_sum(rng):
    img = rng.random((6, 9))
    assert numerics.fft2(img)[0, 0].real == pytest.approx(img.sum(), rel=1e-12)


def test_roundtrip_64(rng):
    y = rng.random((64, 64))
    assert np.max(np.abs(numerics.ifft2(numerics.fft2(y)) - y)) <= 1e-6


def test_ifft2_of_dc_spectrum():
    spec = np.zeros((4, 4), dtype=complex)
    spec[0, 0] = 16
    np.testing.assert_allclose(numerics.ifft2(spec), np.ones((4, 4)), atol=1e-15)


def test_ifft2_blended_spectrum_matches_direct(rng):
    a, b = rng.random((6, 6)), rng.random((6, 6))
    amp_a, ph_a = numerics.decompose(numerics.fft2(a))
    amp_b = np.abs(numerics.fft2(b))
    spec = numerics.recompose(0.7 * amp_a + 0.3 * amp_b, ph_a)
    # break symmetry as well so the real-part convention is exercised
    spec[1, 2] += 3 + 2j
    ref = idft2_direct(spec).real
    assert np.max(np.abs(numerics.ifft2(spec) - ref)) <= 1e-9


def test_hermitian_check_rejects_asymmetric_spectrum():
    spec = np.zeros((4, 4), dtype=complex)
    spec[1, 0] = 5j
    with pytest.raises(InvalidInput):
        numerics.ifft2(spec, check_hermitian=True)
    numerics.ifft2(numerics.fft2(np.eye(4)), check_hermitian=True)


def test_non_finite_input_rejected():
    img = np.ones((4, 4))
    img[1, 1] = np.nan
    with pytest.raises(InvalidInput):
        numerics.fft2(img)
    with pytest.raises(InvalidInput):
        numerics.fft2(np.ones((1, 4)))


def test_decompose_345():
    amp, ph = numerics.decompose(np.array([[3 + 4j, 0j], [-0.0 - 0.0j, -1 - 0.0j]]))
    assert amp[0, 0] == 5
    assert ph[0, 0] == pytest.approx(np.arctan2(4, 3))
    assert ph[0, 0] == pytest.approx(0.9273, abs=1e-4)
    assert amp[0, 1] == 0 and ph[0, 1] == 0
    assert ph[1, 0] == 0
    # -pi from a negative-zero imaginary part is folded to +pi
    assert ph[1, 1] == np.pi


def test_recompose_cases():
    np.testing.assert_array_equal(numerics.recompose(np.ones((2, 2)), np.zeros((2, 2))), np.ones((2, 2)))
    z = numerics.recompose(np.array([[5.0]]), np.array([[np.arctan2(4, 3)]]))
    assert abs(z[0, 0] - (3 + 4j)) <= 1e-12
    with pytest.raises(ShapeError):
        numerics.recompose(np.ones((2, 2)), np.ones((2, 3)))


grids = st.integers(2, 8).flatmap(lambda h: st.integers(2, 8).map(lambda w: (h, w)))
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(grids.flatmap(lambda s: arrays(float, s, elements=finite)))
def test_roundtrip_property(y):
    back = numerics.ifft2(numerics.fft2(y))
    assert np.max(np.abs(back - y)) <= 1e-6 * (1 + np.max(np.abs(y)))


@settings(max_examples=50, deadline=None)
@given(grids.flatmap(lambda s: arrays(float, s, elements=finite)))
def test_parseval(y):
    K = numerics.fft2(y)
    lhs = np.sum(y ** 2)
    rhs = np.sum(np.abs(K) ** 2) / y.size
    assert abs(lhs - rhs) <= 1e-6 * max(lhs, 1e-12) + 1e-9


@settings(max_examples=50, deadline=None)
@given(grids.flatmap(lambda s: st.tuples(arrays(float, s, elements=finite), arrays(float, s, elements=finite))))
def test_polar_factorization(pair):
    K = pair[0] + 1j * pair[1]
    back = numerics.recompose(*numerics.decompose(K))
    assert np.max(np.abs(back - K)) <= 1e-9 * (1 + np.max(np.abs(K)))
    amp, ph = numerics.decompose(K)
    assert np.all(amp >= 0) and np.all(ph > -np.pi) and np.all(ph <= np.pi)


@settings(max_examples=30, deadline=None)
@given(grids.flatmap(lambda s: st.tuples(arrays(float, s, elements=st.floats(0, 10)),
                                         arrays(float, s, elements=st.floats(-np.pi, np.pi)))))
def test_recompose_modulus(pair):
    amp, ph = pair
    np.testing.assert_allclose(np.abs(numerics.recompose(amp, ph)), amp, rtol=1e-12, atol=1e-12)
