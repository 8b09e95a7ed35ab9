import numpy as np
import pytest

from s5lab.conv import direct_convolve, fft_convolve, materialize_kernel, siso_conv_vs_scan
from s5lab.discretize import zoh_terms
from s5lab.errors import RejectedInputError
from s5lab.hippo import diagonalize_normal, make_hippo_normal
from s5lab.scan import sequential_scan


def test_kernel_examples():
    np.testing.assert_allclose(materialize_kernel([0.5], [1], [1], 4), [1, 0.5, 0.25, 0.125])
    k = materialize_kernel([0.0, 0.0], [2.0, 1.0], [3.0, -1.0], 4)
    np.testing.assert_allclose(k, [5.0, 0, 0, 0])


def test_kernel_is_impulse_response(rng):
    N, L = 6, 200
    lam = rng.uniform(0.5, 1, N) * np.exp(1j * rng.uniform(-3, 3, N))
    b = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    c = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    impulse = np.zeros(L)
    impulse[0] = 1
    states = sequential_scan(lam, b[None, :] * impulse[:, None])
    assert np.max(np.abs(materialize_kernel(lam, b, c, L) - (states @ c).real)) <= 1e-12


def test_kernel_conj_sym_doubles():
    k1 = materialize_kernel([0.3 + 0.4j], [1 + 1j], [2 - 1j], 8)
    full = materialize_kernel([0.3 + 0.4j, 0.3 - 0.4j], [1 + 1j, 1 - 1j], [2 - 1j, 2 + 1j], 8)
    np.testing.assert_allclose(2 * k1, full, atol=1e-15)
    np.testing.assert_allclose(materialize_kernel([0.3 + 0.4j], [1 + 1j], [2 - 1j], 8, conj_sym=True),
                               full, atol=1e-15)


def test_fft_convolve_examples(rng):
    u = rng.standard_normal(37)
    delta = np.zeros(37)
    delta[0] = 1
    np.testing.assert_allclose(fft_convolve(u, delta), u, atol=1e-14)
    u, k = rng.standard_normal(128), rng.standard_normal(128)
    assert np.max(np.abs(fft_convolve(u, k) - direct_convolve(u, k))) <= 1e-10
    np.testing.assert_allclose(fft_convolve(u, k), fft_convolve(k, u), atol=1e-12)
    np.testing.assert_allclose(direct_convolve(u, k), np.convolve(u, k)[:128], atol=1e-12)
    with pytest.raises(RejectedInputError):
        fft_convolve(np.ones(4), np.ones(5))


def test_conv_vs_scan():
    e = np.zeros(4)
    e[0] = 1
    assert siso_conv_vs_scan([0.5], [1], [1], e) <= 1e-14
    assert siso_conv_vs_scan([0.5], [1], [1], np.zeros(10)) == 0.0


def test_conv_vs_scan_hippo_system(rng):
    N, L = 16, 1024
    lam, _ = diagonalize_normal(make_hippo_normal(N))
    lam_bar, f = zoh_terms(lam, np.full(N, 0.01))
    b = f * rng.standard_normal(N)
    c = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    assert siso_conv_vs_scan(lam_bar, b, c, rng.standard_normal(L)) <= 1e-8
