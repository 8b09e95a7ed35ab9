"""Convolution view of a diagonal SISO SSM, used to cross-check the scan."""

import numpy as np

from s5lab.errors import RejectedInputError
from s5lab.linalg import dft, next_pow2
from s5lab.scan import sequential_scan


def materialize_kernel(lam_bar, b_bar, c_bar, L, conj_sym=False):
    """Impulse response ``k_l = Re(sum_n c_n lam_n^l b_n)``, ``l = 0..L-1``.

    Powers are formed by a Vandermonde matrix; the result is doubled when only
    one half of a conjugate-symmetric spectrum is given.
    """
    lam_bar = np.asarray(lam_bar, dtype=np.complex128).ravel()
    b_bar = np.asarray(b_bar, dtype=np.complex128).ravel()
    c_bar = np.asarray(c_bar, dtype=np.complex128).ravel()
    if not (lam_bar.shape == b_bar.shape == c_bar.shape):
        raise RejectedInputError("lam_bar, b_bar and c_bar must have the same length")
    if L < 1:
        raise RejectedInputError(f"kernel length must be >= 1, got {L}")
    vander = lam_bar[None, :] ** np.arange(L)[:, None]
    taps = (vander @ (c_bar * b_bar)).real
    return 2.0 * taps if conj_sym else taps


def direct_convolve(u, k):
    """Causal convolution by direct summation, ``O(L^2)``."""
    u = np.asarray(u, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    L = u.shape[0]
    y = np.zeros(L)
    for j in range(L):
        y[j] = np.dot(k[: j + 1], u[j::-1])
    return y


def fft_convolve(u, k):
    """Causal convolution ``y_j = sum_{l<=j} k_l u_{j-l}`` via zero-padded FFT.

    Both signals are padded to the next power of two ``>= 2L`` so the circular
    product has no wrap-around.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    k = np.asarray(k, dtype=np.float64).ravel()
    if u.shape != k.shape:
        raise RejectedInputError(f"kernel length {k.shape[0]} != input length {u.shape[0]}")
    L = u.shape[0]
    n = next_pow2(2 * L)
    U = dft(np.concatenate([u, np.zeros(n - L)]))
    K = dft(np.concatenate([k, np.zeros(n - L)]))
    return dft(U * K, inverse=True)[:L].real


def scan_siso(lam_bar, b_bar, c_bar, u, conj_sym=False):
    """Output of the same SISO system computed with the recurrence."""
    u = np.asarray(u, dtype=np.float64).ravel()
    lam_bar = np.asarray(lam_bar, dtype=np.complex128).ravel()
    bu = np.asarray(b_bar, dtype=np.complex128).ravel()[None, :] * u[:, None]
    xs = sequential_scan(lam_bar, bu)
    y = (xs @ np.asarray(c_bar, dtype=np.complex128).ravel()).real
    return 2.0 * y if conj_sym else y


def siso_conv_vs_scan(lam_bar, b_bar, c_bar, u, conj_sym=False):
    """Max absolute difference between the FFT-convolution and scan outputs."""
    u = np.asarray(u, dtype=np.float64).ravel()
    k = materialize_kernel(lam_bar, b_bar, c_bar, u.shape[0], conj_sym)
    y_conv = fft_convolve(u, k)
    y_scan = scan_siso(lam_bar, b_bar, c_bar, u, conj_sym)
    return float(np.max(np.abs(y_conv - y_scan)))
