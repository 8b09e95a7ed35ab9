"""Complex containers and the two numerical kernels the rest of the package uses.

Complex vectors and matrices are plain ``numpy`` arrays of dtype ``complex128``;
:func:`as_complex_vector` and :func:`as_complex_matrix` validate and coerce.
"""

import numpy as np

from s5lab.errors import NumericalError, RejectedInputError

HERMITIAN_RTOL = 1e-10


def as_complex_vector(x, name="vector"):
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1:
        raise RejectedInputError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise RejectedInputError(f"{name} has non-finite entries")
    return v


def as_complex_matrix(x, name="matrix"):
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim != 2:
        raise RejectedInputError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise RejectedInputError(f"{name} has non-finite entries")
    return m


def inf_norm(m):
    """Max-row-sum norm, ``0.0`` for empty input."""
    m = np.atleast_2d(m)
    if m.size == 0:
        return 0.0
    return float(np.abs(m).sum(axis=1).max())


def hermitian_eig(m):
    """Eigendecomposition of a Hermitian matrix.

    Backed by LAPACK (``numpy.linalg.eigh``); the contract checked here is the
    residual and unitarity bound, not the algorithm.

    Returns:
        (w, V): real eigenvalues in ascending order and the unitary matrix whose
        columns are the matching eigenvectors.

    Raises:
        RejectedInputError: ``m`` is not square or not Hermitian within
            ``1e-10 * ||m||_inf``.
        NumericalError: the solver failed to converge or the result misses the
            residual / unitarity tolerance.
    """
    m = as_complex_matrix(m, "m")
    n, k = m.shape
    if n != k:
        raise RejectedInputError(f"hermitian_eig needs a square matrix, got {m.shape}")
    scale = inf_norm(m)
    if inf_norm(m - m.conj().T) > HERMITIAN_RTOL * scale:
        raise RejectedInputError("matrix is not Hermitian within tolerance")
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc

    residual = inf_norm(m @ v - v * w[None, :])
    if residual > HERMITIAN_RTOL * max(scale, 1.0):
        raise NumericalError(f"eigen-residual {residual:.3e} exceeds tolerance")
    if inf_norm(v.conj().T @ v - np.eye(n)) > HERMITIAN_RTOL:
        raise NumericalError("eigenvectors are not unitary within tolerance")
    return w, v


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n):
    """Smallest power of two >= ``n`` (``n >= 1``)."""
    return 1 << max(0, int(n - 1).bit_length())


def dft(x, inverse=False):
    """Radix-2 decimation-in-time FFT of a power-of-two length vector.

    The inverse transform includes the ``1/L`` factor, so
    ``dft(dft(x), inverse=True) == x`` up to rounding.
    """
    x = as_complex_vector(x, "x")
    n = x.shape[0]
    if not _is_pow2(n):
        raise RejectedInputError(f"dft length must be a power of two, got {n}")
    bits = n.bit_length() - 1
    # bit-reversal permutation
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    out = x[rev].copy()

    sign = 1.0 if inverse else -1.0
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(n // size, size)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * tw[None, :]
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        size *= 2
    if inverse:
        out /= n
    return out
