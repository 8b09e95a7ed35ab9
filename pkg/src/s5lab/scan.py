"""Linear recurrence ``x_k = a_k * x_{k-1} + bu_k`` as a scan over (a, bu) pairs.

All transitions are diagonal, so every product below is elementwise. Arrays are
laid out time-major: ``bu`` is ``(L, M)`` and ``a`` is ``(L, M)`` or ``(1, M)``
(a time-invariant transition, broadcast over time). ``M`` is the state size,
or batch * state size once batch items are folded in by :func:`scan_batched`.

:func:`parallel_scan` is a chunked reduce-then-scan:

1. the sequence is split into ``W`` contiguous chunks; each chunk except the
   last is reduced to a single summary element with :func:`scan_binop`;
2. an exclusive scan over the ``W - 1`` summaries gives each chunk's carry-in
   state;
3. each chunk is scanned sequentially starting from its carry-in.

Steps 1 and 3 run on a thread pool; the compiled kernels release the GIL.
The reduction order depends only on ``(L, W, chunk_size)``, so results are
bitwise reproducible for a fixed configuration.
"""

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numba
import numpy as np

from s5lab.errors import RejectedInputError


class ScanElement(NamedTuple):
    a: np.ndarray
    bu: np.ndarray


def scan_binop(e_i, e_j):
    """Combine an earlier element ``e_i`` with a later one ``e_j``.

    ``(a_i, b_i) . (a_j, b_j) = (a_j a_i, a_j b_i + b_j)``.
    """
    a_i, b_i = (np.asarray(v) for v in e_i)
    a_j, b_j = (np.asarray(v) for v in e_j)
    if not (a_i.shape == b_i.shape == a_j.shape == b_j.shape):
        raise RejectedInputError(
            f"element shapes differ: {a_i.shape}, {b_i.shape}, {a_j.shape}, {b_j.shape}"
        )
    return ScanElement(a_j * a_i, a_j * b_i + b_j)


def identity_element(size, dtype=np.complex128):
    return ScanElement(np.ones(size, dtype=dtype), np.zeros(size, dtype=dtype))


_FLUSH = 1e-290


@numba.njit(nogil=True, cache=True)
def _scan_range(a, bu, out, start, stop, carry):
    tv = a.shape[0] > 1
    M = bu.shape[1]
    for k in range(start, stop):
        ka = k if tv else 0
        for m in range(M):
            c = a[ka, m] * carry[m] + bu[k, m]
            carry[m] = c
            out[k, m] = c


@numba.njit(nogil=True, cache=True)
def _reduce_range(a, bu, start, stop, acc_a, acc_b):
    tv = a.shape[0] > 1
    M = bu.shape[1]
    for m in range(M):
        acc_a[m] = 1.0
        acc_b[m] = 0.0
    for k in range(start, stop):
        ka = k if tv else 0
        for m in range(M):
            am = a[ka, m]
            acc_b[m] = am * acc_b[m] + bu[k, m]
            p = am * acc_a[m]
            # a long product of |a| < 1 would otherwise sink into subnormals,
            # where arithmetic is ~100x slower; its contribution is nil anyway
            if abs(p.real) < _FLUSH and abs(p.imag) < _FLUSH:
                p = 0.0
            acc_a[m] = p


def _prepare(a, bu):
    bu = np.asarray(bu)
    a = np.asarray(a)
    if bu.ndim == 1:
        bu = bu[:, None]
        if a.ndim == 1:
            a = a[:, None]
    elif a.ndim == 1:
        a = a[None, :]
    if bu.ndim != 2 or a.ndim != 2:
        raise RejectedInputError("scan inputs must be (L, M) arrays")
    L, M = bu.shape
    if L == 0:
        raise RejectedInputError("scan needs at least one element")
    if a.shape[1] != M or a.shape[0] not in (1, L):
        raise RejectedInputError(f"transition shape {a.shape} does not match forcing {bu.shape}")
    dtype = np.result_type(a.dtype, bu.dtype, np.complex64)
    a = np.ascontiguousarray(a, dtype=dtype)
    bu = np.ascontiguousarray(bu, dtype=dtype)
    return a, bu


def _output(bu, out):
    if out is None:
        return np.empty_like(bu)
    if out.shape != bu.shape or out.dtype != bu.dtype or not out.flags.c_contiguous:
        raise RejectedInputError(f"out must be a C-contiguous {bu.dtype} array of shape {bu.shape}")
    return out


def sequential_scan(a, bu, out=None):
    """Reference scan: one pass from ``x_0 = 0``.

    Args:
        a: transitions, ``(L, M)``, ``(1, M)`` or ``(M,)`` (time-invariant).
        bu: forcing terms, ``(L, M)`` (a 1-D ``bu`` is treated as ``M = 1``).
        out: optional preallocated ``(L, M)`` result buffer (2-D ``bu`` only).

    Returns:
        states ``(L, M)``.
    """
    squeeze = np.ndim(bu) == 1
    a, bu = _prepare(a, bu)
    out = _output(bu, None if squeeze else out)
    carry = np.zeros(bu.shape[1], dtype=bu.dtype)
    _scan_range(a, bu, out, 0, bu.shape[0], carry)
    return out[:, 0] if squeeze else out


_pools = {}
_pools_lock = threading.Lock()


def _pool(workers):
    with _pools_lock:
        pool = _pools.get(workers)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="s5scan")
            _pools[workers] = pool
        return pool


def chunk_bounds(L, workers, chunk_size=None):
    """Contiguous ``(start, stop)`` ranges used by :func:`parallel_scan`."""
    if workers < 1:
        raise RejectedInputError(f"workers must be >= 1, got {workers}")
    size = chunk_size or math.ceil(L / workers)
    if size < 1:
        raise RejectedInputError(f"chunk size must be >= 1, got {size}")
    return [(s, min(s + size, L)) for s in range(0, L, size)]


def parallel_scan(a, bu, workers=1, chunk_size=None, out=None):
    """Chunked reduce-then-scan; same contract as :func:`sequential_scan`.

    ``chunk_size`` defaults to ``ceil(L / workers)``.
    """
    squeeze = np.ndim(bu) == 1
    a, bu = _prepare(a, bu)
    L, M = bu.shape
    bounds = chunk_bounds(L, workers, chunk_size)
    out = _output(bu, None if squeeze else out)
    if len(bounds) == 1:
        _scan_range(a, bu, out, 0, L, np.zeros(M, dtype=bu.dtype))
        return out[:, 0] if squeeze else out

    n = len(bounds)
    sum_a = np.empty((n - 1, M), dtype=bu.dtype)
    sum_b = np.empty((n - 1, M), dtype=bu.dtype)
    pool = _pool(workers) if workers > 1 else None

    def reduce_chunk(c):
        s, e = bounds[c]
        _reduce_range(a, bu, s, e, sum_a[c], sum_b[c])

    carries = np.zeros((n, M), dtype=bu.dtype)

    def scan_chunk(c):
        s, e = bounds[c]
        _scan_range(a, bu, out, s, e, carries[c].copy())

    if pool is None:
        for c in range(n - 1):
            reduce_chunk(c)
    else:
        list(pool.map(reduce_chunk, range(n - 1)))
    # exclusive scan of the chunk summaries, fixed left-to-right order
    for c in range(1, n):
        carries[c] = sum_a[c - 1] * carries[c - 1] + sum_b[c - 1]
    if pool is None:
        for c in range(n):
            scan_chunk(c)
    else:
        list(pool.map(scan_chunk, range(n)))
    return out[:, 0] if squeeze else out


def scan_batched(lam_bar, bu, workers=1, reverse=False):
    """Scan a batch of sequences.

    Args:
        lam_bar: transitions, ``(P,)`` time-invariant, ``(L, P)`` per-step and
            shared by the batch, or ``(B, L, P)`` per item.
        bu: forcing, ``(B, L, P)``.
        reverse: run the recurrence from the last step backwards
            (``x_k = a_k x_{k+1} + bu_k``).

    Returns:
        states ``(B, L, P)``.
    """
    B, L, P = bu.shape
    lam_bar = np.asarray(lam_bar)
    if reverse:
        bu = bu[:, ::-1]
        if lam_bar.ndim >= 2:
            lam_bar = lam_bar[..., ::-1, :]
    flat = np.ascontiguousarray(bu.transpose(1, 0, 2)).reshape(L, B * P)
    if lam_bar.ndim == 1:
        a = np.tile(lam_bar, B)[None, :]
    elif lam_bar.ndim == 2:
        a = np.broadcast_to(lam_bar[:, None, :], (L, B, P)).reshape(L, B * P)
    else:
        a = np.ascontiguousarray(np.broadcast_to(lam_bar, (B, L, P)).transpose(1, 0, 2)).reshape(L, B * P)
    xs = parallel_scan(a, flat, workers=workers)
    xs = xs.reshape(L, B, P).transpose(1, 0, 2)
    if reverse:
        xs = xs[:, ::-1]
    return np.ascontiguousarray(xs)
