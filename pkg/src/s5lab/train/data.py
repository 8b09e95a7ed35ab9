"""Datasets: MNIST IDX files as pixel sequences and a synthetic irregular-sampling task."""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from s5lab.errors import FormatError, RejectedInputError
from s5lab.rng import STREAM_DATA, make_rng

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass
class SequenceBatch:
    """Inputs ``(N, L, U)``, integer labels ``(N,)``, optional intervals ``(N, L)``."""

    inputs: np.ndarray
    labels: np.ndarray
    intervals: np.ndarray = None

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, idx):
        iv = None if self.intervals is None else self.intervals[idx]
        return SequenceBatch(self.inputs[idx], self.labels[idx], iv)


def _read_bytes(path):
    path = Path(path)
    data = path.read_bytes()
    if path.suffix == ".gz":
        data = gzip.decompress(data)
    return data


def _header(data, magic, ndims, path):
    need = 4 + 4 * ndims
    if len(data) >= 4:
        got = struct.unpack(">I", data[:4])[0]
        if got != magic:
            raise FormatError(f"{path}: bad magic number 0x{got:08x}, expected 0x{magic:08x}", offset=0)
    if len(data) < need:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)", offset=len(data))
    return struct.unpack(f">{ndims}I", data[4:need]), need


def read_idx_images(path):
    data = _read_bytes(path)
    (n, rows, cols), off = _header(data, IMAGES_MAGIC, 3, path)
    end = off + n * rows * cols
    if len(data) < end:
        raise FormatError(f"{path}: truncated pixel data, file ends at byte {len(data)} of {end}",
                          offset=len(data))
    return np.frombuffer(data, dtype=np.uint8, count=n * rows * cols, offset=off).reshape(n, rows, cols)


def read_idx_labels(path):
    data = _read_bytes(path)
    (n,), off = _header(data, LABELS_MAGIC, 1, path)
    if len(data) < off + n:
        raise FormatError(f"{path}: truncated label data, file ends at byte {len(data)} of {off + n}",
                          offset=len(data))
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=off)


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(path).write_bytes(struct.pack(">4I", IMAGES_MAGIC, n, rows, cols) + images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">2I", LABELS_MAGIC, labels.shape[0]) + labels.tobytes())


def load_mnist_idx(images_path, labels_path, limit=None, offset=0):
    """Images flattened row-major to ``(784, 1)`` sequences scaled to ``[0, 1]``.

    ``offset``/``limit`` select a contiguous slice of the files.
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    stop = images.shape[0] if limit is None else min(images.shape[0], offset + limit)
    images = images[offset:stop]
    labels = labels[offset:stop]
    if np.any(labels > 9):
        raise FormatError("labels outside 0-9")
    seq = images.reshape(images.shape[0], -1, 1).astype(np.float64) / 255.0
    return SequenceBatch(seq, labels.astype(np.int64))


def irregular_class_frequencies(classes, base=0.5, ratio=1.6):
    """Class angular frequencies, geometric with ``ratio`` between neighbours."""
    return 2.0 * np.pi * base * ratio ** np.arange(classes)


def make_irregular_item(seed, index, L, classes, T=10.0, noise=0.05):
    """One item: ``(values, times, label)``. Depends only on ``(seed, index)``."""
    rng = make_rng(seed, STREAM_DATA, index)
    label = int(rng.integers(classes))
    omega = irregular_class_frequencies(classes)[label]
    times = np.sort(rng.uniform(0.0, T, size=L))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    amp = rng.uniform(0.5, 1.5)
    values = amp * np.sin(omega * times + phase) + noise * rng.standard_normal(L)
    return values, times, label


def make_irregular_task(seed, n_items, L, classes, T=10.0, start_index=0):
    """Frequency classification from irregularly timed samples.

    Each item is a noisy sinusoid whose angular frequency identifies the class,
    sampled at ``L`` sorted uniform-random times in ``[0, T]``. Inputs are the
    sampled values; intervals are the gaps between consecutive sample times
    (the first is measured from ``t = 0``).
    """
    if classes < 2:
        raise RejectedInputError("need at least two classes")
    xs = np.empty((n_items, L, 1))
    iv = np.empty((n_items, L))
    ys = np.empty(n_items, dtype=np.int64)
    for i in range(n_items):
        values, times, label = make_irregular_item(seed, start_index + i, L, classes, T)
        xs[i, :, 0] = values
        iv[i] = np.diff(times, prepend=0.0)
        ys[i] = label
    return SequenceBatch(xs, ys, iv)


def spectral_oracle_predict(batch, classes):
    """Pick the class frequency with the largest non-uniform DFT magnitude."""
    omegas = irregular_class_frequencies(classes)
    times = np.cumsum(batch.intervals, axis=1)
    x = batch.inputs[..., 0]
    x = x - x.mean(axis=1, keepdims=True)
    power = np.abs(np.einsum("nl,nlc->nc", x, np.exp(-1j * times[:, :, None] * omegas)))
    return power.argmax(axis=1)
