"""Binary checkpoint of named tensors.

Layout (all integers little-endian)::

    b"S5CKPT01"                       magic and format version
    u32                               tensor count
    per tensor:
        u16 name length, UTF-8 name
        u8 dtype code                 0 f32, 1 f64, 2 complex64, 3 complex128
        u8 rank, rank x u64 dims
        payload                       row-major; complex values as (re, im) pairs
"""

import struct

import numpy as np

from s5lab.errors import FormatError, RejectedInputError
from s5lab.train.model import iter_params

MAGIC = b"S5CKPT01"
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<c8"), 3: np.dtype("<c16")}
CODES = {dt.newbyteorder("="): code for code, dt in DTYPES.items()}


def encode(tensors):
    """Serialize ``[(name, array), ...]`` in the given order."""
    parts = [MAGIC, struct.pack("<I", len(tensors))]
    for name, arr in tensors:
        arr = np.asarray(arr)
        code = CODES.get(arr.dtype.newbyteorder("="))
        if code is None:
            raise RejectedInputError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF or arr.ndim > 0xFF:
            raise RejectedInputError(f"tensor {name!r}: name or rank too large")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes())
    return b"".join(parts)


def decode(data):
    """Inverse of :func:`encode`; returns a list of ``(name, array)``."""
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated checkpoint: {what} needs {n} bytes at offset {pos}, "
                              f"file has {len(data)}", offset=pos)
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(len(MAGIC), "magic") != MAGIC:
        raise FormatError("not a checkpoint: bad magic", offset=0)
    (count,) = struct.unpack("<I", take(4, "tensor count"))
    out = []
    for _ in range(count):
        (n,) = struct.unpack("<H", take(2, "name length"))
        start = pos
        try:
            name = take(n, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("tensor name is not UTF-8", offset=start) from None
        code_at = pos
        code, rank = struct.unpack("<BB", take(2, "dtype and rank"))
        if code not in DTYPES:
            raise FormatError(f"tensor {name!r}: unknown dtype code {code}", offset=code_at)
        dims = struct.unpack(f"<{rank}Q", take(8 * rank, "dims"))
        dt = DTYPES[code]
        size = int(np.prod(dims, dtype=np.uint64)) * dt.itemsize
        arr = np.frombuffer(take(size, f"payload of {name!r}"), dtype=dt).reshape(dims)
        out.append((name, arr.astype(dt.newbyteorder("="))))
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after last tensor", offset=pos)
    return out


def save(path, tensors):
    with open(path, "wb") as fh:
        fh.write(encode(tensors))


def load(path):
    with open(path, "rb") as fh:
        return decode(fh.read())


def model_tensors(model):
    return [(name, arr) for name, arr, _ in iter_params(model)]


def load_into_model(model, tensors):
    """Copy checkpoint tensors into ``model``, whose structure must match exactly."""
    expected = {name: arr for name, arr, _ in iter_params(model)}
    got = dict(tensors)
    if set(got) != set(expected):
        missing = sorted(set(expected) - set(got))
        extra = sorted(set(got) - set(expected))
        raise FormatError(f"checkpoint does not match model: missing {missing}, unexpected {extra}")
    for name, target in expected.items():
        src = got[name]
        if src.shape != target.shape or src.dtype != target.dtype:
            raise FormatError(f"tensor {name!r}: checkpoint has {src.dtype}{src.shape}, "
                              f"model expects {target.dtype}{target.shape}")
        target[...] = src
    return model
