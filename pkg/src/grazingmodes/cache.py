"""Flat binary persistence for mode tensors and split kernels.

Layout (little endian)::

    magic    8s   b"GZMODES\\0"
    version  u32
    kind     u32  (0 = mode tensor, 1 = split kernel)
    N        u32
    flags    u32  (bit 0: signed keys; split kernels: variant code)
    tag      32s  sha256 of the kernel tag
    tol      f64
    count    u64  number of records / field values
    digest   32s  sha256 of the payload
    payload

Mode tensors store ``count`` records ``(i32, i32, i32, f64)`` sorted by key.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import CacheError

MAGIC = b"GZMODES\0"
VERSION = 1
_HEADER = struct.Struct("<8sIIII32sdQ32s")
_RECORD = np.dtype([("kp", "<i4"), ("km", "<i4"), ("dot", "<i4"), ("value", "<f8")])


def tag_digest(tag):
    return hashlib.sha256(tag.encode("utf-8")).digest()


def _write(path, kind, N, flags, tag, tol, count, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(MAGIC, VERSION, kind, N, flags, tag_digest(tag), tol, count, hashlib.sha256(payload).digest())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(header + payload)
    tmp.replace(path)


def _read(path, kind, N=None, kernel_tag=None, tol=None):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CacheError(f"{path}: truncated header")
    magic, version, k, n, flags, tag, t, count, digest = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise CacheError(f"{path}: not a mode cache (bad magic or version)")
    if k != kind:
        raise CacheError(f"{path}: wrong record kind")
    payload = data[_HEADER.size :]
    if hashlib.sha256(payload).digest() != digest:
        raise CacheError(f"{path}: payload checksum mismatch")
    if N is not None and n != N:
        raise CacheError(f"{path}: cached N={n}, requested N={N}")
    if kernel_tag is not None and tag != tag_digest(kernel_tag):
        raise CacheError(f"{path}: kernel tag mismatch")
    if tol is not None and t > tol:
        raise CacheError(f"{path}: cached tolerance {t} looser than requested {tol}")
    return n, flags, t, count, payload


def save_mode_tensor(tensor, path):
    rec = np.empty(len(tensor), dtype=_RECORD)
    rec["kp"], rec["km"], rec["dot"] = tensor.keys.T
    rec["value"] = tensor.values
    _write(path, 0, tensor.N, int(tensor.signed), tensor.kernel_tag, tensor.tol, len(tensor), rec.tobytes())


def load_mode_tensor(path, N=None, kernel_tag=None, tol=None):
    from .boltzmann_modes import ModeTensor

    n, flags, t, count, payload = _read(path, 0, N, kernel_tag, tol)
    if len(payload) != count * _RECORD.itemsize:
        raise CacheError(f"{path}: payload size mismatch")
    rec = np.frombuffer(payload, dtype=_RECORD)
    keys = np.stack([rec["kp"], rec["km"], rec["dot"]], axis=1).astype(np.int64)
    return ModeTensor(n, keys, rec["value"].copy(), kernel_tag or "", t, signed=bool(flags & 1))


def save_split_kernel(split, path):
    arrays = split.field_stack()
    payload = np.ascontiguousarray(arrays, dtype="<c16").tobytes()
    _write(path, 1, split.N, split.variant_code, split.kernel_tag, split.tol, arrays.size, payload)


def load_split_kernel(path, N=None, kernel_tag=None, tol=None):
    from .grazing_fpl_modes import SplitKernel

    n, flags, t, count, payload = _read(path, 1, N, kernel_tag, tol)
    arr = np.frombuffer(payload, dtype="<c16").copy()
    side = 2 * n + 1
    if arr.size != count or count % side**3:
        raise CacheError(f"{path}: payload size mismatch")
    arr = arr.reshape(-1, side, side, side)
    return SplitKernel.from_field_stack(n, arr, flags, kernel_tag or "", t)


def load_any(path):
    """Load and verify a cache file of either kind (no tag or tolerance check)."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CacheError(f"{path}: truncated header")
    kind = _HEADER.unpack_from(data)[2]
    if kind == 0:
        return load_mode_tensor(path)
    if kind == 1:
        return load_split_kernel(path)
    raise CacheError(f"{path}: unknown record kind {kind}")
