"""Tanimoto similarity on binary fingerprints.

The two hot kernels live in a compiled extension (``genbo._tanimoto``) with a
numpy twin in ``genbo._tanimoto_py``. The compiled one is used when it imports;
set ``GENBO_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _tanimoto_py

if os.environ.get("GENBO_PURE_PYTHON", "") not in ("", "0"):
    _impl = _tanimoto_py
else:
    try:
        from . import _tanimoto as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _tanimoto_py

BACKEND = "compiled" if _impl is not _tanimoto_py else "python"


def pack(bits: np.ndarray) -> np.ndarray:
    """Pack a ``(n, L)`` boolean matrix into C-contiguous ``(n, ceil(L/64))`` uint64 words."""
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    n, length = bits.shape
    words = max(1, -(-length // 64))
    padded = np.zeros((n, words * 64), dtype=bool)
    padded[:, :length] = bits
    return np.ascontiguousarray(np.packbits(padded, axis=1).view(np.uint64))


def intersection_counts(a_bits: np.ndarray, b_bits: np.ndarray, impl=None) -> np.ndarray:
    """``out[i, j] = |a_i AND b_j|`` for boolean fingerprint matrices."""
    impl = impl or _impl
    return impl.intersection_counts(pack(a_bits), pack(b_bits))


def tanimoto_matrix(a_bits: np.ndarray, b_bits: np.ndarray, impl=None) -> np.ndarray:
    """Pairwise Tanimoto similarity; rows with an empty union score 0."""
    a_bits = np.atleast_2d(np.asarray(a_bits, dtype=bool))
    b_bits = np.atleast_2d(np.asarray(b_bits, dtype=bool))
    if a_bits.shape[1] != b_bits.shape[1]:
        raise ValueError(
            f"fingerprint length mismatch: {a_bits.shape[1]} vs {b_bits.shape[1]}"
        )
    inter = intersection_counts(a_bits, b_bits, impl).astype(np.float64)
    union = a_bits.sum(1)[:, None] + b_bits.sum(1)[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union != 0)
    return out


def pair_tanimoto(sx, sw, cx, cw, ax, aw, bx, bw, impl=None) -> np.ndarray:
    impl = impl or _impl
    as_i64 = lambda v: np.ascontiguousarray(v, dtype=np.int64)  # noqa: E731
    return impl.pair_tanimoto(
        as_i64(sx), as_i64(sw), as_i64(cx), as_i64(cw),
        as_i64(ax), as_i64(aw), as_i64(bx), as_i64(bw),
    )
