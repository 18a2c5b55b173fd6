"""Pure-numpy Tanimoto kernels, used when the compiled extension is unavailable.

Fingerprints arrive packed into ``uint64`` words (see :func:`genbo.tanimoto.pack`).
"""

import numpy as np


def intersection_counts(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise popcount of ``a[i] & b[j]`` over packed rows."""
    if a.shape[1] != b.shape[1]:
        raise ValueError("packed word counts differ")
    ua = np.unpackbits(a.view(np.uint8), axis=1).astype(np.float64)
    ub = np.unpackbits(b.view(np.uint8), axis=1).astype(np.float64)
    return np.rint(ua @ ub.T).astype(np.int64)


def pair_tanimoto(sx, sw, cx, cw, ax, aw, bx, bw) -> np.ndarray:
    """Tanimoto similarity between joint points ``(ax[i], aw[i])`` and ``(bx[j], bw[j])``.

    ``sx``/``sw`` hold the per-component intersection counts and ``cx``/``cw``
    the per-point bit counts, so the joint fingerprint never has to be built.
    An empty union gives similarity 0.
    """
    inter = sx[np.ix_(ax, bx)] + sw[np.ix_(aw, bw)]
    na = cx[ax] + cw[aw]
    nb = cx[bx] + cw[bw]
    union = na[:, None] + nb[None, :] - inter
    out = np.zeros(inter.shape, dtype=np.float64)
    np.divide(inter, union, out=out, where=union != 0)
    return out
