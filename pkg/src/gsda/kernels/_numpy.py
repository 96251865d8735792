"""Pure-numpy kernel implementations.

These are the fallback used when the compiled extension is unavailable;
signatures and semantics match gsda.kernels._native exactly (first-
occurrence tie-breaks included).
"""

import numpy as np


def nearest_sqdist(a: np.ndarray, b: np.ndarray):
    """For each row of ``a``, squared distance to (and index of) the
    nearest row of ``b``.  Returns (d2 (m,), idx (m,) int64)."""
    d2, idx = nearest_sqdist_batch(a[None], b[None])
    return d2[0], idx[0]


def nearest_sqdist_batch(a: np.ndarray, b: np.ndarray):
    """Batched nearest_sqdist over leading axis: (B,m,3) vs (B,n,3)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a2 = np.einsum("bij,bij->bi", a, a)
    b2 = np.einsum("bij,bij->bi", b, b)
    cross = a @ b.transpose(0, 2, 1)
    d2 = a2[:, :, None] + b2[:, None, :] - 2.0 * cross
    idx = d2.argmin(axis=2)
    best = np.take_along_axis(d2, idx[:, :, None], axis=2)[:, :, 0]
    # the dot-product expansion can go slightly negative for coincident points
    np.maximum(best, 0.0, out=best)
    return best, idx.astype(np.int64)


def maxpool_forward(h: np.ndarray):
    """Column-wise max over the point axis of (B, n, F); ties keep the
    lowest point index.  Returns (values (B,F), argmax (B,F) int64)."""
    h = np.asarray(h, dtype=np.float64)
    am = h.argmax(axis=1)
    out = np.take_along_axis(h, am[:, None, :], axis=1)[:, 0, :]
    return out, am.astype(np.int64)


def pool_backward_matmul(dpool: np.ndarray, argmax: np.ndarray, wt: np.ndarray, n: int):
    """Backprop a pooled gradient through the pool and one linear layer.

    Scatters row f of ``dpool`` to point argmax[b, f], then multiplies by
    the layer's transposed weights ``wt`` (F, F_prev).  Returns
    (B, n, F_prev).
    """
    dpool = np.asarray(dpool, dtype=np.float64)
    wt = np.asarray(wt, dtype=np.float64)
    B, F = dpool.shape
    dh = np.zeros((B, n, F))
    np.put_along_axis(dh, argmax[:, None, :], dpool[:, None, :], axis=1)
    out = dh.reshape(B * n, F) @ wt
    return out.reshape(B, n, wt.shape[1])
