"""Pure-numpy reference implementations of the accelerated kernels.

Every function here is the semantic contract for its compiled twin in
``_native.pyx``.  The two are kept bitwise-identical: each floating-point
operation is performed in the same order with the same IEEE-754 semantics,
so results never depend on which backend was selected at import time.
"""

from __future__ import annotations

import numpy as np


def sweep_counts(scores_desc: np.ndarray, labels_desc: np.ndarray):
    """Cumulative confusion counts over a descending-threshold sweep.

    Inputs must already be sorted by score descending (labels carried along).
    Returns ``(thresholds, tp, fp)`` with one entry per distinct score: tp[i]
    and fp[i] count samples with score >= thresholds[i] (inclusive rule).
    """
    n = scores_desc.shape[0]
    boundary = np.empty(n, dtype=bool)
    np.not_equal(scores_desc[:-1], scores_desc[1:], out=boundary[:-1])
    boundary[n - 1] = True
    keep = np.nonzero(boundary)[0]
    tp_cum = np.cumsum(labels_desc, dtype=np.int64)
    thresholds = scores_desc[keep].copy()
    tp = tp_cum[keep]
    fp = (keep + 1) - tp
    return thresholds, tp, fp.astype(np.int64)


def bin_accumulate(scores: np.ndarray, wa: np.ndarray, wb: np.ndarray,
                   edges: np.ndarray):
    """Accumulate two weight columns into half-open-below bins.

    ``edges`` has Z+1 ascending entries; a score s falls in bin k (0-based)
    when edges[k] < s <= edges[k+1], except s == edges[0] which joins bin 0.
    Returns ``(counts, sum_a, sum_b)`` each of length Z.  Sums accumulate in
    input order.
    """
    nbins = edges.shape[0] - 1
    idx = np.searchsorted(edges, scores, side="left") - 1
    np.clip(idx, 0, nbins - 1, out=idx)
    counts = np.bincount(idx, minlength=nbins).astype(np.int64)
    sum_a = np.bincount(idx, weights=wa, minlength=nbins)
    sum_b = np.bincount(idx, weights=wb, minlength=nbins)
    return counts, sum_a, sum_b


def natural_spline_basis(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Natural cubic spline basis matrix evaluated at ``x``.

    Columns: constant, x, then K-2 truncated-cubic differences that are
    linear beyond the boundary knots.  With K knots the matrix is (n, K).
    """
    n = x.shape[0]
    nk = knots.shape[0]
    out = np.empty((n, nk), dtype=np.float64)
    out[:, 0] = 1.0
    out[:, 1] = x

    last = knots[nk - 1]
    t = x - last
    cube_last = np.where(t > 0.0, (t * t) * t, 0.0)

    t = x - knots[nk - 2]
    cube_penult = np.where(t > 0.0, (t * t) * t, 0.0)
    d_penult = (cube_penult - cube_last) / (last - knots[nk - 2])

    for j in range(nk - 2):
        t = x - knots[j]
        cube = np.where(t > 0.0, (t * t) * t, 0.0)
        out[:, j + 2] = (cube - cube_last) / (last - knots[j]) - d_penult
    return out
