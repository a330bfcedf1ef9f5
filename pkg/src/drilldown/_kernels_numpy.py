"""Pure-numpy reference implementations of the hot kernels."""

from __future__ import annotations

import numpy as np


def count_marginals(codes, row_w, topw, cands, cand_w):
    """Per-candidate cover aggregate and marginal value in one logical pass.

    codes:  (n, f) int32 view codes
    row_w:  (n,) float64 per-row aggregate weight (1.0 for counts)
    topw:   (n,) float64 weight of the best current rule covering each row
    cands:  (m, f) int32 candidate patterns, -1 for stars
    cand_w: (m,) float64 candidate weights
    """
    n, f = codes.shape
    m = cands.shape[0]
    counts = np.zeros(m, dtype=np.float64)
    marginals = np.zeros(m, dtype=np.float64)
    for i in range(m):
        mask = np.ones(n, dtype=bool)
        for c in range(f):
            v = cands[i, c]
            if v >= 0:
                mask &= codes[:, c] == v
        counts[i] = row_w[mask].sum()
        gain = cand_w[i] - topw[mask]
        np.clip(gain, 0.0, None, out=gain)
        marginals[i] = (gain * row_w[mask]).sum()
    return counts, marginals


def sample_pool_pass(codes, filters, capacities, seed):
    """Uniform without-replacement draws per filter, plus exact cover counts.

    Returns (list of chosen row-index arrays, exact counts).  Equivalent in
    distribution to a single-pass multi-reservoir scan.
    """
    rng = np.random.default_rng(seed)
    n, ncols = codes.shape
    chosen = []
    counts = np.zeros(len(filters), dtype=np.int64)
    for i in range(filters.shape[0]):
        mask = np.ones(n, dtype=bool)
        for c in range(ncols):
            v = filters[i, c]
            if v >= 0:
                mask &= codes[:, c] == v
        rows = np.flatnonzero(mask)
        counts[i] = rows.size
        take = min(int(capacities[i]), rows.size)
        if take == 0:
            chosen.append(np.empty(0, dtype=np.int64))
        else:
            picked = rng.choice(rows, size=take, replace=False)
            picked.sort()
            chosen.append(picked.astype(np.int64))
    return chosen, counts
