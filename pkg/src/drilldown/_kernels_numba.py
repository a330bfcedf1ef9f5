"""Numba-compiled kernels: row-major loops over codes, serial for determinism."""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _count_marginals(codes, row_w, topw, cands, cand_w, counts, marginals):
    n, f = codes.shape
    m = cands.shape[0]
    for t in range(n):
        for i in range(m):
            ok = True
            for c in range(f):
                v = cands[i, c]
                if v >= 0 and codes[t, c] != v:
                    ok = False
                    break
            if ok:
                counts[i] += row_w[t]
                gain = cand_w[i] - topw[t]
                if gain > 0.0:
                    marginals[i] += gain * row_w[t]


def count_marginals(codes, row_w, topw, cands, cand_w):
    m = cands.shape[0]
    counts = np.zeros(m, dtype=np.float64)
    marginals = np.zeros(m, dtype=np.float64)
    if m and codes.shape[0]:
        _count_marginals(
            np.ascontiguousarray(codes),
            row_w,
            topw,
            np.ascontiguousarray(cands),
            cand_w,
            counts,
            marginals,
        )
    return counts, marginals


@nb.njit(cache=True)
def _reservoir_pass(codes, filters, capacities, offsets, buf, counts, seed):
    np.random.seed(seed)
    n, ncols = codes.shape
    m = filters.shape[0]
    for t in range(n):
        for i in range(m):
            ok = True
            for c in range(ncols):
                v = filters[i, c]
                if v >= 0 and codes[t, c] != v:
                    ok = False
                    break
            if not ok:
                continue
            counts[i] += 1
            cap = capacities[i]
            if cap == 0:
                continue
            seen = counts[i]
            if seen <= cap:
                buf[offsets[i] + seen - 1] = t
            else:
                j = np.random.randint(0, seen)
                if j < cap:
                    buf[offsets[i] + j] = t


def sample_pool_pass(codes, filters, capacities, seed):
    m = filters.shape[0]
    caps = np.asarray(capacities, dtype=np.int64)
    offsets = np.zeros(m, dtype=np.int64)
    if m:
        offsets[1:] = np.cumsum(caps)[:-1]
    buf = np.full(int(caps.sum()), -1, dtype=np.int64)
    counts = np.zeros(m, dtype=np.int64)
    if codes.shape[0] and m:
        _reservoir_pass(
            np.ascontiguousarray(codes),
            np.ascontiguousarray(filters),
            caps,
            offsets,
            buf,
            counts,
            seed,
        )
    chosen = []
    for i in range(m):
        take = min(int(caps[i]), int(counts[i]))
        rows = buf[offsets[i] : offsets[i] + take]
        rows = rows[rows >= 0]
        rows.sort()
        chosen.append(rows.copy())
    return chosen, counts
