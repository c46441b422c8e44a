"""Compiled row loops for the axially-variant operator pair.

Every output pixel is accumulated in a fixed order (ascending kernel row,
then kernel column, and for the adjoint ascending source row first), and
each output row is owned by exactly one loop iteration. Results are
therefore bit-identical for any thread count.

Inner loops index through slice views so the compiler can drop negative
index handling and vectorize.
"""

import numba
from numba import njit, prange

# the bundled TBB is too old for numba; skip probing it
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(parallel=True, cache=True)
def forward_rows(kernels, xp, out):
    m_t, m_k, n_k = kernels.shape
    n_t = out.shape[1]
    for i in prange(m_t):
        orow = out[i]
        for p in range(m_k):
            xrow = xp[i + m_k - 1 - p]
            for q in range(n_k):
                c = kernels[i, p, q]
                off = n_k - 1 - q
                xs = xrow[off:off + n_t]
                for j in range(n_t):
                    orow[j] += c * xs[j]


@njit(cache=True)
def forward_rows_counted(kernels, xp, out):
    """Same loop as ``forward_rows`` (serial) with a multiply counter."""
    m_t, m_k, n_k = kernels.shape
    n_t = out.shape[1]
    count = 0
    for i in range(m_t):
        orow = out[i]
        for p in range(m_k):
            xrow = xp[i + m_k - 1 - p]
            for q in range(n_k):
                c = kernels[i, p, q]
                off = n_k - 1 - q
                xs = xrow[off:off + n_t]
                for j in range(n_t):
                    orow[j] += c * xs[j]
                    count += 1
    return count


@njit(parallel=True, cache=True)
def adjoint_rows(kernels, r, g):
    # gather form: padded row `row` collects every source row i whose
    # kernel band i..i+m_k-1 covers it, in ascending i
    m_t, m_k, n_k = kernels.shape
    n_t = r.shape[1]
    m_p = g.shape[0]
    for row in prange(m_p):
        grow = g[row]
        lo = max(0, row - m_k + 1)
        hi = min(m_t - 1, row)
        for i in range(lo, hi + 1):
            p = i + m_k - 1 - row
            rrow = r[i]
            for q in range(n_k):
                c = kernels[i, p, q]
                off = n_k - 1 - q
                gs = grow[off:off + n_t]
                for j in range(n_t):
                    gs[j] += c * rrow[j]


def set_threads(n):
    """Bound the number of worker threads; ``None`` restores the maximum."""
    if n is None:
        n = numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
