"""Convolution and auxiliary image operators.

Images are 2D float64 numpy arrays. Whenever an image is flattened into a
vector (operator materialization, sparse padding, file I/O) the flattening
is column-major: pixel (i, j), 1-based, sits at index ``rows*(j-1) + i``.

Public functions taking row/column positions use 1-based indices, the
same convention used for kernel centres and padding layouts throughout
the package. Internals are 0-based.
"""

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .padding import SparseOperator

MATERIALIZE_MAX_COLUMNS = 4096


@dataclass(frozen=True)
class IndexRange:
    """Closed 1-based row range ``lo..hi`` inside an ambient height ``total``."""

    lo: int
    hi: int
    total: int

    def __post_init__(self):
        if not 1 <= self.lo <= self.hi <= self.total:
            raise ValueError(
                f"invalid index range lo={self.lo} hi={self.hi} total={self.total}"
            )

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def exceptions(self) -> np.ndarray:
        """1-based indices of ``{1..total}`` outside ``lo..hi``."""
        idx = np.arange(1, self.total + 1)
        return idx[(idx < self.lo) | (idx > self.hi)]


def as_image(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a nonempty 2D image, got shape {a.shape}")
    return a


def vec(a: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(a).ravel(order="F")


def unvec(v: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    return np.asarray(v).reshape(shape, order="F")


def basis_image(rows: int, cols: int, p: int, q: int) -> np.ndarray:
    """Standard basis image e(p, q), 1-based."""
    e = np.zeros((rows, cols))
    e[p - 1, q - 1] = 1.0
    return e


# -- convolutions -----------------------------------------------------------


def valid_convolve(k, a) -> np.ndarray:
    """Valid 2D convolution; output is (m_a-m_k+1) x (n_a-n_k+1).

    Summation is kernel-major (p outer, q inner) for every output pixel.
    """
    k = as_image(k)
    a = as_image(a)
    m_k, n_k = k.shape
    m_a, n_a = a.shape
    if m_a < m_k or n_a < n_k:
        raise ValueError(f"kernel {k.shape} exceeds image {a.shape}")
    m_o, n_o = m_a - m_k + 1, n_a - n_k + 1
    out = np.zeros((m_o, n_o))
    for p in range(m_k):
        r0 = m_k - 1 - p
        for q in range(n_k):
            c0 = n_k - 1 - q
            out += k[p, q] * a[r0:r0 + m_o, c0:c0 + n_o]
    return out


def full_convolve(k, a) -> np.ndarray:
    """Full 2D convolution; output is (m_a+m_k-1) x (n_a+n_k-1)."""
    k = as_image(k)
    a = as_image(a)
    m_k, n_k = k.shape
    m_a, n_a = a.shape
    out = np.zeros((m_a + m_k - 1, n_a + n_k - 1))
    for p in range(m_k):
        for q in range(n_k):
            out[p:p + m_a, q:q + n_a] += k[p, q] * a
    return out


def circ_add(a: int, b: int, c: int) -> int:
    """Circular sum on ``{1..c}``."""
    _check_circ(a, b, c)
    return (a + b - 2) % c + 1


def circ_sub(a: int, b: int, c: int) -> int:
    """Circular difference on ``{1..c}``."""
    _check_circ(a, b, c)
    return (a - b) % c + 1


def _check_circ(a, b, c):
    if c < 1 or not (1 <= a <= c and 1 <= b <= c):
        raise ValueError(f"circular arithmetic needs a, b in 1..{c}; got a={a}, b={b}")


def circular_convolve(kbar, abar) -> np.ndarray:
    """Periodic convolution of two equally sized images."""
    kbar = as_image(kbar)
    abar = as_image(abar)
    if kbar.shape != abar.shape:
        raise ValueError(f"circular convolution needs equal sizes, got {kbar.shape} and {abar.shape}")
    m, n = kbar.shape
    out = np.zeros((m, n))
    for p, q in zip(*np.nonzero(kbar)):
        out += kbar[p, q] * circular_shift(abar, p + 1, q + 1)
    return out


def circular_shift(a, p: int, q: int) -> np.ndarray:
    """S(p, q): output (i, j) reads input (i (-) p, j (-) q); S(1, 1) is the identity."""
    a = as_image(a)
    m, n = a.shape
    if not (1 <= p <= m and 1 <= q <= n):
        raise ValueError(f"shift ({p}, {q}) outside image of size {a.shape}")
    rows = (np.arange(m) - (p - 1)) % m
    cols = (np.arange(n) - (q - 1)) % n
    return a[np.ix_(rows, cols)]


def rotate180(k) -> np.ndarray:
    return as_image(k)[::-1, ::-1].copy()


# -- windows and zero padding ----------------------------------------------


def window_rows(a, r: IndexRange) -> np.ndarray:
    a = as_image(a)
    if r.total != a.shape[0]:
        raise ValueError(f"range ambient height {r.total} != image height {a.shape[0]}")
    return a[r.lo - 1:r.hi].copy()


def zero_pad_rows(a, r: IndexRange) -> np.ndarray:
    a = as_image(a)
    if a.shape[0] != r.size:
        raise ValueError(f"image height {a.shape[0]} != range width {r.size}")
    out = np.zeros((r.total, a.shape[1]))
    out[r.lo - 1:r.hi] = a
    return out


def window_general(a, rows: IndexRange, cols: IndexRange) -> np.ndarray:
    a = as_image(a)
    if (rows.total, cols.total) != a.shape:
        raise ValueError(f"ranges ambient {(rows.total, cols.total)} != image {a.shape}")
    return a[rows.lo - 1:rows.hi, cols.lo - 1:cols.hi].copy()


def zero_pad_general(a, rows: IndexRange, cols: IndexRange) -> np.ndarray:
    a = as_image(a)
    if a.shape != (rows.size, cols.size):
        raise ValueError(f"image {a.shape} != range extents {(rows.size, cols.size)}")
    out = np.zeros((rows.total, cols.total))
    out[rows.lo - 1:rows.hi, cols.lo - 1:cols.hi] = a
    return out


# -- oracle support -----------------------------------------------------------


def materialize_operator(op: Callable[[np.ndarray], np.ndarray], in_rows: int, in_cols: int) -> SparseOperator:
    """Explicit matrix of a linear image operator.

    Column c is ``vec(op(e_c))`` where e_c is the c-th column-major basis image.
    """
    ncols = in_rows * in_cols
    if ncols > MATERIALIZE_MAX_COLUMNS:
        raise ValueError(f"refusing to materialize {ncols} columns (limit {MATERIALIZE_MAX_COLUMNS})")
    rows, cols, vals = [], [], []
    out_shape = None
    for c in range(ncols):
        e = np.zeros(ncols)
        e[c] = 1.0
        col = op(unvec(e, (in_rows, in_cols)))
        out_shape = col.shape
        v = vec(col)
        nz = np.flatnonzero(v)
        rows.append(nz)
        cols.append(np.full(nz.size, c))
        vals.append(v[nz])
    nrows = out_shape[0] * out_shape[1]
    return SparseOperator(
        nrows, ncols,
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
        in_shape=(in_rows, in_cols), out_shape=out_shape,
    )
