"""Sparse padding operators and their Kronecker composition.

A 2D padding of a column-major vectorized image factors as

    P = P1d(n_t, n_r) kron P1d(m_t, m_r)

so only the two 1D matrices ever need to be built by hand. Row-major
vectorization would swap the Kronecker factors.
"""

import enum
from typing import Optional, Tuple

import numpy as np

KRON_MAX_DIM = 2 ** 62


class PadMode(enum.Enum):
    ZERO = "zero"
    REPLICATE = "replicate"
    SYMMETRIC = "symmetric"
    CIRCULAR = "circular"

    @classmethod
    def parse(cls, value) -> "PadMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown pad mode {value!r}; choose from {[m.value for m in cls]}"
            ) from None


DEFAULT_PAD_MODE = PadMode.SYMMETRIC


class SparseOperator:
    """Immutable sparse matrix stored as canonical (row, col, value) triples.

    Triples are 0-based internally, sorted by row then column, with no
    duplicates. ``in_shape``/``out_shape`` optionally record the image
    shapes the matrix maps between, so images can be passed directly.
    """

    def __init__(self, nrows, ncols, rows, cols, vals, in_shape=None, out_shape=None):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("row, col and value arrays differ in length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols:
                raise ValueError("sparse entry index out of bounds")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if dup.any():
                raise ValueError("duplicate (row, col) entries")
        for a in (rows, cols, vals):
            a.flags.writeable = False
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.rows, self.cols, self.vals = rows, cols, vals
        if in_shape is not None and in_shape[0] * in_shape[1] != self.ncols:
            raise ValueError(f"in_shape {in_shape} inconsistent with {self.ncols} columns")
        if out_shape is not None and out_shape[0] * out_shape[1] != self.nrows:
            raise ValueError(f"out_shape {out_shape} inconsistent with {self.nrows} rows")
        self.in_shape = tuple(in_shape) if in_shape is not None else None
        self.out_shape = tuple(out_shape) if out_shape is not None else None

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return self.vals.size

    def __repr__(self):
        return f"SparseOperator({self.nrows}x{self.ncols}, nnz={self.nnz})"

    def __eq__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )

    __hash__ = None

    def transpose(self) -> "SparseOperator":
        return SparseOperator(
            self.ncols, self.nrows, self.cols, self.rows, self.vals,
            in_shape=self.out_shape, out_shape=self.in_shape,
        )

    @property
    def T(self) -> "SparseOperator":
        return self.transpose()

    def todense(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        dense[self.rows, self.cols] = self.vals
        return dense

    def row_counts(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.nrows)

    def to_text(self) -> str:
        lines = [f"sparse {self.nrows} {self.ncols} {self.nnz}"]
        lines += [f"{r + 1} {c + 1} {v!r}" for r, c, v in zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SparseOperator":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if len(head) != 4 or head[0] != "sparse":
            raise ValueError(f"bad sparse header: {lines[0]!r}")
        nrows, ncols, nnz = (int(t) for t in head[1:])
        body = lines[1:]
        if len(body) != nnz:
            raise ValueError(f"header announces {nnz} entries, found {len(body)}")
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        for n, ln in enumerate(body):
            r, c, v = ln.split()
            rows[n], cols[n], vals[n] = int(r) - 1, int(c) - 1, float(v)
        return cls(nrows, ncols, rows, cols, vals)


def make_pad_1d(m_t: int, m_r: int, mode=DEFAULT_PAD_MODE) -> SparseOperator:
    """(m_t + 2 m_r) x m_t padding matrix.

    Interior rows m_r+1..m_r+m_t form the identity. Symmetric padding
    repeats the edge sample (... a2 a1 | a1 a2 ...).
    """
    mode = PadMode.parse(mode)
    if m_t < 1 or m_r < 0:
        raise ValueError(f"need m_t >= 1 and m_r >= 0, got m_t={m_t}, m_r={m_r}")
    if mode is not PadMode.ZERO and m_r > m_t:
        raise ValueError(f"pad radius {m_r} exceeds length {m_t} for {mode.value} padding")

    j = np.arange(1, m_r + 1)  # distance of the pad row from the edge
    if mode is PadMode.ZERO:
        top = bottom = np.empty(0, dtype=np.int64)
    elif mode is PadMode.REPLICATE:
        top = np.zeros(m_r, dtype=np.int64)
        bottom = np.full(m_r, m_t - 1)
    elif mode is PadMode.SYMMETRIC:
        top = j[::-1] - 1            # pad rows 1..m_r read m_r..1
        bottom = m_t - j             # rows after the interior read m_t, m_t-1, ...
    else:
        top = m_t - m_r + j - 1      # tail entries
        bottom = j - 1               # head entries

    interior_rows = np.arange(m_t) + m_r
    if mode is PadMode.ZERO:
        rows = interior_rows
        cols = np.arange(m_t)
    else:
        rows = np.concatenate([np.arange(m_r), interior_rows, m_r + m_t + np.arange(m_r)])
        cols = np.concatenate([top, np.arange(m_t), bottom])
    return SparseOperator(m_t + 2 * m_r, m_t, rows, cols, np.ones(rows.size))


def kronecker(a: SparseOperator, b: SparseOperator) -> SparseOperator:
    """Sparse Kronecker product; block (i, j) equals a[i, j] * b."""
    nrows = a.nrows * b.nrows
    ncols = a.ncols * b.ncols
    if nrows >= KRON_MAX_DIM or ncols >= KRON_MAX_DIM:
        raise OverflowError(f"Kronecker product dimensions {nrows}x{ncols} too large")
    rows = (a.rows[:, None] * b.nrows + b.rows[None, :]).ravel()
    cols = (a.cols[:, None] * b.ncols + b.cols[None, :]).ravel()
    vals = (a.vals[:, None] * b.vals[None, :]).ravel()
    return SparseOperator(nrows, ncols, rows, cols, vals)


def make_pad_2d(m_t: int, n_t: int, m_r: int, n_r: int, mode=DEFAULT_PAD_MODE) -> SparseOperator:
    """Padding of an m_t x n_t image to (m_t + 2 m_r) x (n_t + 2 n_r)."""
    p = kronecker(make_pad_1d(n_t, n_r, mode), make_pad_1d(m_t, m_r, mode))
    return SparseOperator(
        p.nrows, p.ncols, p.rows, p.cols, p.vals,
        in_shape=(m_t, n_t), out_shape=(m_t + 2 * m_r, n_t + 2 * n_r),
    )


def _as_vector(a: SparseOperator, v, length: int, shape: Optional[tuple]):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 2:
        if shape is not None and v.shape != shape:
            raise ValueError(f"image shape {v.shape} does not match operator side {shape}")
        v = v.ravel(order="F")
    if v.size != length:
        raise ValueError(f"vector length {v.size} does not match operator dimension {length}")
    return v


def apply_sparse(a: SparseOperator, v) -> np.ndarray:
    """A @ v. 2D images are vectorized column-major and the result is
    reshaped to ``a.out_shape`` when it is known."""
    was_image = np.ndim(v) == 2
    x = _as_vector(a, v, a.ncols, a.in_shape)
    y = np.bincount(a.rows, weights=a.vals * x[a.cols], minlength=a.nrows)
    if was_image and a.out_shape is not None:
        return y.reshape(a.out_shape, order="F")
    return y


def apply_sparse_transpose(a: SparseOperator, v) -> np.ndarray:
    """A^T @ v, computed from the stored triples without building A^T."""
    was_image = np.ndim(v) == 2
    x = _as_vector(a, v, a.nrows, a.out_shape)
    y = np.bincount(a.cols, weights=a.vals * x[a.rows], minlength=a.ncols)
    if was_image and a.in_shape is not None:
        return y.reshape(a.in_shape, order="F")
    return y
