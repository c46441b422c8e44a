"""Axially-variant convolution model ``y = H P x + n``.

``H`` maps a padded m_p x n_p image to m_t x n_t: output row i_h is the
valid convolution of kernel k(i_h) with padded rows i_h..i_h+2 m_r. Its
adjoint scatters the full correlation of each residual row back over
the same band. Both cost m_k n_k m_t n_t multiplies and need no storage
beyond their input and output images.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core_ops import (
    IndexRange,
    full_convolve,
    materialize_operator,
    rotate180,
    valid_convolve,
    window_rows,
    zero_pad_rows,
)
from .noise import NO_NOISE, awgn
from .padding import (
    DEFAULT_PAD_MODE,
    PadMode,
    SparseOperator,
    apply_sparse,
    apply_sparse_transpose,
    make_pad_2d,
)

MATERIALIZE_MAX_PADDED = 4096


@dataclass(frozen=True, eq=False)
class AxialKernelStack:
    """One (2 m_r + 1) x (2 n_r + 1) kernel per image row; shape (m_t, m_k, n_k)."""

    kernels: np.ndarray

    def __post_init__(self):
        k = np.ascontiguousarray(self.kernels, dtype=np.float64)
        if k.ndim != 3 or k.shape[0] < 1:
            raise ValueError(f"kernel stack must be (m_t, m_k, n_k), got {k.shape}")
        if k.shape[1] % 2 == 0 or k.shape[2] % 2 == 0:
            raise ValueError(f"kernel dimensions must be odd, got {k.shape[1:]}")
        k.flags.writeable = False
        object.__setattr__(self, "kernels", k)

    @classmethod
    def constant(cls, kernel, m_t: int) -> "AxialKernelStack":
        kernel = np.asarray(kernel, dtype=np.float64)
        return cls(np.broadcast_to(kernel, (m_t,) + kernel.shape))

    @property
    def m_t(self) -> int:
        return self.kernels.shape[0]

    @property
    def m_k(self) -> int:
        return self.kernels.shape[1]

    @property
    def n_k(self) -> int:
        return self.kernels.shape[2]

    @property
    def m_r(self) -> int:
        return (self.m_k - 1) // 2

    @property
    def n_r(self) -> int:
        return (self.n_k - 1) // 2

    def kernel(self, i_h: int) -> np.ndarray:
        """Kernel of row ``i_h`` (1-based)."""
        if not 1 <= i_h <= self.m_t:
            raise IndexError(f"row {i_h} outside 1..{self.m_t}")
        return self.kernels[i_h - 1]

    def padded_shape(self, n_t: int):
        return (self.m_t + 2 * self.m_r, n_t + 2 * self.n_r)


@dataclass(eq=False)
class ForwardModel:
    """The composition H P for a fixed TRF width ``n_t``."""

    stack: AxialKernelStack
    n_t: int
    pad_mode: PadMode = DEFAULT_PAD_MODE
    pad: SparseOperator = field(init=False, repr=False)

    def __post_init__(self):
        self.pad_mode = PadMode.parse(self.pad_mode)
        s = self.stack
        self.pad = make_pad_2d(s.m_t, self.n_t, s.m_r, s.n_r, self.pad_mode)

    @property
    def shape(self):
        return (self.stack.m_t, self.n_t)

    def apply(self, x) -> np.ndarray:
        """H P x."""
        return forward_H(self.stack, apply_sparse(self.pad, _check(x, self.shape)))

    def adjoint(self, r) -> np.ndarray:
        """P^T H^T r."""
        return apply_sparse_transpose(self.pad, adjoint_H(self.stack, _check(r, self.shape)))


def _check(a, shape):
    a = np.asarray(a, dtype=np.float64)
    if a.shape != tuple(shape):
        raise ValueError(f"expected image of shape {tuple(shape)}, got {a.shape}")
    return a


def _padded_input(stack: AxialKernelStack, xp) -> np.ndarray:
    xp = np.ascontiguousarray(xp, dtype=np.float64)
    if xp.ndim != 2 or xp.shape[0] != stack.m_t + 2 * stack.m_r or xp.shape[1] < stack.n_k:
        raise ValueError(
            f"padded image must have {stack.m_t + 2 * stack.m_r} rows and at least "
            f"{stack.n_k} columns, got {xp.shape}"
        )
    return xp


def forward_H(stack: AxialKernelStack, xp) -> np.ndarray:
    """Apply H to a padded image (m_p x n_p) giving an m_t x n_t image."""
    xp = _padded_input(stack, xp)
    out = np.zeros((stack.m_t, xp.shape[1] - 2 * stack.n_r))
    _kernels.forward_rows(stack.kernels, xp, out)
    return out


def forward_H_counted(stack: AxialKernelStack, xp):
    """``forward_H`` through an instrumented loop; returns (image, multiplies)."""
    xp = _padded_input(stack, xp)
    out = np.zeros((stack.m_t, xp.shape[1] - 2 * stack.n_r))
    count = _kernels.forward_rows_counted(stack.kernels, xp, out)
    return out, int(count)


def adjoint_H(stack: AxialKernelStack, r) -> np.ndarray:
    """Apply H^T to an m_t x n_t image giving a padded m_p x n_p image."""
    r = np.ascontiguousarray(r, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != stack.m_t:
        raise ValueError(f"residual must have {stack.m_t} rows, got shape {r.shape}")
    g = np.zeros(stack.padded_shape(r.shape[1]))
    _kernels.adjoint_rows(stack.kernels, r, g)
    return g


def forward_H_reference(stack: AxialKernelStack, xp) -> np.ndarray:
    """H as the literal sum over rows of Z_t C1(k) W_p; slow, for checking."""
    xp = _padded_input(stack, xp)
    m_t, m_r = stack.m_t, stack.m_r
    out = np.zeros((m_t, xp.shape[1] - 2 * stack.n_r))
    for i_h in range(1, m_t + 1):
        band = window_rows(xp, IndexRange(i_h, i_h + 2 * m_r, xp.shape[0]))
        row = valid_convolve(stack.kernel(i_h), band)
        out += zero_pad_rows(row, IndexRange(i_h, i_h, m_t))
    return out


def adjoint_H_reference(stack: AxialKernelStack, r) -> np.ndarray:
    """H^T as the literal sum over rows of Z_p C2(R(k)) W_t; slow, for checking."""
    r = np.asarray(r, dtype=np.float64)
    m_t, m_r = stack.m_t, stack.m_r
    m_p = m_t + 2 * m_r
    g = np.zeros(stack.padded_shape(r.shape[1]))
    for i_h in range(1, m_t + 1):
        row = window_rows(r, IndexRange(i_h, i_h, m_t))
        band = full_convolve(rotate180(stack.kernel(i_h)), row)
        g += zero_pad_rows(band, IndexRange(i_h, i_h + 2 * m_r, m_p))
    return g


def materialize_H(stack: AxialKernelStack, n_t: int) -> SparseOperator:
    """Explicit (m_t n_t) x (m_p n_p) matrix of H; small instances only."""
    m_p, n_p = stack.padded_shape(n_t)
    if m_p * n_p > MATERIALIZE_MAX_PADDED:
        raise ValueError(f"padded size {m_p}x{n_p} exceeds materialization guard")
    return materialize_operator(lambda xp: forward_H(stack, xp), m_p, n_p)


def simulate(model: ForwardModel, x, snr: float = NO_NOISE, seed=0) -> np.ndarray:
    """y = H P x + n with n scaled to the empirical power of H P x."""
    clean = model.apply(x)
    if snr == NO_NOISE:
        return clean
    return clean + awgn(clean, snr, seed)


def gradient_datafit(model: ForwardModel, x, y) -> np.ndarray:
    """Gradient of 0.5 ||H P x - y||^2, i.e. P^T H^T (H P x - y)."""
    y = _check(y, model.shape)
    return model.adjoint(model.apply(x) - y)
