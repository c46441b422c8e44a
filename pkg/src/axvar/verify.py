"""Randomized identity suite for the operator library.

Each check draws small random instances, evaluates an identity in two
independent ways and records the worst relative discrepancy. ``run_suite``
returns one ``CheckResult`` per identity; the suite passes when all do.
"""

import math
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import core_ops as co
from .axial_model import (
    AxialKernelStack,
    ForwardModel,
    adjoint_H,
    forward_H,
    gradient_datafit,
    materialize_H,
)
from .padding import (
    PadMode,
    apply_sparse,
    apply_sparse_transpose,
    kronecker,
    make_pad_1d,
    make_pad_2d,
)

ADJOINT_TOL = 1e-11
DENSE_TOL = 1e-13
IDENTITY_TOL = 1e-11
GRADIENT_TOL = 1e-5


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tol: float
    instances: int
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<40s} max_rel_err={self.max_rel_err:.3e} "
                f"tol={self.tol:.0e} n={self.instances} ({self.seconds:.2f}s)")


def rel_err(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.linalg.norm(b), np.linalg.norm(a))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def max_abs_rel(a, b) -> float:
    """Largest entrywise gap relative to the largest entry."""
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(a - b)) / scale)


def random_stack(rng, m_t, m_r, n_r) -> AxialKernelStack:
    return AxialKernelStack(rng.standard_normal((m_t, 2 * m_r + 1, 2 * n_r + 1)))


def operator_norm(model, iters=30, seed=0) -> float:
    v = np.random.default_rng(seed).standard_normal(model.shape)
    lam = 0.0
    for _ in range(iters):
        v /= np.linalg.norm(v)
        w = model.adjoint(model.apply(v))
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 0.0
        v = w
    return math.sqrt(lam)


def adjoint_gap(model, u, v, norm=None) -> float:
    """|<HPu, v> - <u, P^T H^T v>| / (|u| |v| |HP|)."""
    if norm is None:
        norm = operator_norm(model)
    lhs = float(np.vdot(model.apply(u), v))
    rhs = float(np.vdot(u, model.adjoint(v)))
    den = np.linalg.norm(u) * np.linalg.norm(v) * norm
    return abs(lhs - rhs) / den if den > 0 else abs(lhs - rhs)


def _random_instance(rng, max_mn, max_mr, max_nr):
    m_r = int(rng.integers(0, max_mr + 1))
    n_r = int(rng.integers(0, max_nr + 1))
    m_t = int(rng.integers(max(1, m_r), max_mn + 1))
    n_t = int(rng.integers(max(1, n_r), max_mn + 1))
    return m_t, n_t, m_r, n_r


# -- individual checks ----------------------------------------------------------


def check_model_adjoint(rng, n=200, max_mn=64, max_mr=4, max_nr=6) -> float:
    worst = 0.0
    modes = list(PadMode)
    for k in range(n):
        m_t, n_t, m_r, n_r = _random_instance(rng, max_mn, max_mr, max_nr)
        model = ForwardModel(random_stack(rng, m_t, m_r, n_r), n_t, modes[k % len(modes)])
        u = rng.standard_normal(model.shape)
        v = rng.standard_normal(model.shape)
        worst = max(worst, adjoint_gap(model, u, v, operator_norm(model, iters=15, seed=k)))
    return worst


def check_H_adjoint(rng, n=50) -> float:
    worst = 0.0
    for _ in range(n):
        m_t, n_t, m_r, n_r = _random_instance(rng, 64, 4, 6)
        stack = random_stack(rng, m_t, m_r, n_r)
        u = rng.standard_normal(stack.padded_shape(n_t))
        v = rng.standard_normal((m_t, n_t))
        lhs = float(np.vdot(forward_H(stack, u), v))
        rhs = float(np.vdot(u, adjoint_H(stack, v)))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v) * np.abs(stack.kernels).sum(axis=(1, 2)).max()))
    return worst


def check_window_zero_pad_adjoint(rng, n=50) -> float:
    worst = 0.0
    for _ in range(n):
        total = int(rng.integers(1, 20))
        cols = int(rng.integers(1, 10))
        lo = int(rng.integers(1, total + 1))
        hi = int(rng.integers(lo, total + 1))
        r = co.IndexRange(lo, hi, total)
        u = rng.standard_normal((r.size, cols))
        v = rng.standard_normal((total, cols))
        lhs = float(np.vdot(co.zero_pad_rows(u, r), v))
        rhs = float(np.vdot(u, co.window_rows(v, r)))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v)))

        tc = int(rng.integers(1, 12))
        clo = int(rng.integers(1, tc + 1))
        chi = int(rng.integers(clo, tc + 1))
        rc = co.IndexRange(clo, chi, tc)
        u2 = rng.standard_normal((r.size, rc.size))
        v2 = rng.standard_normal((total, tc))
        lhs = float(np.vdot(co.zero_pad_general(u2, r, rc), v2))
        rhs = float(np.vdot(u2, co.window_general(v2, r, rc)))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(u2) * np.linalg.norm(v2)))
    return worst


def check_valid_adjoint_dense(rng, n=20) -> float:
    """Materialized valid convolution transposed vs materialized full
    correlation; 0.0 when they agree exactly."""
    worst = 0.0
    for _ in range(n):
        m_k, n_k = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        m_a, n_a = int(rng.integers(m_k, 9)), int(rng.integers(n_k, 9))
        k = rng.standard_normal((m_k, n_k))
        a_mat = co.materialize_operator(lambda a: co.valid_convolve(k, a), m_a, n_a).todense()
        m_m, n_m = m_a - m_k + 1, n_a - n_k + 1
        f_mat = co.materialize_operator(lambda b: co.full_convolve(co.rotate180(k), b), m_m, n_m).todense()
        worst = max(worst, float(np.max(np.abs(a_mat.T - f_mat))))
    return worst


def check_shift_cumulation(rng, n=50) -> float:
    worst = 0.0
    for _ in range(n):
        m, n_ = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        kb = rng.standard_normal((m, n_))
        ab = rng.standard_normal((m, n_))
        p1, p2 = (int(t) for t in rng.integers(1, m + 1, size=2))
        q1, q2 = (int(t) for t in rng.integers(1, n_ + 1, size=2))
        lhs = co.circular_convolve(co.circular_shift(kb, p1, q1), co.circular_shift(ab, p2, q2))
        rhs = co.circular_shift(co.circular_convolve(kb, ab), co.circ_add(p1, p2, m), co.circ_add(q1, q2, n_))
        worst = max(worst, rel_err(lhs, rhs))
    return worst


def check_circular_adjoint(rng, n=50) -> float:
    worst = 0.0
    for _ in range(n):
        m, n_ = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        kb = rng.standard_normal((m, n_))
        u = rng.standard_normal((m, n_))
        v = rng.standard_normal((m, n_))
        lhs = float(np.vdot(co.circular_convolve(kb, u), v))
        adj_v = co.circular_shift(co.circular_convolve(co.rotate180(kb), v), min(2, m), min(2, n_))
        rhs = float(np.vdot(u, adj_v))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v) * np.abs(kb).sum()))
    return worst


def check_conjugate_symmetry(rng, n=50) -> float:
    worst = 0.0
    for _ in range(n):
        m, n_ = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        kb = rng.standard_normal((m, n_))
        lhs = np.fft.fft2(co.circular_shift(co.rotate180(kb), min(2, m), min(2, n_)))
        rhs = np.conj(np.fft.fft2(kb))
        worst = max(worst, rel_err(lhs, rhs))
    return worst


def _embed_ranges(m_a, n_a, m_k, n_k):
    m_n, n_n = m_a + m_k - 1, n_a + n_k - 1
    return m_n, n_n


def valid_via_circular(k, a):
    """W_{k,a} C(Z_{1,k} k) Z_{1,a} a on the (m_a+m_k-1) x (n_a+n_k-1) torus."""
    m_k, n_k = k.shape
    m_a, n_a = a.shape
    m_n, n_n = _embed_ranges(m_a, n_a, m_k, n_k)
    kbar = co.zero_pad_general(k, co.IndexRange(1, m_k, m_n), co.IndexRange(1, n_k, n_n))
    abar = co.zero_pad_general(a, co.IndexRange(1, m_a, m_n), co.IndexRange(1, n_a, n_n))
    c = co.circular_convolve(kbar, abar)
    return co.window_general(c, co.IndexRange(m_k, m_a, m_n), co.IndexRange(n_k, n_a, n_n))


def full_via_circular(k, b):
    """W_{1,a} C(Z_{1,k} k) Z_{1,M} b, where b has the valid-output size."""
    m_k, n_k = k.shape
    m_m, n_m = b.shape
    m_a, n_a = m_m + m_k - 1, n_m + n_k - 1
    m_n, n_n = _embed_ranges(m_a, n_a, m_k, n_k)
    kbar = co.zero_pad_general(k, co.IndexRange(1, m_k, m_n), co.IndexRange(1, n_k, n_n))
    bbar = co.zero_pad_general(b, co.IndexRange(1, m_m, m_n), co.IndexRange(1, n_m, n_n))
    c = co.circular_convolve(kbar, bbar)
    return co.window_general(c, co.IndexRange(1, m_a, m_n), co.IndexRange(1, n_a, n_n))


def check_valid_composition(rng, n=50) -> float:
    worst = 0.0
    for _ in range(n):
        m_k, n_k = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        m_a, n_a = int(rng.integers(m_k, 9)), int(rng.integers(n_k, 9))
        k = rng.standard_normal((m_k, n_k))
        a = rng.standard_normal((m_a, n_a))
        worst = max(worst, rel_err(valid_via_circular(k, a), co.valid_convolve(k, a)))
    return worst


def check_full_composition(rng, n=50) -> float:
    worst = 0.0
    for _ in range(n):
        m_k, n_k = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        m_m, n_m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        k = rng.standard_normal((m_k, n_k))
        b = rng.standard_normal((m_m, n_m))
        worst = max(worst, rel_err(full_via_circular(k, b), co.full_convolve(k, b)))
    return worst


def separable_pad(x, m_r, n_r, mode):
    """Pad every column, then every row, with dense 1D padding matrices."""
    m_t, n_t = x.shape
    pm = make_pad_1d(m_t, m_r, mode).todense()
    pn = make_pad_1d(n_t, n_r, mode).todense()
    return pn.dot(pm.dot(x).T).T


def check_kronecker_padding(rng, n=40) -> float:
    """Sum of absolute entry differences between the Kronecker-built P and
    the materialized separable procedure; 0.0 means exact equality."""
    worst = 0.0
    modes = list(PadMode)
    for k in range(n):
        m_t, n_t, m_r, n_r = _random_instance(rng, 12, 4, 4)
        mode = modes[k % len(modes)]
        kron = make_pad_2d(m_t, n_t, m_r, n_r, mode).todense()
        sep = co.materialize_operator(lambda x: separable_pad(x, m_r, n_r, mode), m_t, n_t).todense()
        worst = max(worst, float(np.abs(kron - sep).sum()))
        # column factor I kron P1d(m_t, m_r)
        factor = kronecker(make_pad_1d(n_t, 0, mode), make_pad_1d(m_t, m_r, mode))
        eye_kron = np.kron(np.eye(n_t), make_pad_1d(m_t, m_r, mode).todense())
        worst = max(worst, float(np.abs(factor.todense() - eye_kron).sum()))
    return worst


def check_dense_H(rng, n=30) -> float:
    worst = 0.0
    for _ in range(n):
        m_r, n_r = int(rng.integers(0, 3)), int(rng.integers(0, 3))
        m_t, n_t = int(rng.integers(max(1, m_r), 9)), int(rng.integers(max(1, n_r), 9))
        stack = random_stack(rng, m_t, m_r, n_r)
        h = materialize_H(stack, n_t).todense()
        xp = rng.standard_normal(stack.padded_shape(n_t))
        r = rng.standard_normal((m_t, n_t))
        worst = max(worst, max_abs_rel(co.vec(forward_H(stack, xp)), h @ co.vec(xp)))
        worst = max(worst, max_abs_rel(co.vec(adjoint_H(stack, r)), h.T @ co.vec(r)))
    return worst


def check_dense_P(rng, n=40) -> float:
    """Materialized matrix-free P and P^T against the stored triples; 0.0
    means every entry matches exactly."""
    worst = 0.0
    modes = list(PadMode)
    for k in range(n):
        m_t, n_t, m_r, n_r = _random_instance(rng, 12, 4, 4)
        p = make_pad_2d(m_t, n_t, m_r, n_r, modes[k % len(modes)])
        dense = p.todense()
        fwd = co.materialize_operator(lambda x: apply_sparse(p, x), m_t, n_t).todense()
        adj = co.materialize_operator(lambda y: apply_sparse_transpose(p, y), *p.out_shape).todense()
        worst = max(worst, float(np.abs(fwd - dense).sum()), float(np.abs(adj - dense.T).sum()))
    return worst


def check_gradient_fd(rng, n_coords=20, h=1e-6) -> float:
    stack = random_stack(rng, 16, 2, 3)
    model = ForwardModel(stack, 12, PadMode.SYMMETRIC)
    x = rng.standard_normal(model.shape)
    y = rng.standard_normal(model.shape)
    g = gradient_datafit(model, x, y)

    def f(z):
        r = model.apply(z) - y
        return 0.5 * float(np.vdot(r, r))

    worst = 0.0
    idx = rng.choice(x.size, size=n_coords, replace=False)
    for c in idx:
        i, j = np.unravel_index(c, x.shape)
        e = np.zeros_like(x)
        e[i, j] = h
        fd = (f(x + e) - f(x - e)) / (2 * h)
        worst = max(worst, abs(fd - g[i, j]) / max(abs(g[i, j]), 1e-12))
    return worst


@dataclass
class Check:
    name: str
    fn: Callable
    tol: float
    instances: int


def default_checks(scale: int = 1) -> List[Check]:
    return [
        Check("HP adjoint dot-product (all pad modes)", lambda r: check_model_adjoint(r, 200 * scale), ADJOINT_TOL, 200 * scale),
        Check("H adjoint dot-product", lambda r: check_H_adjoint(r, 50 * scale), ADJOINT_TOL, 50 * scale),
        Check("window/zero-pad adjoint", lambda r: check_window_zero_pad_adjoint(r, 50 * scale), 1e-12, 50 * scale),
        Check("valid adjoint = full correlation (dense)", lambda r: check_valid_adjoint_dense(r, 20 * scale), 0.0, 20 * scale),
        Check("Kronecker padding = separable (exact)", lambda r: check_kronecker_padding(r, 40 * scale), 0.0, 40 * scale),
        Check("H, H^T vs materialized matrix", lambda r: check_dense_H(r, 30 * scale), DENSE_TOL, 30 * scale),
        Check("P, P^T vs materialized matrix", lambda r: check_dense_P(r, 40 * scale), 0.0, 40 * scale),
        Check("shift cumulation", lambda r: check_shift_cumulation(r, 50 * scale), IDENTITY_TOL, 50 * scale),
        Check("circular adjoint = shifted correlation", lambda r: check_circular_adjoint(r, 50 * scale), IDENTITY_TOL, 50 * scale),
        Check("DFT conjugate symmetry", lambda r: check_conjugate_symmetry(r, 50 * scale), IDENTITY_TOL, 50 * scale),
        Check("valid conv as windowed circular", lambda r: check_valid_composition(r, 50 * scale), IDENTITY_TOL, 50 * scale),
        Check("full conv as windowed circular", lambda r: check_full_composition(r, 50 * scale), IDENTITY_TOL, 50 * scale),
        Check("data-fit gradient vs finite differences", lambda r: check_gradient_fd(r), GRADIENT_TOL, 20),
    ]


def run_suite(seed: int = 0, scale: int = 1, checks=None) -> List[CheckResult]:
    results = []
    for i, chk in enumerate(checks or default_checks(scale)):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        err = chk.fn(rng)
        results.append(CheckResult(chk.name, err, chk.tol, chk.instances, time.perf_counter() - t0))
    return results
