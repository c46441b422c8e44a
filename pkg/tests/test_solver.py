import csv

import numpy as np
import pytest

from axvar.axial_model import AxialKernelStack, ForwardModel, gradient_datafit, materialize_H
from axvar.padding import PadMode
from axvar.solver import (
    DEFAULT_ITERATIONS,
    DEFAULT_LAMBDA1,
    DEFAULT_LAMBDA2,
    SolverConfig,
    deconvolve,
    elastic_net,
    estimate_lipschitz,
    objective,
    prox_elastic_net,
)
from conftest import rel


def small_model(rng, m_t=16, n_t=12, m_r=2, n_r=3, mode=PadMode.SYMMETRIC):
    k = rng.standard_normal((m_t, 2 * m_r + 1, 2 * n_r + 1))
    return ForwardModel(AxialKernelStack(k), n_t, mode)


def smooth_model(m_t=16, n_t=12, m_r=2, n_r=3):
    # positive blur with a strong center tap
    z = np.exp(-0.5 * (np.arange(-m_r, m_r + 1) / max(m_r, 1)) ** 2)
    x = np.exp(-0.5 * (np.arange(-n_r, n_r + 1) / max(n_r, 1)) ** 2)
    k = np.outer(z, x)
    k[m_r, n_r] += 2.0
    stack = AxialKernelStack(np.stack([k * (1 + 0.3 * i / m_t) for i in range(m_t)]))
    return ForwardModel(stack, n_t)


# -- config --------------------------------------------------------------------


def test_defaults():
    cfg = SolverConfig()
    assert (cfg.lambda1, cfg.lambda2, cfg.max_iters) == (2e-3, 1e-4, 150)
    assert (DEFAULT_LAMBDA1, DEFAULT_LAMBDA2, DEFAULT_ITERATIONS) == (2e-3, 1e-4, 150)
    assert cfg.initial_step == "auto" and cfg.backtrack_shrink == 0.5 and cfg.tol is None


@pytest.mark.parametrize("kw", [
    dict(lambda1=-1), dict(lambda2=-1e-9), dict(max_iters=0),
    dict(backtrack_shrink=1.0), dict(backtrack_shrink=0.0), dict(initial_step=0.0),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


# -- objective -----------------------------------------------------------------


def test_objective_at_zero(rng):
    model = small_model(rng)
    y = rng.standard_normal(model.shape)
    assert objective(model, np.zeros(model.shape), y, SolverConfig()) == pytest.approx(0.5 * np.sum(y ** 2), rel=1e-15)


def test_objective_zero_at_truth(rng):
    model = small_model(rng)
    x = rng.standard_normal(model.shape)
    assert objective(model, x, model.apply(x), SolverConfig(lambda1=0, lambda2=0)) == 0.0


def test_objective_matches_dense(rng):
    model = small_model(rng, 6, 5, 1, 1)
    hp = materialize_H(model.stack, 5).todense() @ model.pad.todense()
    x = rng.standard_normal((6, 5))
    y = rng.standard_normal((6, 5))
    cfg = SolverConfig(lambda1=0.3, lambda2=0.7)
    xv = x.ravel(order="F")
    r = hp @ xv - y.ravel(order="F")
    oracle = 0.5 * r @ r + 0.3 * np.abs(xv).sum() + 0.35 * xv @ xv
    assert objective(model, x, y, cfg) == pytest.approx(oracle, rel=1e-13)
    assert elastic_net(x, 0.3, 0.7) == pytest.approx(0.3 * np.abs(xv).sum() + 0.35 * xv @ xv, rel=1e-14)


def test_objective_shape_mismatch(rng):
    model = small_model(rng)
    with pytest.raises(ValueError):
        objective(model, np.zeros((3, 3)), np.zeros(model.shape), SolverConfig())


# -- prox ----------------------------------------------------------------------


def test_prox_trivial(rng):
    assert not prox_elastic_net(np.zeros(5), 1.0, 0.5, 1.0).any()
    v = rng.standard_normal(7)
    np.testing.assert_array_equal(prox_elastic_net(v, 3.0, 0.0, 0.0), v)


def test_prox_scalar_example_against_grid():
    u = prox_elastic_net(np.array([1.0]), 1.0, 0.5, 1.0)[0]
    assert u == 0.25
    grid = np.linspace(-2, 2, 400001)
    cost = 0.5 * (grid - 1) ** 2 + 0.5 * np.abs(grid) + 0.5 * grid ** 2
    assert abs(grid[np.argmin(cost)] - u) <= 1e-5


def test_prox_grid_minimization_random(rng):
    grid = np.linspace(-6, 6, 120001)
    for _ in range(10):
        v = rng.uniform(-4, 4)
        s, l1, l2 = rng.uniform(0.1, 2, size=3)
        cost = 0.5 * (grid - v) ** 2 + s * (l1 * np.abs(grid) + 0.5 * l2 * grid ** 2)
        assert abs(prox_elastic_net(np.array([v]), s, l1, l2)[0] - grid[np.argmin(cost)]) <= 2e-4


def test_prox_subgradient_inclusion(rng):
    v = rng.standard_normal(2000) * 3
    step, l1, l2 = 0.7, 0.9, 0.4
    u = prox_elastic_net(v, step, l1, l2)
    resid = v - u - step * l2 * u
    nz = u != 0
    assert np.max(np.abs(resid[nz] - step * l1 * np.sign(u[nz]))) <= 1e-10
    assert np.all(np.abs(resid[~nz]) <= step * l1 + 1e-10)


def test_prox_nonexpansive(rng):
    for _ in range(50):
        u, v = rng.standard_normal((2, 30))
        s, l1, l2 = rng.uniform(0.01, 3, size=3)
        d = np.linalg.norm(prox_elastic_net(u, s, l1, l2) - prox_elastic_net(v, s, l1, l2))
        assert d <= np.linalg.norm(u - v) + 1e-14


def test_prox_rejects_bad_step():
    with pytest.raises(ValueError):
        prox_elastic_net(np.ones(2), 0.0, 1.0, 1.0)


# -- solver --------------------------------------------------------------------


def test_lipschitz_estimate_is_lower_bound_near_norm(rng):
    model = small_model(rng, 6, 5, 1, 1)
    hp = materialize_H(model.stack, 5).todense() @ model.pad.todense()
    true = np.linalg.norm(hp, 2) ** 2
    est = estimate_lipschitz(model, 60)
    assert est <= true * (1 + 1e-12)
    assert est >= 0.9 * true


def test_zero_is_fixed_point(rng):
    model = small_model(rng)
    rep = deconvolve(model, np.zeros(model.shape), SolverConfig(lambda1=1e-2, max_iters=7))
    assert not rep.x.any()
    assert rep.iterations_run == 7


def test_least_squares_converges(rng):
    model = small_model(rng)
    y = model.apply(rng.standard_normal(model.shape))
    rep = deconvolve(model, y, SolverConfig(lambda1=0, lambda2=0, max_iters=500))
    assert np.all(np.diff(rep.objective_trace) <= 0)
    assert rep.objective_trace[-1] <= 1e-6 * rep.initial_objective


def test_trace_nonincreasing_with_regularization(rng):
    model = small_model(rng, mode=PadMode.CIRCULAR)
    y = rng.standard_normal(model.shape)
    rep = deconvolve(model, y, SolverConfig(lambda1=0.05, lambda2=0.01, max_iters=120))
    trace = np.array(rep.objective_trace)
    assert len(trace) == rep.iterations_run == len(rep.step_sizes) == 120
    assert trace[0] <= rep.initial_objective
    assert np.all(np.diff(trace) <= 0)
    assert objective(model, rep.x, y, SolverConfig(lambda1=0.05, lambda2=0.01)) == pytest.approx(trace[-1], rel=1e-12)


def test_steps_never_backtrack_below_half_inverse_lipschitz(rng):
    model = small_model(rng)
    y = rng.standard_normal(model.shape)
    calls = []

    class Recording:
        shape = model.shape

        def apply(self, x):
            return model.apply(x)

        def adjoint(self, r):
            calls.append(r)
            return model.adjoint(r)

    rep = deconvolve(Recording(), y, SolverConfig(max_iters=30))
    # any step <= 1/L passes the bound, so halving never goes below 1/(2L)
    lip = estimate_lipschitz(model, 100)
    assert min(rep.step_sizes) >= 0.5 / lip * 0.99
    assert len(calls) >= 30


def test_strong_convexity_unique_minimizer(rng):
    model = smooth_model(12, 10, 1, 2)
    y = model.apply(rng.standard_normal(model.shape))
    cfg = SolverConfig(lambda1=1e-2, lambda2=5e-2, max_iters=2000, tol=1e-15)
    a = deconvolve(model, y, cfg).x
    b = deconvolve(model, y, cfg, x0=10 * rng.standard_normal(model.shape)).x
    assert rel(a, b) <= 1e-6


def test_minimizer_satisfies_optimality(rng):
    model = smooth_model(12, 10, 1, 2)
    y = model.apply(rng.standard_normal(model.shape))
    l1, l2 = 1e-2, 5e-2
    x = deconvolve(model, y, SolverConfig(lambda1=l1, lambda2=l2, max_iters=3000, tol=1e-16)).x
    g = gradient_datafit(model, x, y) + l2 * x
    nz = x != 0
    assert np.max(np.abs(g[nz] + l1 * np.sign(x[nz]))) <= 1e-6
    assert np.all(np.abs(g[~nz]) <= l1 + 1e-6)


def test_tolerance_stops_early(rng):
    model = small_model(rng)
    y = rng.standard_normal(model.shape)
    tol = 1e-4
    rep = deconvolve(model, y, SolverConfig(max_iters=1000, tol=tol))
    t = rep.objective_trace
    assert rep.iterations_run < 1000
    assert abs(t[-2] - t[-1]) <= tol * abs(t[-2])
    # no earlier iteration met the rule
    assert all(abs(a - b) > tol * abs(a) for a, b in zip([rep.initial_objective] + t[:-2], t[:-1]))


def test_fixed_initial_step(rng):
    model = small_model(rng)
    y = rng.standard_normal(model.shape)
    rep = deconvolve(model, y, SolverConfig(initial_step=1e6, max_iters=5))
    assert rep.step_sizes[0] < 1e6


def test_non_finite_aborts(rng):
    model = small_model(rng)
    y = rng.standard_normal(model.shape)
    y[0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        deconvolve(model, y, SolverConfig(max_iters=3))


def test_shape_errors(rng):
    model = small_model(rng)
    with pytest.raises(ValueError):
        deconvolve(model, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        deconvolve(model, np.zeros(model.shape), x0=np.zeros((2, 2)))


def test_trace_csv(rng, tmp_path):
    model = small_model(rng)
    rep = deconvolve(model, rng.standard_normal(model.shape), SolverConfig(max_iters=4))
    path = tmp_path / "trace.csv"
    rep.write_trace_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["iter", "objective", "step"]
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 3, 4]
    assert [float(r[1]) for r in rows[1:]] == rep.objective_trace


def test_deterministic(rng):
    model = small_model(rng)
    y = rng.standard_normal(model.shape)
    a = deconvolve(model, y, SolverConfig(max_iters=20)).x
    b = deconvolve(model, y, SolverConfig(max_iters=20)).x
    np.testing.assert_array_equal(a, b)
