import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from scipy import stats

from axvar import phantom
from axvar.axial_model import ForwardModel
from axvar.core_ops import valid_convolve
from axvar.noise import NO_NOISE, add_awgn, awgn, snr_db
from axvar.padding import apply_sparse
from axvar.phantom import (
    KernelParams,
    TrfSpec,
    bmode_render,
    gaussian_window,
    lateral_sigma,
    make_kernel,
    make_stack,
    make_trf,
    nrmse,
    psnr,
)

PI_50 = Decimal("3.14159265358979323846264338327950288419716939937510")


def density_decimal(x, mu, sigma):
    getcontext().prec = 40
    x, mu, sigma = Decimal(x), Decimal(mu), Decimal(sigma)
    return float((-(x - mu) ** 2 / (2 * sigma * sigma)).exp() / (sigma * (2 * PI_50).sqrt()))


# -- Gaussian window -----------------------------------------------------------


def test_window_peak():
    for sigma in (0.3, 1.0, 7.5):
        assert gaussian_window(2.0, 2.0, sigma) == pytest.approx(1 / (sigma * math.sqrt(2 * math.pi)), rel=1e-15)


def test_window_symmetric():
    d = np.linspace(0, 5, 11)
    np.testing.assert_array_equal(gaussian_window(3 + d, 3, 1.7), gaussian_window(3 - d, 3, 1.7))


def test_window_against_high_precision():
    assert gaussian_window(1.0, 0.0, 1.0) == pytest.approx(density_decimal(1, 0, 1), rel=1e-15)
    for x, mu, s in [(0.25, 1.5, 0.7), (-3, 2, 4), (10, 10.5, 3)]:
        assert gaussian_window(x, mu, s) == pytest.approx(density_decimal(x, mu, s), rel=1e-14)
        assert gaussian_window(x, mu, s) == pytest.approx(stats.norm.pdf(x, mu, s), rel=1e-13)


def test_window_rejects_bad_sigma():
    with pytest.raises(ValueError):
        gaussian_window(0, 0, 0)


# -- kernels -------------------------------------------------------------------


def test_params_defaults_and_validation():
    p = KernelParams(m_t=100, m_r=9, n_r=50)
    assert p.sigma1 == 3.0 and p.sigma2 == pytest.approx(50 / 3)
    assert p.f0 == 3e6 and p.fs == 20e6
    assert p.center == (10, 51)
    with pytest.raises(ValueError):
        KernelParams(m_t=10, m_r=1, n_r=1, f0=12e6)
    with pytest.raises(ValueError):
        KernelParams(m_t=10, m_r=1, n_r=1, sigma1=-1)
    with pytest.raises(ValueError):
        KernelParams(m_t=0, m_r=1, n_r=1)


def test_lateral_sigma_focus_and_edge():
    p = KernelParams(m_t=100, m_r=3, n_r=6)
    assert lateral_sigma(50, p) == p.sigma1
    assert lateral_sigma(100, p) == pytest.approx(p.sigma2, rel=1e-15)


def test_lateral_sigma_exhaustive_scalar_oracle():
    p = KernelParams(m_t=256, m_r=5, n_r=12)
    got = lateral_sigma(np.arange(1, 257), p)
    for i_h in range(1, 257):
        want = math.sqrt(((2 * i_h / 256) - 1) ** 2 * (p.sigma2 ** 2 - p.sigma1 ** 2) + p.sigma1 ** 2)
        assert got[i_h - 1] == pytest.approx(want, rel=1e-15)


def test_lateral_sigma_symmetry_and_monotone():
    p = KernelParams(m_t=200, m_r=5, n_r=12)
    s = lateral_sigma(np.arange(1, 201), p)
    # s(i) = s(m_t - i) exactly in the formula; row 1 and row m_t differ by one step
    np.testing.assert_allclose(s[:199], s[198::-1], rtol=1e-15)
    gap = lateral_sigma(200, p) - lateral_sigma(1, p)
    t1 = 2 / 200 - 1
    assert gap == pytest.approx(p.sigma2 - math.sqrt(t1 * t1 * (p.sigma2 ** 2 - p.sigma1 ** 2) + p.sigma1 ** 2), rel=1e-12)
    assert np.all(np.diff(s[99:]) >= 0) and np.all(np.diff(s[:100]) <= 0)


def test_focal_kernel_is_narrowest():
    p = KernelParams(m_t=64, m_r=3, n_r=8)
    focal = make_kernel(32, p)
    wide = KernelParams(m_t=64, m_r=3, n_r=8, sigma2=p.sigma1)
    np.testing.assert_array_equal(focal, make_kernel(5, wide))


def test_kernel_pixels_against_formula():
    p = KernelParams(m_t=40, m_r=4, n_r=6)
    for i_h in (1, 13, 20, 40):
        k = make_kernel(i_h, p)
        assert k.shape == (9, 13)
        sx = math.sqrt(((2 * i_h / 40) - 1) ** 2 * (p.sigma2 ** 2 - p.sigma1 ** 2) + p.sigma1 ** 2)
        for i in range(1, 10):
            for j in range(1, 14):
                want = (density_decimal(i, 5, p.sigma1) * density_decimal(j, 7, sx)
                        * math.cos(2 * math.pi * 3e6 / 20e6 * (i - 5)))
                assert k[i - 1, j - 1] == pytest.approx(want, rel=1e-13, abs=1e-300)


def test_kernel_center_row_has_no_modulation():
    p = KernelParams(m_t=40, m_r=4, n_r=6)
    k = make_kernel(7, p)
    lateral = gaussian_window(np.arange(1, 14), 7, float(lateral_sigma(7, p)))
    np.testing.assert_allclose(k[4], gaussian_window(5, 5, p.sigma1) * lateral, rtol=1e-15)


def test_kernel_index_range():
    p = KernelParams(m_t=10, m_r=1, n_r=1)
    with pytest.raises(ValueError):
        make_kernel(0, p)
    with pytest.raises(ValueError):
        make_kernel(11, p)


def test_stack_reference_size():
    m_t, n_t, m_r, n_r = phantom.REFERENCE_SIZES["trf1"]
    assert (m_t, n_t, m_r, n_r) == (2480, 480, 9, 50)
    stack = make_stack(KernelParams(m_t=m_t, m_r=m_r, n_r=n_r))
    assert stack.kernels.shape == (2480, 19, 101)
    assert phantom.REFERENCE_SIZES["trf2"] == (2598, 480, 7, 35)
    assert phantom.REFERENCE_SIZES["trf3"] == (2598, 480, 5, 25)


def test_equal_sigmas_give_invariant_stack(rng):
    p = KernelParams(m_t=30, m_r=2, n_r=4, sigma1=1.5, sigma2=1.5)
    stack = make_stack(p)
    assert all(np.array_equal(stack.kernels[0], k) for k in stack.kernels)
    model = ForwardModel(stack, 20)
    x = rng.standard_normal((30, 20))
    np.testing.assert_array_equal(model.apply(x), valid_convolve(stack.kernels[0], apply_sparse(model.pad, x)))


def test_zero_radii_give_gain_kernels():
    stack = make_stack(KernelParams(m_t=8, m_r=0, n_r=0))
    assert stack.kernels.shape == (8, 1, 1)
    assert np.all(stack.kernels > 0)


# -- TRF -----------------------------------------------------------------------


def test_trf_zero_map():
    assert not make_trf(TrfSpec(20, 30, np.zeros((20, 30)))).any()


@pytest.mark.parametrize("c", [0.3, 1.0, 4.0])
def test_trf_constant_map_sd(c):
    t = make_trf(TrfSpec(400, 300, np.full((400, 300), c), seed=11))
    assert abs(t.std() / c - 1) <= 0.02
    assert abs(t.mean()) <= 0.02 * c


def test_trf_amplitude_scales():
    imap = phantom.synthetic_map(50, 40)
    a = make_trf(TrfSpec(50, 40, imap, seed=2))
    b = make_trf(TrfSpec(50, 40, imap, seed=2, amplitude=255.0))
    np.testing.assert_allclose(b, 255.0 * a, rtol=1e-15)


def test_trf_deterministic_and_seeded():
    imap = phantom.synthetic_map(64, 32)
    a = make_trf(TrfSpec(64, 32, imap, seed=5, upsample=2))
    np.testing.assert_array_equal(a, make_trf(TrfSpec(64, 32, imap, seed=5, upsample=2)))
    assert not np.array_equal(a, make_trf(TrfSpec(64, 32, imap, seed=6, upsample=2)))


def test_trf_upsampled_interpolates_grid():
    t = make_trf(TrfSpec(9, 9, np.ones((9, 9)), seed=1, upsample=4))
    # midpoints between grid nodes are averages of their neighbours
    np.testing.assert_allclose(t[2, 0], 0.5 * (t[0, 0] + t[4, 0]), rtol=1e-12)
    np.testing.assert_allclose(t[0, 2], 0.5 * (t[0, 0] + t[0, 4]), rtol=1e-12)


def test_trf_map_mismatch():
    with pytest.raises(ValueError):
        make_trf(TrfSpec(10, 10, np.ones((10, 9))))


def test_synthetic_map_range():
    m = phantom.synthetic_map(256, 128)
    assert m.shape == (256, 128)
    assert m.min() >= 0 and m.max() == 1.0
    assert len(np.unique(m)) > 5


# -- noise ---------------------------------------------------------------------


def test_awgn_calibration():
    x = make_trf(TrfSpec(400, 300, np.ones((400, 300)), seed=3))
    for seed in range(3):
        n = awgn(x, 40.0, seed)
        assert abs(snr_db(x, n) - 40.0) <= 0.05
    y = add_awgn(x, 40.0, 0)
    np.testing.assert_allclose(y - x, awgn(x, 40.0, 0), rtol=0, atol=1e-12 * np.abs(x).max())


def test_awgn_sentinel_and_seeds(rng):
    x = rng.standard_normal((20, 10))
    np.testing.assert_array_equal(add_awgn(x, NO_NOISE, 0), x)
    a, b = awgn(x, 20.0, 1), awgn(x, 20.0, 2)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, awgn(x, 20.0, 1))


def test_awgn_zero_power():
    with pytest.raises(ValueError):
        add_awgn(np.zeros((4, 4)), 40.0, 0)


# -- metrics -------------------------------------------------------------------


def test_nrmse_examples(rng):
    ref = rng.standard_normal((10, 8))
    assert nrmse(ref, ref) == 0.0
    assert nrmse(ref, 2 * ref) == pytest.approx(1.0, rel=1e-15)
    est = rng.standard_normal((10, 8))
    assert nrmse(ref, est) == pytest.approx(math.sqrt(((est - ref) ** 2).sum() / (ref ** 2).sum()), rel=1e-14)
    with pytest.raises(ValueError):
        nrmse(np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        nrmse(ref, ref[:5])


def test_psnr(rng):
    ref = rng.standard_normal((10, 8))
    est = ref + 0.1 * rng.standard_normal((10, 8))
    want = 20 * math.log10(np.abs(ref).max() / math.sqrt(((est - ref) ** 2).mean()))
    assert psnr(ref, est) == pytest.approx(want, rel=1e-13)
    assert psnr(ref, ref) == phantom.PSNR_CAP_DB


# -- B-mode --------------------------------------------------------------------


def test_bmode_pure_tone_is_flat():
    n = np.arange(512)
    rf = np.cos(2 * np.pi * 0.15 * n)[:, None] * np.ones((1, 4))
    env = phantom.envelope(rf)[64:-64]
    assert np.max(np.abs(env - 1.0)) <= 0.01
    # edge ripple sets the global max, so the flat interior sits a little below 255
    img = bmode_render(rf)[64:-64]
    assert int(img.max()) - int(img.min()) <= 2
    assert img.min() >= 230


def test_bmode_dynamic_range_floor():
    rf = np.zeros((256, 2))
    rf[:, 0] = np.cos(2 * np.pi * 0.2 * np.arange(256))
    rf[:, 1] = 1e-3 * rf[:, 0]  # -60 dB column
    img = bmode_render(rf, 40.0)
    assert img.dtype == np.uint8
    assert np.all(img[32:-32, 1] == 0)
    assert np.all(img[32:-32, 0] >= 230)


def test_bmode_scale_invariant(rng):
    rf = rng.standard_normal((128, 16))
    np.testing.assert_array_equal(bmode_render(rf), bmode_render(37.5 * rf))


def test_bmode_rejects_zero():
    with pytest.raises(ValueError):
        bmode_render(np.zeros((8, 8)))


def test_kernel_preview():
    stack = make_stack(KernelParams(m_t=100, m_r=4, n_r=6))
    strip = phantom.kernel_preview(stack)
    assert strip.dtype == np.uint8
    assert strip.shape == (9, 20 * 13 + 19 * 2)
    assert strip.max() == 255
