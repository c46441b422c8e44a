"""Additive white Gaussian noise at a prescribed SNR."""

import math

import numpy as np

NO_NOISE = math.inf


def rng_for(seed) -> np.random.Generator:
    # Philox is counter-based: a stream is a pure function of the seed
    return np.random.Generator(np.random.Philox(seed))


def signal_power(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.mean(x * x))


def snr_db(signal, noise) -> float:
    return 10.0 * math.log10(signal_power(signal) / signal_power(noise))


def awgn(x, snr: float, seed) -> np.ndarray:
    """The noise image alone: i.i.d. N(0, power(x) / 10**(snr/10))."""
    x = np.asarray(x, dtype=np.float64)
    if math.isinf(snr) and snr > 0:
        return np.zeros_like(x)
    power = signal_power(x)
    if power == 0.0:
        raise ValueError("cannot scale noise to an SNR for a zero-power signal")
    sd = math.sqrt(power / 10.0 ** (snr / 10.0))
    return sd * rng_for(seed).standard_normal(x.shape)


def add_awgn(x, snr: float, seed) -> np.ndarray:
    """``x`` plus white Gaussian noise; ``snr=NO_NOISE`` returns ``x`` unchanged."""
    x = np.asarray(x, dtype=np.float64)
    if math.isinf(snr) and snr > 0:
        return x.copy()
    return x + awgn(x, snr, seed)
