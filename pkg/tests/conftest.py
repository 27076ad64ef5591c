import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(rng, h, w):
    return rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w))


def rms(a, b):
    return float(np.sqrt(np.mean(np.abs(np.asarray(a) - np.asarray(b)) ** 2)))


def smooth_field(seed, n, sigma_f=0.02):
    """Complex Gaussian noise low-passed to a Gaussian spectrum of width ``sigma_f`` cycles/px, peak 1."""
    rng = np.random.default_rng(seed)
    f = np.fft.fftfreq(n)
    g = np.exp(-(f[None, :] ** 2 + f[:, None] ** 2) / (2 * sigma_f**2))
    h = np.fft.ifft2(np.fft.fft2(random_field(rng, n, n)) * g)
    return h / np.abs(h).max()
