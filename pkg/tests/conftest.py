import numpy as np
import pytest

from mdsigma.dsp import InterpolatorSpec


@pytest.fixture(scope="session")
def interp():
    """Default FIR realization used across dsp tests."""
    return InterpolatorSpec()


@pytest.fixture()
def rng():
    return np.random.default_rng(0xC0FFEE)


def bandlimited_noise(rng, n, cutoff=0.9 * np.pi, var=1.0):
    """Gaussian noise band-limited to |w| <= cutoff, unit variance by default.

    Useful as a probe for FIR chains whose approximation error concentrates
    at the band edge.
    """
    x = rng.standard_normal(n)
    spec = np.fft.rfft(x)
    w = np.linspace(0.0, np.pi, spec.shape[0])
    spec[w > cutoff] = 0.0
    y = np.fft.irfft(spec, n=n)
    return y * np.sqrt(var / y.var())
