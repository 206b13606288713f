"""Tests for the log-chi-square noise channel: density, characteristic
function, complex gamma, and sampling."""

import numpy as np
import pytest
import scipy.special as sps
import scipy.stats as sst

from voldeconv import complex_gamma, noise_density, phi_k, phi_k_abs, sample_noise
from voldeconv.errors import RangeError
from voldeconv.noise_model import T_MAX


def _noise_cdf(x):
    # P(log Z^2 <= x) = P(|Z| <= e^{x/2}) for standard normal Z
    return sps.erf(np.exp(np.asarray(x) / 2.0) / np.sqrt(2.0))


def test_density_pointwise_values():
    # k(x) = (2*pi)^{-1/2} e^{x/2} e^{-e^x/2}
    x = np.array([-2.0, 0.0, 1.0, 3.0])
    expected = np.exp(x / 2.0) * np.exp(-np.exp(x) / 2.0) / np.sqrt(2.0 * np.pi)
    np.testing.assert_allclose(noise_density(x), expected, rtol=1e-14)


def test_density_far_left_tail():
    # left tail ~ e^{x/2}/sqrt(2 pi); double-exponential cutoff on the right
    assert noise_density(-30.0) == pytest.approx(
        np.exp(-15.0) / np.sqrt(2.0 * np.pi), rel=1e-10
    )
    assert noise_density(10.0) < 1e-4000 or noise_density(10.0) < 1e-300


def test_density_mass_and_mean():
    from scipy.integrate import quad

    mass, _ = quad(lambda u: float(noise_density(u)), -60.0, 8.0, limit=200)
    assert abs(mass - 1.0) < 1e-9
    mean, _ = quad(lambda u: u * float(noise_density(u)), -60.0, 8.0, limit=200)
    # E log Z^2 = digamma(1/2) + log 2, the skew center of the channel
    assert abs(mean - (sps.digamma(0.5) + np.log(2.0))) < 1e-9


def test_characteristic_function_modulus_identity():
    # |phi_k(t)|^2 cosh(pi t) = 1 exactly
    t = np.linspace(-30.0, 30.0, 6001)
    resid = np.abs(np.abs(phi_k(t)) ** 2 * np.cosh(np.pi * t) - 1.0)
    assert np.max(resid) < 1e-10


def test_phi_k_abs_matches_phi_k():
    t = np.linspace(-25.0, 25.0, 501)
    np.testing.assert_allclose(phi_k_abs(t), np.abs(phi_k(t)), rtol=1e-11, atol=1e-300)


def test_phi_k_matches_direct_quadrature():
    # Simpson rule on [-50, 6]; the left tail beyond -50 contributes < 2e-11
    x = np.linspace(-50.0, 6.0, 40001)
    kx = noise_density(x)
    step = x[1] - x[0]
    for t in np.linspace(-10.0, 10.0, 9):
        integrand = kx * np.exp(1j * t * x)
        val = (step / 3.0) * (
            integrand[0]
            + integrand[-1]
            + 4.0 * integrand[1:-1:2].sum()
            + 2.0 * integrand[2:-1:2].sum()
        )
        assert abs(val - phi_k(t)) < 1e-8


def test_phi_k_asymptotic_decay_ratio():
    r = abs(phi_k(10.0)) / (np.sqrt(2.0) * np.exp(-np.pi * 10.0 / 2.0))
    assert abs(r - 1.0) < 1e-3


def test_phi_k_at_zero_is_one():
    assert phi_k(0.0) == pytest.approx(1.0, abs=1e-13)


def test_phi_k_conjugate_symmetry():
    t = np.linspace(0.1, 20.0, 57)
    np.testing.assert_allclose(phi_k(-t), np.conj(phi_k(t)), rtol=1e-12)


def test_phi_k_range_guard():
    val = phi_k(T_MAX)  # boundary is allowed
    assert np.isfinite(val.real) and np.isfinite(val.imag)
    with pytest.raises(RangeError):
        phi_k(T_MAX * 1.01)
    with pytest.raises(RangeError):
        phi_k(-T_MAX * 1.01)


def test_complex_gamma_known_values():
    assert complex_gamma(0.5 + 0j) == pytest.approx(np.sqrt(np.pi), rel=1e-13)
    assert complex_gamma(1.0 + 0j) == pytest.approx(1.0, rel=1e-13)
    assert complex_gamma(4.0 + 0j) == pytest.approx(6.0, rel=1e-13)


def test_complex_gamma_against_scipy_on_strip():
    # the strip Re z = 1/2 is the one the channel lives on; measured max
    # relative error 4.1e-13 out to |Im z| = 190
    t = np.linspace(-190.0, 190.0, 4001)
    z = 0.5 + 1j * t
    ref = np.exp(sps.loggamma(z))
    rel = np.max(np.abs(complex_gamma(z) - ref) / np.abs(ref))
    assert rel < 5e-12


def test_complex_gamma_reflection_region():
    z = np.array([-0.5 + 3.0j, -2.3 - 1.7j, 0.1 + 0.4j])
    ref = np.exp(sps.loggamma(z))
    np.testing.assert_allclose(complex_gamma(z), ref, rtol=1e-11)


def test_sample_noise_distribution():
    x = sample_noise(100_000, seed=11)
    stat = sst.kstest(x, _noise_cdf).statistic
    assert stat < 0.006  # measured 0.0027 at this seed


def test_sample_noise_deterministic():
    a = sample_noise(1000, seed=5)
    b = sample_noise(1000, seed=5)
    c = sample_noise(1000, seed=6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
