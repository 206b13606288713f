"""Tests for the deconvolving kernel: quadrature evaluation, lookup tables,
operator norms, and tail envelopes."""

import numpy as np
import pytest

from voldeconv import (
    build_table,
    builtin_kernel,
    eval_table,
    eval_w,
    noise_density,
    sup_bound,
    tail_envelope,
    vh_multivariate,
    vh_quadrature,
)
from voldeconv.errors import ConfigError, DomainError, NumericalFailure, RangeError
from voldeconv.smoothing_kernel import KernelSpec

SPEC = builtin_kernel("poly3")

# frozen 512-node quadrature values
SUP_H10 = 0.18356029421689227
SUP_H05 = 0.3067239005428777
# gamma_0(h) * h^{-4} * exp(-pi/(2h)) over h = 1, 0.7, 0.5, 0.4
RATE_RATIOS = (0.03815843619662878, 0.09869199788000832, 0.21207586508168522, 0.3245863758247269)


def test_quadrature_returns_real():
    out = vh_quadrature(SPEC, 1.0, np.array([-2.0, 0.0, 2.0]))
    assert out.dtype == np.float64
    assert out.shape == (3,)
    assert isinstance(vh_quadrature(SPEC, 1.0, 0.5), float)


def test_quadrature_rejects_complex_residual():
    # a window without even symmetry makes the inversion integral complex;
    # the imaginary-part check must refuse to return its real part
    skewed = KernelSpec(
        name="skewed",
        phi_w=lambda s: (1.0 - s**2) ** 3 * (1.0 + 0.5 * np.sin(3.0 * s)) * (np.abs(s) <= 1.0),
        rho=3.0,
        edge_coeff=8.0,
    )
    with pytest.raises(NumericalFailure) as exc:
        vh_quadrature(skewed, 1.0, np.linspace(-5.0, 5.0, 11))
    assert exc.value.residual > 1e-9


def test_bandwidth_guards():
    with pytest.raises(RangeError):
        vh_quadrature(SPEC, 0.0, 0.0)
    with pytest.raises(RangeError):
        vh_quadrature(SPEC, -1.0, 0.0)
    with pytest.raises(RangeError):
        vh_quadrature(SPEC, np.pi / 601.0, 0.0)  # below the resolvable floor
    assert np.isfinite(vh_quadrature(SPEC, np.pi / 599.0, 0.0))


def test_smoothing_identity_pins_orientation():
    # integrating the deconvolver against the noise density must reproduce
    # the smoothing kernel; the mirrored kernel fails this by ~5e-2
    z = np.linspace(-80.0, 8.0, 8801)
    kz = noise_density(z)
    h = 1.0
    for y in (-3.0, -1.1, 0.0, 0.7, 2.3):
        lhs = np.trapezoid(vh_quadrature(SPEC, h, (y - z) / h) * kz, z)
        assert abs(lhs - float(eval_w(SPEC, y / h))) < 1e-6
    y = 1.1
    mirrored = np.trapezoid(vh_quadrature(SPEC, h, (z - y) / h) * kz, z)
    assert abs(mirrored - float(eval_w(SPEC, y / h))) > 1e-3


def test_unit_mass():
    x = np.arange(-250.0, 250.0 + 1e-9, 0.02)
    for h in (0.6, 1.0):
        v = vh_quadrature(SPEC, h, x)
        assert abs(np.trapezoid(v, x) - 1.0) < 1e-6


def test_asymmetry_is_real():
    # the noise channel is skewed, so the deconvolver cannot be even; the
    # odd part is a large fraction of the sup bound
    v_pos = vh_quadrature(SPEC, 1.0, 2.3)
    v_neg = vh_quadrature(SPEC, 1.0, -2.3)
    assert abs(v_pos - v_neg) > 0.3 * sup_bound(SPEC, 1.0)


def test_sup_bound_frozen_values():
    assert sup_bound(SPEC, 1.0) == pytest.approx(SUP_H10, rel=1e-12)
    assert sup_bound(SPEC, 0.5) == pytest.approx(SUP_H05, rel=1e-12)


def test_sup_bound_node_doubling():
    from numpy.polynomial.legendre import leggauss

    from voldeconv import phi_k

    nodes, weights = leggauss(1024)
    for h in (1.0, 0.5):
        doubled = float(weights @ np.abs(SPEC.phi_w(nodes) / phi_k(nodes / h))) / (2.0 * np.pi)
        assert abs(sup_bound(SPEC, h) - doubled) < 1e-8


def test_sup_bound_dominates_kernel():
    rng = np.random.default_rng(3)
    for h in (1.0, 0.7, 0.5, 0.4):
        g0 = sup_bound(SPEC, h)
        dense = vh_quadrature(SPEC, h, np.linspace(-30.0, 30.0, 1501))
        assert np.max(np.abs(dense)) <= g0 * (1.0 + 1e-12)
    g0 = sup_bound(SPEC, 0.8)
    pts = rng.uniform(-50.0, 50.0, 1000)
    assert np.max(np.abs(vh_quadrature(SPEC, 0.8, pts))) <= g0 * (1.0 + 1e-12)


def test_sup_bound_growth_rate():
    # gamma_0(h) = O(h^{1+rho} e^{pi/(2h)}): normalized values stay bounded
    ratios = [sup_bound(SPEC, h) * h**-4.0 * np.exp(-np.pi / (2.0 * h)) for h in (1.0, 0.7, 0.5, 0.4)]
    np.testing.assert_allclose(ratios, RATE_RATIOS, rtol=1e-9)
    assert max(ratios) < 0.4


def test_lipschitz_bound():
    rng = np.random.default_rng(1)
    for h in (0.5, 1.0):
        g0 = sup_bound(SPEC, h)
        x = rng.uniform(-20.0, 20.0, 200)
        u = rng.uniform(-2.0, 2.0, 200)
        lhs = np.abs(vh_quadrature(SPEC, h, x + u) - vh_quadrature(SPEC, h, x))
        assert np.all(lhs <= g0 * np.abs(u) * (1.0 + 1e-9))


def test_tail_envelope_limit_and_domain():
    with pytest.raises(DomainError):
        tail_envelope(1.0, 0.0)
    with pytest.raises(DomainError):
        tail_envelope(1.0, np.array([1.0, 0.0]))
    # h = 1: the far-tail limit is e^{pi/2}
    assert float(tail_envelope(1.0, 1e9)) == pytest.approx(np.exp(np.pi / 2.0), abs=1e-6)
    assert float(tail_envelope(1.0, -1e9)) == pytest.approx(np.exp(np.pi / 2.0), abs=1e-6)


def test_tail_envelope_fitted_constant():
    # a single constant D covers |v_h| on the spot-check set; measured
    # max ratio 3.7e-3, frozen with wide margin
    D = 0.01
    for h in (0.5, 1.0):
        for ax in (5.0, 10.0, 20.0):
            for x in (ax, -ax):
                assert abs(float(vh_quadrature(SPEC, h, x))) <= D * float(tail_envelope(h, x))


def test_build_table_matches_quadrature():
    tbl = build_table(SPEC, 0.8, -40.0, 40.0, 4097)
    assert tbl.bandwidth == 0.8
    assert tbl.kernel.name == "poly3"
    idx = np.linspace(0, 4096, 37, dtype=int)
    direct = vh_quadrature(SPEC, 0.8, tbl.grid_x[idx])
    assert np.max(np.abs(tbl.values[idx] - direct)) < 1e-9 * tbl.sup_bound


def test_table_interpolation_error():
    tbl = build_table(SPEC, 0.8, -40.0, 40.0, 4097)
    mid = (tbl.grid_x[:-1] + tbl.grid_x[1:]) / 2.0
    err = np.max(np.abs(eval_table(tbl, mid) - vh_quadrature(SPEC, 0.8, mid)))
    assert err < 1e-4 * tbl.sup_bound


def test_table_slow_path_outside_range():
    tbl = build_table(SPEC, 0.8, -10.0, 10.0, 1001)
    outside = np.array([-15.0, 12.5, 40.0])
    np.testing.assert_array_equal(eval_table(tbl, outside), vh_quadrature(SPEC, 0.8, outside))


def test_build_table_config_errors():
    with pytest.raises(ConfigError):
        build_table(SPEC, 0.8, -1.0, -1.0, 100)
    with pytest.raises(ConfigError):
        build_table(SPEC, 0.8, -1.0, 1.0, 1)


def test_multivariate_reduces_to_univariate():
    tbl = build_table(SPEC, 0.9, -20.0, 20.0, 2001)
    for x in (-4.2, 0.0, 3.3):
        assert vh_multivariate([tbl], np.array([x])) == float(eval_table(tbl, x))


def test_multivariate_product_structure():
    tbl = build_table(SPEC, 0.9, -20.0, 20.0, 2001)
    rng = np.random.default_rng(8)
    pts = rng.uniform(-15.0, 15.0, (50, 3))
    for q in pts:
        prod = np.prod([float(eval_table(tbl, qi)) for qi in q])
        assert abs(vh_multivariate([tbl, tbl, tbl], q) - prod) < 1e-12


def test_multivariate_bound():
    tbl = build_table(SPEC, 0.8, -40.0, 40.0, 4097)
    g0 = sup_bound(SPEC, 0.8)
    rng = np.random.default_rng(9)
    pts = rng.uniform(-35.0, 35.0, (1000, 2))
    vals = np.array([vh_multivariate([tbl, tbl], q) for q in pts])
    assert np.max(np.abs(vals)) <= g0**2 * (1.0 + 1e-9)


def test_multivariate_config_errors():
    tbl_a = build_table(SPEC, 0.8, -10.0, 10.0, 101)
    tbl_b = build_table(SPEC, 0.9, -10.0, 10.0, 101)
    other = KernelSpec(name="poly2", phi_w=lambda s: (1.0 - s**2) ** 2 * (np.abs(s) <= 1.0), rho=2.0, edge_coeff=4.0)
    tbl_c = build_table(other, 0.8, -10.0, 10.0, 101)
    with pytest.raises(ConfigError):
        vh_multivariate([], np.array([]))
    with pytest.raises(ConfigError):
        vh_multivariate([tbl_a, tbl_b], np.array([0.0, 0.0]))
    with pytest.raises(ConfigError):
        vh_multivariate([tbl_a, tbl_c], np.array([0.0, 0.0]))
    with pytest.raises(ConfigError):
        vh_multivariate([tbl_a, tbl_a], np.array([0.0, 0.0, 0.0]))
