"""Tests for the observation pipeline and the product-kernel density
estimator: increment normalization, log-square transform, index arithmetic,
bandwidth schedule, and grid evaluation."""

import numpy as np
import pytest
import scipy.special as sps
import scipy.stats as sst

from voldeconv import (
    EstimatorConfig,
    ObservationSet,
    OUParams,
    ScheduleWarning,
    build_table,
    builtin_kernel,
    default_bandwidth,
    delta_schedule,
    estimate_density,
    eval_table,
    eval_w,
    log_square_transform,
    make_observation_vectors,
    marginalize,
    normalized_increments,
    simulate_bundle,
)
from voldeconv.errors import ConfigError, InputError
from voldeconv.estimator import DensityGrid
from voldeconv.vol_sim import integrate_price, simulate_ou

SPEC = builtin_kernel("poly3")


def _obs_from_values(log_sq, delta, times):
    data = np.asarray(log_sq, dtype=float)
    offsets = tuple(int(np.floor((t / delta) * (1.0 + 1e-9))) for t in times)
    return ObservationSet(
        delta=delta, log_sq=data, times=tuple(times), index_offsets=offsets, n_clamped=0
    )


def test_normalized_increments_examples():
    delta = 0.25
    prices = np.array([0.0, 0.1, 0.3, 0.6])
    np.testing.assert_allclose(
        normalized_increments(prices, delta), np.array([0.2, 0.4, 0.6]), rtol=1e-14
    )
    assert np.all(normalized_increments(np.full(5, 2.7), 0.1) == 0.0)
    np.testing.assert_allclose(
        normalized_increments(np.array([0.0, np.sqrt(delta) * 3.0]), delta), [3.0], rtol=1e-14
    )
    with pytest.raises(InputError):
        normalized_increments(np.array([1.0]), delta)


def test_normalized_increments_brownian_variance():
    # sigma identically 1: increments are standard normal
    rng = np.random.default_rng(17)
    delta = 1e-3
    prices = np.concatenate([[0.0], np.cumsum(np.sqrt(delta) * rng.standard_normal(100_000))])
    x = normalized_increments(prices, delta)
    assert abs(np.var(x) - 1.0) < 0.02


def test_log_square_examples():
    vals, clamped = log_square_transform(np.array([1.0, -1.0, np.e]))
    np.testing.assert_allclose(vals, [0.0, 0.0, 2.0], atol=1e-15)
    assert clamped == 0
    vals, clamped = log_square_transform(np.array([0.0, 1e-30, 0.5]))
    assert clamped == 2
    assert vals[0] == vals[1] == pytest.approx(2.0 * np.log(1e-12), rel=1e-14)
    vals, clamped = log_square_transform(np.array([0.0]), clamp_floor=1e-6)
    assert vals[0] == pytest.approx(2.0 * np.log(1e-6), rel=1e-14)


def test_log_square_matches_noise_law():
    rng = np.random.default_rng(42)
    z = rng.standard_normal(100_000)
    vals, clamped = log_square_transform(z)
    assert clamped == 0
    cdf = lambda u: sps.erf(np.exp(np.asarray(u) / 2.0) / np.sqrt(2.0))
    assert sst.kstest(vals, cdf).statistic < 0.006  # measured 0.0025 at this seed


def test_observation_vector_index_arithmetic():
    data = np.arange(100, dtype=float)
    obs = _obs_from_values(data, 0.1, (1.0, 1.5))
    assert obs.index_offsets == (10, 15)
    assert obs.m == 95
    # j = 1 picks 1-based entries (1, 6)
    np.testing.assert_array_equal(make_observation_vectors(obs, 1), [0.0, 5.0])
    np.testing.assert_array_equal(make_observation_vectors(obs, 95), [94.0, 99.0])

    obs3 = _obs_from_values(data, 0.1, (0.25, 0.5, 0.75))
    assert obs3.index_offsets == (2, 5, 7)
    # j = 3 picks 1-based entries (3, 6, 8)
    np.testing.assert_array_equal(make_observation_vectors(obs3, 3), [2.0, 5.0, 7.0])

    with pytest.raises(IndexError):
        make_observation_vectors(obs, 0)
    with pytest.raises(IndexError):
        make_observation_vectors(obs, 96)


def test_floor_guard_against_binary_representation():
    # floor(1.5/0.1) must be 15 even though 1.5/0.1 = 14.999... in floats
    obs = _obs_from_values(np.zeros(40), 0.1, (1.5, 2.1))
    assert obs.index_offsets == (15, 21)


def test_observation_set_validation():
    with pytest.raises(ConfigError):
        _obs_from_values(np.zeros(10), 0.1, (1.0, 1.0))
    with pytest.raises(ConfigError):
        _obs_from_values(np.zeros(10), 0.1, (-0.5,))
    with pytest.raises(InputError, match="series too short"):
        _obs_from_values(np.zeros(4), 0.1, (0.1, 0.9))


def test_observation_set_sorts_times():
    inc = np.linspace(0.1, 1.0, 30)
    a = ObservationSet.from_increments(inc, 0.1, (1.5, 0.4))
    b = ObservationSet.from_increments(inc, 0.1, (0.4, 1.5))
    assert a.times == b.times == (0.4, 1.5)
    assert a.axis_order == (1, 0)
    assert b.axis_order == (0, 1)
    np.testing.assert_array_equal(a.log_sq, b.log_sq)


def test_bandwidth_schedule():
    cfg = EstimatorConfig(gamma=10.0, delta_exp=0.5)
    h = default_bandwidth(22026, 1, cfg)  # n = e^10 rounded
    assert abs(h - np.pi) < 1e-4
    assert delta_schedule(10_000, EstimatorConfig(gamma=10.0, delta_exp=0.5)) == pytest.approx(0.01)
    cfg_override = EstimatorConfig(gamma=10.0, delta_exp=0.5, bandwidth_override=0.8)
    assert default_bandwidth(1_000_000, 1, cfg_override) == 0.8


def test_bandwidth_warning_when_gamma_too_small():
    # p = 2, delta_exp = 0.5 requires gamma > 16
    with pytest.warns(ScheduleWarning):
        default_bandwidth(10_000, 2, EstimatorConfig(gamma=10.0, delta_exp=0.5))
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        default_bandwidth(10_000, 2, EstimatorConfig(gamma=17.0, delta_exp=0.5))


def test_estimator_config_validation():
    with pytest.raises(ConfigError):
        EstimatorConfig(gamma=-1.0, delta_exp=0.5)
    with pytest.raises(ConfigError):
        EstimatorConfig(gamma=9.0, delta_exp=1.5)
    with pytest.raises(ConfigError):
        EstimatorConfig(gamma=9.0, delta_exp=0.5, bandwidth_override=-0.1)


def test_single_observation_reduction():
    h = 0.9
    tbl = build_table(SPEC, h, -40.0, 40.0, 4097)
    y = -1.7
    obs = _obs_from_values(np.array([y]), 0.1, (0.1,))
    assert obs.m == 1
    grid = np.array([-3.0, 0.0, 2.5])
    est = estimate_density(obs, tbl, (grid,))
    np.testing.assert_allclose(est.values, eval_table(tbl, (grid - y) / h) / h, rtol=1e-12)


def test_two_point_manual_product():
    h = 0.9
    tbl = build_table(SPEC, h, -40.0, 40.0, 4097)
    data = np.array([-0.3, 1.1, 0.4, -2.0, 0.9])
    obs = _obs_from_values(data, 0.1, (0.1, 0.3))
    assert obs.index_offsets == (1, 3) and obs.m == 3
    x1, x2 = np.array([-1.0, 0.5]), np.array([0.0, 1.5, 3.0])
    est = estimate_density(obs, tbl, (x1, x2))
    manual = np.zeros((2, 3))
    for j in range(1, obs.m + 1):
        y = make_observation_vectors(obs, j)
        for i, a in enumerate(x1):
            for k, b in enumerate(x2):
                manual[i, k] += float(eval_table(tbl, (a - y[0]) / h)) * float(
                    eval_table(tbl, (b - y[1]) / h)
                )
    manual /= obs.m * h**2
    np.testing.assert_allclose(est.values, manual, rtol=1e-12, atol=1e-16)


def test_duplication_leaves_estimate_unchanged():
    h = 0.8
    tbl = build_table(SPEC, h, -40.0, 40.0, 4097)
    data = np.array([0.2, -1.4, 2.2, 0.7, -0.1, 1.3])
    grid = np.linspace(-4.0, 4.0, 17)
    one = estimate_density(_obs_from_values(data, 0.1, (0.1,)), tbl, (grid,))
    two = estimate_density(_obs_from_values(np.tile(data, 2), 0.1, (0.1,)), tbl, (grid,))
    np.testing.assert_allclose(one.values, two.values, rtol=1e-13)


def test_swapped_times_transpose():
    h = 1.1
    tbl = build_table(SPEC, h, -40.0, 40.0, 4097)
    bundle = simulate_bundle("ou", OUParams(a=2.0, mu=0.0, b=2.0), 400, 0.05, seed=21)
    x1 = np.linspace(-5.0, 5.0, 11)
    x2 = np.linspace(-4.0, 6.0, 9)
    fwd = ObservationSet.from_increments(bundle.increments, bundle.delta, (1.0, 1.25))
    rev = ObservationSet.from_increments(bundle.increments, bundle.delta, (1.25, 1.0))
    est_fwd = estimate_density(fwd, tbl, (x1, x2))
    est_rev = estimate_density(rev, tbl, (x2, x1))
    np.testing.assert_array_equal(est_rev.values, est_fwd.values.T)


def test_grid_mass_near_one():
    bundle = simulate_bundle("ou", OUParams(a=2.0, mu=0.0, b=2.0), 10_000, 10_000**-0.5, seed=5)
    obs = ObservationSet.from_increments(bundle.increments, bundle.delta, (1.0,))
    tbl = build_table(SPEC, 0.8, -40.0, 40.0, 4097)
    est = estimate_density(obs, tbl, (np.linspace(-16.0, 16.0, 321),))
    assert abs(est.mass() - 1.0) < 0.02  # measured 0.99991


def test_marginalization_matches_univariate():
    # integrating out x2 reproduces the univariate estimate built from the
    # same m vectors' first components
    h = 1.0
    params = OUParams(a=2.0, mu=0.0, b=2.0)
    bundle = simulate_bundle("ou", params, 300, 0.05, seed=77)
    obs2 = ObservationSet.from_increments(bundle.increments, bundle.delta, (1.0, 1.25))
    m = obs2.m
    tbl = build_table(SPEC, h, -290.0, 290.0, 29001)
    x1 = np.linspace(-6.0, 4.0, 11)
    first_idx = obs2.index_offsets[1] - obs2.index_offsets[0]
    y2 = obs2.log_sq[first_idx:][:m]
    lo, hi = y2.min() - 252.0 * h, y2.max() + 252.0 * h
    x2 = np.linspace(lo, hi, int(np.ceil((hi - lo) / (0.5 * h))) + 1)
    est2 = estimate_density(obs2, tbl, (x1, x2))
    marg = np.trapezoid(est2.values, x2, axis=1)
    obs1 = ObservationSet(
        delta=obs2.delta,
        log_sq=obs2.log_sq[:m],
        times=(1.0,),
        index_offsets=(obs2.index_offsets[0],),
        n_clamped=0,
    )
    est1 = estimate_density(obs1, tbl, (x1,))
    assert np.max(np.abs(marg - est1.values)) < 1e-6


def test_conditional_expectation_identity():
    # on a frozen volatility path, averaging the estimator over noise
    # draws reproduces the direct smoother of the true log-variance
    params = OUParams(a=2.0, mu=0.0, b=2.0)
    n, reps, h, ratio = 2000, 200, 2.5, 50
    delta = float(n) ** -0.75
    fine_dt = delta / ratio
    log_var = simulate_ou(params, n * ratio, fine_dt, seed=12345)
    sigma2 = np.exp(log_var)
    tbl = build_table(SPEC, h, -40.0, 40.0, 4097)
    pts = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    vals = np.empty((reps, pts.size))
    for r in range(reps):
        inc = integrate_price(sigma2, fine_dt, delta, seed=400 + r)
        obs = ObservationSet.from_increments(inc, delta, (1.0,))
        vals[r] = estimate_density(obs, tbl, (pts,)).values
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(reps)
    left_endpoints = log_var[::ratio][:n]
    smoother = np.array([np.mean(eval_w(SPEC, (x - left_endpoints) / h)) / h for x in pts])
    assert np.max(np.abs(mean - smoother) / se) < 3.0  # measured max 1.12


def test_density_grid_validation():
    with pytest.raises(ConfigError):
        DensityGrid(axes=(np.linspace(0, 1, 5),), values=np.zeros(4))
    with pytest.raises(ConfigError):
        DensityGrid(axes=(np.linspace(0, 1, 3),), values=np.array([1.0, np.nan, 0.0]))


def test_marginalize_grid():
    x1 = np.linspace(-1.0, 1.0, 41)
    x2 = np.linspace(-2.0, 2.0, 81)
    xx, yy = np.meshgrid(x1, x2, indexing="ij")
    vals = np.exp(-(xx**2) - yy**2 / 2.0)
    grid = DensityGrid(axes=(x1, x2), values=vals)
    m0 = marginalize(grid, 1)
    assert m0.values.shape == (41,)
    np.testing.assert_allclose(m0.values, np.trapezoid(vals, x2, axis=1), rtol=1e-13)
    with pytest.raises(ConfigError):
        marginalize(m0, 1)
