"""Closed-form target densities for verifying the estimator.

Every shipped model admits an exact stationary law: the OU log-volatility is
Gaussian, and the two-state regime-switching process has a four-component
bivariate Gaussian mixture whose weights come from the chain's transition
matrix.  A general 1-D invariant-density formula (scale-measure construction)
is included as an independent cross-check of the Gaussian cases.

Scale convention: estimator-facing truths live on the log sigma^2 scale.
For the OU model the simulated path is log sigma^2 itself; for the regime
model sigma = exp(xi), so log sigma^2 = 2 xi and the xi-scale mixture must be
pushed through the doubling map (see scaled_truth).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, DomainError
from .vol_sim import OUParams, RegimeSwitchParams, markov_transition

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class TruthDensity:
    """A reference density with a documented integration box.

    dimension      : number of coordinates p.
    evaluator      : single-point evaluation, p-vector -> nonnegative float.
    description    : human-readable identity of the law.
    truncation_box : p pairs (lo, hi) outside which the mass is negligible.
    vector_eval    : vectorized evaluation on arrays of shape (..., p).
    """

    dimension: int
    evaluator: Callable
    description: str
    truncation_box: tuple
    vector_eval: Callable

    def grid_values(self, axes) -> np.ndarray:
        """Evaluate on the tensor grid spanned by the axis arrays."""
        axes = [np.asarray(a, dtype=float).ravel() for a in axes]
        if len(axes) != self.dimension:
            raise ConfigError(
                f"got {len(axes)} axes for a {self.dimension}-dimensional density"
            )
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack(mesh, axis=-1)
        return self.vector_eval(pts)

    def mass(self, nodes_per_axis: int = 800) -> float:
        """Mass over the truncation box by tensor Gauss-Legendre quadrature."""
        xs, ws = [], []
        for lo, hi in self.truncation_box:
            u, w = np.polynomial.legendre.leggauss(nodes_per_axis)
            xs.append(0.5 * (hi - lo) * u + 0.5 * (hi + lo))
            ws.append(0.5 * (hi - lo) * w)
        mesh = np.meshgrid(*xs, indexing="ij")
        vals = self.vector_eval(np.stack(mesh, axis=-1))
        for ax in reversed(range(self.dimension)):
            vals = vals @ ws[ax] if vals.ndim == 1 else np.tensordot(vals, ws[ax], axes=([ax], [0]))
        return float(vals)


def _make_truth(dimension, vector_fn, description, box) -> TruthDensity:
    def evaluator(x):
        pt = np.asarray(x, dtype=float)
        if pt.ndim == 0:
            pt = pt.reshape(1)
        if pt.shape != (dimension,):
            raise ConfigError(
                f"point shape {pt.shape} does not match dimension {dimension}"
            )
        return float(vector_fn(pt))

    return TruthDensity(
        dimension=dimension,
        evaluator=evaluator,
        description=description,
        truncation_box=tuple(box),
        vector_eval=vector_fn,
    )


def _gauss(u, var):
    return np.exp(-0.5 * u * u / var) / (_SQRT_2PI * np.sqrt(var))


def ou_logsq_marginal(params: OUParams) -> TruthDensity:
    """Stationary density when the OU path is log sigma^2 itself:
    Normal(mu, b^2/(2a))."""
    var = params.stationary_var
    sd = np.sqrt(var)
    mu = params.mu

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        return _gauss(pts[..., 0] - mu, var)

    box = ((mu - 10.0 * sd, mu + 10.0 * sd),)
    return _make_truth(1, fn, f"Normal(mu={mu}, var={var})", box)


def ou_bivariate(params: OUParams, s: float, t: float) -> TruthDensity:
    """Joint stationary law of an OU path at two times: bivariate normal with
    equal means and variances and correlation e^{-a (t - s)}."""
    if not s < t:
        raise DomainError(f"need s < t, got s={s}, t={t}")
    var = params.stationary_var
    sd = np.sqrt(var)
    mu = params.mu
    rho = np.exp(-params.a * (t - s))
    det = var * var * (1.0 - rho * rho)

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        u = pts[..., 0] - mu
        v = pts[..., 1] - mu
        quad_form = (u * u - 2.0 * rho * u * v + v * v) / (var * (1.0 - rho * rho))
        return np.exp(-0.5 * quad_form) / (2.0 * np.pi * np.sqrt(det))

    box = ((mu - 10.0 * sd, mu + 10.0 * sd),) * 2
    return _make_truth(
        2, fn, f"BivariateNormal(mu={mu}, var={var}, rho={rho})", box
    )


def regime_marginal(params: RegimeSwitchParams) -> TruthDensity:
    """Stationary marginal of xi: the pi-weighted two-component normal
    mixture."""
    pi = params.stationary_probs
    comps = [params.ou0, params.ou1]
    sds = [np.sqrt(c.stationary_var) for c in comps]

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        x = pts[..., 0]
        return pi[0] * _gauss(x - comps[0].mu, comps[0].stationary_var) + pi[1] * _gauss(
            x - comps[1].mu, comps[1].stationary_var
        )

    lo = min(c.mu - 10.0 * sd for c, sd in zip(comps, sds))
    hi = max(c.mu + 10.0 * sd for c, sd in zip(comps, sds))
    return _make_truth(
        1,
        fn,
        f"Mixture(pi={pi.tolist()}, mu=({comps[0].mu}, {comps[1].mu}))",
        ((lo, hi),),
    )


def regime_bivariate(params: RegimeSwitchParams, s: float, t: float) -> TruthDensity:
    """Joint law of (xi_s, xi_t) for the regime-switching process.

    Four components, indexed by the chain's states at the two times: stay in
    1, move 0 -> 1, move 1 -> 0, stay in 0.  Stay components are bivariate OU
    laws; move components factor because the two OU paths are independent.
    """
    if not s < t:
        raise DomainError(f"need s < t, got s={s}, t={t}")
    pi = params.stationary_probs
    q = markov_transition(params.a0, params.a1, t - s)
    biv0 = ou_bivariate(params.ou0, s, t)
    biv1 = ou_bivariate(params.ou1, s, t)
    v0, v1 = params.ou0.stationary_var, params.ou1.stationary_var
    mu0, mu1 = params.ou0.mu, params.ou1.mu

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        x = pts[..., 0]
        y = pts[..., 1]
        stay1 = q[1, 1] * pi[1] * biv1.vector_eval(pts)
        move01 = q[1, 0] * pi[0] * _gauss(x - mu0, v0) * _gauss(y - mu1, v1)
        move10 = q[0, 1] * pi[1] * _gauss(x - mu1, v1) * _gauss(y - mu0, v0)
        stay0 = q[0, 0] * pi[0] * biv0.vector_eval(pts)
        return stay1 + move01 + move10 + stay0

    sd = max(np.sqrt(v0), np.sqrt(v1))
    lo = min(mu0, mu1) - 10.0 * sd
    hi = max(mu0, mu1) + 10.0 * sd
    return _make_truth(
        2,
        fn,
        f"RegimeMixture(mu=({mu0}, {mu1}), pi={pi.tolist()}, gap={t - s})",
        ((lo, hi),) * 2,
    )


def scaled_truth(truth: TruthDensity, factor: float) -> TruthDensity:
    """Push a density through coordinatewise scaling z = factor * x.

    Used to move xi-scale laws onto the log sigma^2 scale, where
    log sigma^2 = 2 xi.
    """
    if factor == 0.0:
        raise DomainError("scale factor must be nonzero")
    p = truth.dimension
    jac = 1.0 / abs(factor) ** p

    def fn(pts):
        return truth.vector_eval(np.asarray(pts, dtype=float) / factor) * jac

    box = []
    for lo, hi in truth.truncation_box:
        a, b = lo * factor, hi * factor
        box.append((min(a, b), max(a, b)))
    return _make_truth(
        p, fn, f"{truth.description} scaled by {factor}", tuple(box)
    )


def invariant_density_1d(
    drift_fn: Callable,
    diff_fn: Callable,
    state_interval,
    x0: float,
) -> TruthDensity:
    """Stationary density of a 1-D diffusion from its scale construction.

    Unnormalized shape: (1 / diff^2(x)) * exp(2 * int_{x0}^{x} drift / diff^2),
    normalized by adaptive quadrature over the state interval.  The choice of
    x0 shifts only the multiplicative constant and cancels on normalization.
    """
    lo, hi = float(state_interval[0]), float(state_interval[1])
    if not lo < x0 < hi:
        raise DomainError(f"x0 = {x0} must be interior to ({lo}, {hi})")

    probe = np.linspace(max(lo, x0 - 50.0), min(hi, x0 + 50.0), 201)
    dvals = np.asarray([diff_fn(float(u)) for u in probe], dtype=float)
    if np.any(dvals <= 0.0) or not np.all(np.isfinite(dvals)):
        raise DomainError("diffusion coefficient must be positive on the interval")

    def exponent_integrand(y):
        d = diff_fn(y)
        return drift_fn(y) / (d * d)

    def unnormalized(x: float) -> float:
        integral, _ = quad(exponent_integrand, x0, x, limit=200)
        d = diff_fn(x)
        arg = 2.0 * integral
        if arg > 700.0:
            return np.inf
        return np.exp(arg) / (d * d)

    norm, norm_err = quad(unnormalized, lo, hi, limit=400, epsrel=1e-9)
    if not np.isfinite(norm) or norm <= 0.0 or norm_err > 1e-6 * norm:
        raise DomainError("not positive recurrent on the given interval")

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        flat = pts[..., 0].ravel()
        out = np.array([unnormalized(float(u)) for u in flat]) / norm
        return out.reshape(pts[..., 0].shape)

    # find a finite box holding all but ~1e-10 of the mass
    if np.isfinite(lo) and np.isfinite(hi):
        box_lo, box_hi = lo, hi
    else:
        half = 4.0
        while half < 1e6:
            tail = 0.0
            if not np.isfinite(hi) or x0 + half < hi:
                tail += quad(unnormalized, x0 + half, hi, limit=200)[0]
            if not np.isfinite(lo) or x0 - half > lo:
                tail += quad(unnormalized, lo, x0 - half, limit=200)[0]
            if tail < 1e-10 * norm:
                break
            half *= 2.0
        box_lo = max(lo, x0 - half)
        box_hi = min(hi, x0 + half)
    return _make_truth(
        1,
        fn,
        f"InvariantDensity1D(x0={x0}, interval=({lo}, {hi}))",
        ((box_lo, box_hi),),
    )
