"""Density estimation from high-frequency price increments.

Pipeline: price increments are normalized by sqrt(delta), log-squared (which
turns multiplicative volatility into an additive signal-plus-noise problem),
assembled into p-dimensional observation vectors whose components are lagged
by the target-time index offsets, and averaged against the deconvolution
product kernel:

    f_hat(x) = (1/(m h^p)) sum_{j=1}^m prod_k v_h((x_k - Y_{j,k}) / h),

with m = n - i_p + i_1 effective vectors.  Everything is deterministic:
accumulation order is fixed, so a re-run reproduces results bit for bit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .deconv_kernel import DeconvTable, eval_table
from .errors import ConfigError, InputError

_CLAMP_FLOOR_DEFAULT = 1e-12

# Observation-block size for the grid sweep; keeps per-block factor matrices
# in the tens of MB while preserving a fixed summation order.
_JCHUNK = 2048


class ScheduleWarning(UserWarning):
    """Bandwidth/sampling schedule violates the variance-control condition."""


def normalized_increments(prices, delta: float):
    """Price differences over one sampling interval, divided by sqrt(delta)."""
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 1 or prices.size < 2:
        raise InputError("need at least 2 price points to form increments")
    if not delta > 0.0:
        raise InputError(f"delta must be positive, got {delta}")
    return np.diff(prices) / np.sqrt(delta)


def log_square_transform(x, clamp_floor: float = _CLAMP_FLOOR_DEFAULT):
    """log(x_i^2), with |x_i| < clamp_floor clamped to the floor first.

    Returns (values, n_clamped).  Exact zeros occur with probability zero but
    would produce -inf and poison every downstream average, so they are
    clamped and counted rather than dropped.
    """
    x = np.asarray(x, dtype=float)
    if not clamp_floor > 0.0:
        raise ConfigError(f"clamp_floor must be positive, got {clamp_floor}")
    clamped = np.abs(x) < clamp_floor
    vals = 2.0 * np.log(np.maximum(np.abs(x), clamp_floor))
    return vals, int(np.count_nonzero(clamped))


def _floor_index(t: float, delta: float) -> int:
    # floor(t/delta) with a 1e-9 relative pad: floor(1.5/0.1) must be 15
    # even though 1.5/0.1 = 14.999... in binary.
    return int(np.floor((t / delta) * (1.0 + 1e-9)))


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Log-squared increments plus the target-time index arithmetic.

    delta         : sampling interval.
    log_sq        : n log-squared normalized increments.
    times         : target times, stored sorted increasing.
    index_offsets : floor(t_k / delta) per sorted target time.
    n_clamped     : how many increments hit the clamp floor.
    axis_order    : permutation mapping sorted-coordinate position -> the
                    position the caller gave that time in; identity when the
                    caller's times were already sorted.  Lets results be
                    reported in the caller's coordinate order.
    """

    delta: float
    log_sq: np.ndarray
    times: tuple
    index_offsets: tuple
    n_clamped: int = 0
    axis_order: tuple = field(default=())

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ConfigError("times must be a non-empty 1-D sequence")
        if np.any(t <= 0.0):
            raise ConfigError("target times must be positive")
        if np.any(np.diff(t) <= 0.0):
            raise ConfigError("target times must be distinct")
        off = np.asarray(self.index_offsets)
        if off.size != t.size or np.any(np.diff(off) < 0):
            raise ConfigError("index offsets must be nondecreasing, one per time")
        object.__setattr__(self, "times", tuple(float(v) for v in t))
        object.__setattr__(self, "index_offsets", tuple(int(v) for v in off))
        if not self.axis_order:
            object.__setattr__(self, "axis_order", tuple(range(t.size)))
        if self.m < 1:
            raise InputError("series too short for requested time spread")

    @property
    def n(self) -> int:
        return int(np.asarray(self.log_sq).size)

    @property
    def p(self) -> int:
        return int(np.asarray(self.times).size)

    @property
    def m(self) -> int:
        off = np.asarray(self.index_offsets)
        return self.n - int(off[-1]) + int(off[0])

    @classmethod
    def from_increments(
        cls,
        increments,
        delta: float,
        times,
        clamp_floor: float = _CLAMP_FLOOR_DEFAULT,
    ) -> "ObservationSet":
        """Build from normalized increments, sorting times and recording the
        caller's coordinate order."""
        user_times = np.asarray(times, dtype=float)
        if user_times.ndim != 1 or user_times.size < 1:
            raise ConfigError("times must be a non-empty 1-D sequence")
        order = tuple(int(i) for i in np.argsort(user_times, kind="stable"))
        sorted_times = user_times[list(order)]
        log_sq, n_clamped = log_square_transform(increments, clamp_floor)
        offsets = np.array(
            [_floor_index(float(t), float(delta)) for t in sorted_times], dtype=int
        )
        return cls(
            delta=float(delta),
            log_sq=log_sq,
            times=sorted_times,
            index_offsets=offsets,
            n_clamped=n_clamped,
            axis_order=order,
        )


def make_observation_vectors(obs: ObservationSet, j: int):
    """The j-th observation vector (1-based j, matching the estimator sum).

    Component k is log_sq at 1-based position i_k - i_1 + j.
    """
    if not 1 <= j <= obs.m:
        raise IndexError(f"j = {j} outside 1..{obs.m}")
    off = np.asarray(obs.index_offsets, dtype=int)
    idx = off - int(off[0]) + (j - 1)
    return np.asarray(obs.log_sq, dtype=float)[idx]


def _observation_matrix(obs: ObservationSet) -> np.ndarray:
    """All m observation vectors as an (m, p) matrix of lagged views."""
    log_sq = np.asarray(obs.log_sq, dtype=float)
    off = np.asarray(obs.index_offsets, dtype=int)
    m = obs.m
    cols = [log_sq[int(k - off[0]) : int(k - off[0]) + m] for k in off]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class EstimatorConfig:
    """Bandwidth and sampling-rate schedule knobs.

    gamma scales the bandwidth h = gamma * pi / log n; delta_exp sets the
    sampling interval delta = n^{-delta_exp}.  Variance control needs
    gamma > 4 p / delta_exp; violations warn but do not stop the run.
    """

    gamma: float
    delta_exp: float
    bandwidth_override: Optional[float] = None

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not 0.0 < self.delta_exp < 1.0:
            raise ConfigError(f"delta_exp must be in (0, 1), got {self.delta_exp}")
        if self.bandwidth_override is not None and not self.bandwidth_override > 0.0:
            raise ConfigError(
                f"bandwidth_override must be positive, got {self.bandwidth_override}"
            )


def default_bandwidth(n: int, p: int, cfg: EstimatorConfig) -> float:
    """h = gamma * pi / log n, unless the config pins an override.

    Either way the schedule condition gamma > 4 p / delta_exp is checked and
    a ScheduleWarning recorded on violation.
    """
    if n < 2:
        raise ConfigError(f"need n >= 2 for the bandwidth schedule, got {n}")
    required = 4.0 * p / cfg.delta_exp
    if not cfg.gamma > required:
        warnings.warn(
            f"gamma = {cfg.gamma} does not exceed 4p/delta_exp = {required:g}; "
            f"variance control is not guaranteed",
            ScheduleWarning,
            stacklevel=2,
        )
    if cfg.bandwidth_override is not None:
        return float(cfg.bandwidth_override)
    return cfg.gamma * np.pi / np.log(n)


def delta_schedule(n: int, cfg: EstimatorConfig) -> float:
    """Companion sampling interval delta = n^{-delta_exp}."""
    if n < 1:
        raise ConfigError(f"need n >= 1, got {n}")
    return float(n) ** (-cfg.delta_exp)


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Estimate (or truth) sampled on a tensor grid.

    axes   : p abscissa arrays, in the caller's coordinate order.
    values : p-dimensional array, values[i1, ..., ip] at (axes[0][i1], ...).
    """

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(len(a) for a in self.axes)
        if tuple(self.values.shape) != shape:
            raise ConfigError(
                f"values shape {self.values.shape} does not match axes {shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("grid values must be finite")

    def mass(self) -> float:
        """Trapezoid integral of values over the grid box."""
        v = self.values
        for ax in reversed(range(len(self.axes))):
            v = np.trapezoid(v, x=self.axes[ax], axis=ax)
        return float(v)


def marginalize(grid: DensityGrid, axis: int) -> DensityGrid:
    """Integrate one coordinate out by the trapezoid rule."""
    p = len(grid.axes)
    if not 0 <= axis < p:
        raise ConfigError(f"axis {axis} out of range for p = {p}")
    if p == 1:
        raise ConfigError("cannot marginalize a 1-D grid")
    vals = np.trapezoid(grid.values, x=grid.axes[axis], axis=axis)
    axes = tuple(a for i, a in enumerate(grid.axes) if i != axis)
    return DensityGrid(axes=axes, values=vals)


def estimate_density(obs: ObservationSet, table: DeconvTable, axes) -> DensityGrid:
    """Evaluate the deconvolution estimator on a tensor grid.

    axes are given in the caller's coordinate order (matching the order the
    target times were originally supplied in); the result carries the same
    orientation.  The bandwidth is the table's.
    """
    if obs.m < 1:
        raise InputError("series too short for requested time spread")
    p = obs.p
    axes = [np.asarray(a, dtype=float).ravel() for a in axes]
    if len(axes) != p:
        raise ConfigError(f"got {len(axes)} grid axes for p = {p} target times")
    if p > 3:
        raise ConfigError("p > 3 is not supported")

    h = table.bandwidth
    ymat = _observation_matrix(obs)
    m = ymat.shape[0]

    # axes arrive in caller order; computation runs in sorted-time order
    order = list(obs.axis_order)
    sorted_axes = [axes[order[k]] for k in range(p)]

    shape = tuple(a.size for a in sorted_axes)
    acc = np.zeros(shape)
    for lo in range(0, m, _JCHUNK):
        blk = ymat[lo : lo + _JCHUNK]
        factors = [
            eval_table(table, (sorted_axes[k][:, None] - blk[None, :, k]) / h)
            for k in range(p)
        ]
        if p == 1:
            acc += factors[0].sum(axis=1)
        elif p == 2:
            acc += factors[0] @ factors[1].T
        else:
            acc += np.einsum("am,bm,cm->abc", *factors)
    values = acc / (m * h**p)

    # transpose back to caller order: caller axis a sits at sorted slot
    # inverse_order[a]
    inv = np.argsort(order)
    values = np.transpose(values, axes=inv)
    return DensityGrid(axes=tuple(axes), values=values)
