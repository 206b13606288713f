"""End-to-end Monte Carlo experiments: simulate, estimate, compare to truth.

A single flat config fixes the model, the (n, delta, h) schedule, the grid,
the replication count, and one master seed; everything downstream is derived
deterministically.  Per-replication seeds mix the master seed with the
(n-index, replication-index) pair through numpy's SeedSequence spawn keys, so
any record can be regenerated in isolation.

Determinism contract: records.csv, aggregate.csv, grids/*.csv and config.echo
are byte-identical across re-runs on one platform.  Wall-clock timings are
inherently non-reproducible, so they are quarantined in a separate
timings.csv sidecar instead of polluting the deterministic files.
"""
from __future__ import annotations

import os
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .analytic_truth import (
    TruthDensity,
    ou_bivariate,
    ou_logsq_marginal,
    regime_bivariate,
    regime_marginal,
    scaled_truth,
)
from .deconv_kernel import build_table
from .errors import ConfigError, InputError
from .estimator import (
    DensityGrid,
    EstimatorConfig,
    ObservationSet,
    default_bandwidth,
    estimate_density,
)
from .smoothing_kernel import builtin_kernel, kernel_moments
from .vol_sim import OUParams, RegimeSwitchParams, simulate_bundle

_TABLE_STEP = 0.02  # lattice step in kernel-argument units; valid for all h
_AUTO_POINTS = {1: 201, 2: 61, 3: 31}
_LOG_SQ_FLOOR = 2.0 * np.log(1e-12)  # clamp floor of the log-square transform


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one Monte Carlo experiment."""

    model: str
    params: object
    n_schedule: Tuple[int, ...]
    delta_exp: float
    gamma: float
    times: Tuple[float, ...]
    grid_spec: str
    replications: int
    master_seed: int
    kernel_name: str = "poly3"
    bandwidth_override: Optional[float] = None
    subgrid_ratio: int = 50
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.model not in ("ou", "regime"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        sched = tuple(int(n) for n in self.n_schedule)
        if not sched or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigError(f"n schedule must be strictly increasing, got {sched}")
        if not self.times:
            raise ConfigError("need at least one target time")
        # delta_exp/gamma ranges are enforced by EstimatorConfig
        self.estimator_config()

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(
            gamma=self.gamma,
            delta_exp=self.delta_exp,
            bandwidth_override=self.bandwidth_override,
        )

    @property
    def p(self) -> int:
        return len(self.times)

    def to_mapping(self) -> dict:
        """Flat key = value view, invertible by from_mapping."""
        out = {"model": self.model}
        if self.model == "ou":
            out["a"] = repr(self.params.a)
            out["mu"] = repr(self.params.mu)
            out["b"] = repr(self.params.b)
        else:
            out["a"] = repr(self.params.ou0.a)
            out["b"] = repr(self.params.ou0.b)
            out["mu0"] = repr(self.params.ou0.mu)
            out["mu1"] = repr(self.params.ou1.mu)
            out["a0"] = repr(self.params.a0)
            out["a1"] = repr(self.params.a1)
        out["n_schedule"] = ",".join(str(n) for n in self.n_schedule)
        out["delta_exp"] = repr(self.delta_exp)
        out["gamma"] = repr(self.gamma)
        if self.bandwidth_override is not None:
            out["bandwidth"] = repr(self.bandwidth_override)
        out["times"] = ",".join(repr(t) for t in self.times)
        out["grid"] = self.grid_spec
        out["replications"] = str(self.replications)
        out["seed"] = str(self.master_seed)
        out["kernel"] = self.kernel_name
        out["subgrid_ratio"] = str(self.subgrid_ratio)
        return out

    @classmethod
    def from_mapping(cls, mapping: dict, out_dir: Optional[str] = None) -> "ExperimentConfig":
        known = {
            "model", "a", "mu", "b", "mu0", "mu1", "a0", "a1", "n_schedule",
            "delta_exp", "gamma", "bandwidth", "times", "grid", "replications",
            "seed", "kernel", "subgrid_ratio",
        }
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        def need(key):
            if key not in mapping:
                raise ConfigError(f"missing config key {key!r}")
            return mapping[key]

        model = need("model").strip()
        if model == "ou":
            params = OUParams(
                a=float(need("a")), mu=float(need("mu")), b=float(need("b"))
            )
        elif model == "regime":
            a, b = float(need("a")), float(need("b"))
            params = RegimeSwitchParams(
                a0=float(need("a0")),
                a1=float(need("a1")),
                ou0=OUParams(a=a, mu=float(need("mu0")), b=b),
                ou1=OUParams(a=a, mu=float(need("mu1")), b=b),
            )
        else:
            raise ConfigError(f"unknown model {model!r}")
        bw = mapping.get("bandwidth")
        return cls(
            model=model,
            params=params,
            n_schedule=tuple(int(s) for s in need("n_schedule").split(",")),
            delta_exp=float(need("delta_exp")),
            gamma=float(need("gamma")),
            times=tuple(float(s) for s in need("times").split(",")),
            grid_spec=need("grid").strip(),
            replications=int(need("replications")),
            master_seed=int(need("seed")),
            kernel_name=mapping.get("kernel", "poly3").strip(),
            bandwidth_override=None if bw is None else float(bw),
            subgrid_ratio=int(mapping.get("subgrid_ratio", "50")),
            out_dir=out_dir,
        )


def parse_config_text(text: str) -> dict:
    """Parse flat `key = value` lines; blank lines and # comments ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def truth_for_model(model: str, params, times) -> TruthDensity:
    """The estimand on the log sigma^2 scale for a named model.

    OU: the simulated path is log sigma^2 itself.  Regime: sigma = exp(xi),
    so the xi-scale law is pushed through log sigma^2 = 2 xi.
    """
    times = tuple(float(t) for t in times)
    p = len(times)
    if model == "ou":
        if p == 1:
            return ou_logsq_marginal(params)
        if p == 2:
            return ou_bivariate(params, times[0], times[1])
        raise ConfigError("closed-form OU truth is shipped for p <= 2 only")
    if model == "regime":
        if p == 1:
            return scaled_truth(regime_marginal(params), 2.0)
        if p == 2:
            return scaled_truth(regime_bivariate(params, times[0], times[1]), 2.0)
        raise ConfigError("closed-form regime truth is shipped for p <= 2 only")
    raise ConfigError(f"unknown model {model!r}")


def truth_for(cfg: ExperimentConfig) -> TruthDensity:
    """The estimand on the log sigma^2 scale for the configured model."""
    return truth_for_model(cfg.model, cfg.params, cfg.times)


def _truth_moments(truth: TruthDensity):
    """Per-axis mean and sd of a truth density by tensor quadrature."""
    nodes = 400 if truth.dimension > 1 else 2000
    xs, ws = [], []
    for lo, hi in truth.truncation_box:
        u, w = np.polynomial.legendre.leggauss(nodes)
        xs.append(0.5 * (hi - lo) * u + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w)
    mesh = np.meshgrid(*xs, indexing="ij")
    vals = truth.vector_eval(np.stack(mesh, axis=-1))

    def integrate(f):
        v = f
        for ax in reversed(range(truth.dimension)):
            v = np.tensordot(v, ws[ax], axes=([ax], [0]))
        return float(v)

    total = integrate(vals)
    means, sds = [], []
    for ax in range(truth.dimension):
        m1 = integrate(vals * mesh[ax]) / total
        m2 = integrate(vals * mesh[ax] ** 2) / total
        means.append(m1)
        sds.append(np.sqrt(max(m2 - m1 * m1, 0.0)))
    return means, sds


def parse_axis_spec(spec: str) -> np.ndarray:
    """An evaluation axis from a lo:hi:count string."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid spec {spec!r} is not of the form lo:hi:count")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 2 or not lo < hi:
        raise ConfigError(f"bad grid spec {spec!r}")
    return np.linspace(lo, hi, count)


def resolve_grid(cfg: ExperimentConfig, truth: TruthDensity):
    """Grid axes from the config's grid spec.

    "auto" spans truth-mean +/- 5 truth-sd per axis; explicit specs are
    lo:hi:count, comma-separated per axis (a single spec serves all axes).
    Returns (axes, truncated_mass): the truth mass left outside the grid box.
    """
    if cfg.grid_spec == "auto":
        means, sds = _truth_moments(truth)
        count = _AUTO_POINTS.get(cfg.p, 31)
        axes = [
            np.linspace(m - 5.0 * s, m + 5.0 * s, count)
            for m, s in zip(means, sds)
        ]
    else:
        specs = cfg.grid_spec.split(",")
        if len(specs) == 1:
            specs = specs * cfg.p
        if len(specs) != cfg.p:
            raise ConfigError(
                f"got {len(specs)} grid specs for p = {cfg.p} target times"
            )
        axes = [parse_axis_spec(s) for s in specs]

    # mass outside the grid box, by quadrature against the truth
    nodes = 400 if truth.dimension > 1 else 2000
    xs, ws = [], []
    for ax in axes:
        u, w = np.polynomial.legendre.leggauss(nodes)
        lo, hi = float(ax[0]), float(ax[-1])
        xs.append(0.5 * (hi - lo) * u + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w)
    mesh = np.meshgrid(*xs, indexing="ij")
    inside = truth.vector_eval(np.stack(mesh, axis=-1))
    for ax_i in reversed(range(truth.dimension)):
        inside = np.tensordot(inside, ws[ax_i], axes=([ax_i], [0]))
    return axes, max(0.0, 1.0 - float(inside))


def mix_seed(master_seed: int, n_index: int, rep_index: int) -> int:
    """Replication seed: master seed mixed with (n-index, rep-index) through
    a SeedSequence spawn key.  Fixed and documented so any single record can
    be reproduced without running the others."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(n_index, rep_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ExperimentRecord:
    n: int
    rep: int
    seed: int
    mise: float
    bias_center: float
    clamps: int
    seconds: float


@dataclass(frozen=True)
class AggregateRow:
    n: int
    mise_mean: float
    mise_se: float


@dataclass(frozen=True, eq=False)
class MonteCarloReport:
    """All records, aggregates, and grids from one experiment."""

    config: ExperimentConfig
    records: Tuple[ExperimentRecord, ...]
    aggregate: Tuple[AggregateRow, ...]
    grids: dict
    axes: tuple
    bandwidths: dict
    warnings: Tuple[str, ...]
    truncated_mass: float
    mise_slope: Optional[float] = field(default=None)


def compute_mise(est: DensityGrid, truth: TruthDensity) -> float:
    """Trapezoid-weighted integrated squared error of the estimate against
    the truth, over the estimate's own grid."""
    if len(est.axes) != truth.dimension:
        raise InputError(
            f"estimate is {len(est.axes)}-dimensional but truth is "
            f"{truth.dimension}-dimensional"
        )
    diff2 = (est.values - truth.grid_values(est.axes)) ** 2
    for ax in reversed(range(len(est.axes))):
        diff2 = np.trapezoid(diff2, x=est.axes[ax], axis=ax)
    return float(diff2)


def _with_context(exc: Exception, stage: str, n: int, rep: int) -> Exception:
    msg = f"stage {stage!r} failed at n={n}, rep={rep}: {exc}"
    try:
        new = type(exc)(msg)
    except Exception:
        new = RuntimeError(msg)
    new.__cause__ = exc
    return new


def table_for_axes(kernel_name: str, h: float, axes):
    """Deconvolution table wide enough for every kernel argument (x - Y)/h.

    log-squared observations live in [2 log(1e-12), ~30] by the clamp rule,
    so the argument range is known up front; stray points beyond it fall
    back to the exact slow path automatically.
    """
    spec = builtin_kernel(kernel_name)
    ax_lo = min(float(a[0]) for a in axes)
    ax_hi = max(float(a[-1]) for a in axes)
    lo = (ax_lo - 30.0) / h - 2.0
    hi = (ax_hi - _LOG_SQ_FLOOR) / h + 2.0
    n_points = max(4097, int(np.ceil((hi - lo) / _TABLE_STEP)) + 1)
    return build_table(spec, h, lo, hi, n_points)


def run_experiment(cfg: ExperimentConfig) -> MonteCarloReport:
    """Run the full simulate -> estimate -> compare loop over the schedule.

    Sequential and deterministic: replications are keyed by mix_seed, the
    loop order is (n ascending, rep ascending), and aggregation reduces in
    that order.
    """
    truth = truth_for(cfg)
    axes, truncated_mass = resolve_grid(cfg, truth)
    est_cfg = cfg.estimator_config()

    center_point = tuple(float(a[a.size // 2]) for a in axes)
    truth_center = truth.evaluator(np.array(center_point))

    records = []
    grids = {}
    bandwidths = {}
    notes = []
    for n_index, n in enumerate(cfg.n_schedule):
        delta = float(n) ** (-cfg.delta_exp)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            h = default_bandwidth(n, cfg.p, est_cfg)
        for w in caught:
            notes.append(f"n={n}: {w.message}")
        bandwidths[n] = h
        try:
            table = table_for_axes(cfg.kernel_name, h, axes)
        except Exception as exc:
            raise _with_context(exc, "build_table", n, -1)
        for rep in range(cfg.replications):
            seed = mix_seed(cfg.master_seed, n_index, rep)
            t0 = time.perf_counter()
            try:
                bundle = simulate_bundle(
                    cfg.model, cfg.params, n, delta, seed,
                    subgrid_ratio=cfg.subgrid_ratio,
                )
            except Exception as exc:
                raise _with_context(exc, "simulate", n, rep)
            try:
                obs = ObservationSet.from_increments(
                    bundle.increments, delta, cfg.times
                )
                est = estimate_density(obs, table, axes)
            except Exception as exc:
                raise _with_context(exc, "estimate", n, rep)
            try:
                mise = compute_mise(est, truth)
            except Exception as exc:
                raise _with_context(exc, "compare", n, rep)
            seconds = time.perf_counter() - t0
            center_idx = tuple(a.size // 2 for a in axes)
            bias_center = float(est.values[center_idx]) - truth_center
            records.append(
                ExperimentRecord(
                    n=int(n), rep=rep, seed=seed, mise=mise,
                    bias_center=bias_center, clamps=obs.n_clamped,
                    seconds=seconds,
                )
            )
            grids[(int(n), rep)] = est

    aggregate = []
    for n in cfg.n_schedule:
        vals = np.array([r.mise for r in records if r.n == n])
        se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        aggregate.append(AggregateRow(n=int(n), mise_mean=float(np.mean(vals)), mise_se=se))

    slope = None
    if len(cfg.n_schedule) >= 2 and all(a.mise_mean > 0 for a in aggregate):
        slope = float(
            np.polyfit(
                np.log([a.n for a in aggregate]),
                np.log([a.mise_mean for a in aggregate]),
                1,
            )[0]
        )

    return MonteCarloReport(
        config=cfg,
        records=tuple(records),
        aggregate=tuple(aggregate),
        grids=grids,
        axes=tuple(np.asarray(a) for a in axes),
        bandwidths=bandwidths,
        warnings=tuple(notes),
        truncated_mass=truncated_mass,
        mise_slope=slope,
    )


@dataclass(frozen=True)
class BiasReport:
    """Replicated bias at the grid center against the kernel prediction."""

    n: int
    h: float
    point: tuple
    replications: int
    empirical_bias: float
    empirical_se: float
    predicted_bias: float
    ratio: float


def _hessian_trace(truth: TruthDensity, x: np.ndarray, step: float = 1e-4) -> float:
    total = 0.0
    fx = truth.evaluator(x)
    for ax in range(truth.dimension):
        e = np.zeros(truth.dimension)
        e[ax] = step
        total += (truth.evaluator(x + e) - 2.0 * fx + truth.evaluator(x - e)) / step**2
    return total


def bias_check(cfg: ExperimentConfig, truth: TruthDensity) -> BiasReport:
    """Estimate E f_hat at the grid center point over R replications and
    compare the empirical bias to the second-order kernel prediction
    (h^2 mu2 / 2) * trace of the truth Hessian."""
    axes, _ = resolve_grid(cfg, truth)
    point = np.array([float(a[a.size // 2]) for a in axes])
    n_index = len(cfg.n_schedule) - 1
    n = cfg.n_schedule[n_index]
    delta = float(n) ** (-cfg.delta_exp)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        h = default_bandwidth(n, cfg.p, cfg.estimator_config())
    table = table_for_axes(cfg.kernel_name, h, [np.array([v]) for v in point])

    values = np.empty(cfg.replications)
    point_axes = [np.array([v]) for v in point]
    for rep in range(cfg.replications):
        seed = mix_seed(cfg.master_seed, n_index, rep)
        bundle = simulate_bundle(
            cfg.model, cfg.params, n, delta, seed, subgrid_ratio=cfg.subgrid_ratio
        )
        obs = ObservationSet.from_increments(bundle.increments, delta, cfg.times)
        est = estimate_density(obs, table, point_axes)
        values[rep] = float(est.values.ravel()[0])

    f_true = truth.evaluator(point)
    emp = float(np.mean(values)) - f_true
    se = float(np.std(values, ddof=1) / np.sqrt(cfg.replications))
    mu2 = kernel_moments(builtin_kernel(cfg.kernel_name)).mu2
    predicted = 0.5 * h * h * mu2 * _hessian_trace(truth, point)
    ratio = emp / predicted if predicted != 0.0 else np.inf
    return BiasReport(
        n=int(n),
        h=h,
        point=tuple(float(v) for v in point),
        replications=cfg.replications,
        empirical_bias=emp,
        empirical_se=se,
        predicted_bias=predicted,
        ratio=ratio,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(report: MonteCarloReport, out_dir: str) -> list:
    """Write records.csv, aggregate.csv, grids/*.csv, config.echo and the
    timings.csv sidecar.  Everything except timings.csv is deterministic."""
    cfg = report.config
    written = []

    def _write(path, text):
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report file {path}: {exc}") from exc
        written.append(path)

    try:
        os.makedirs(os.path.join(out_dir, "grids"), exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out_dir}: {exc}") from exc

    lines = ["n,rep,mise,bias_center,clamps"]
    for r in report.records:
        lines.append(f"{r.n},{r.rep},{_fmt(r.mise)},{_fmt(r.bias_center)},{r.clamps}")
    _write(os.path.join(out_dir, "records.csv"), "\n".join(lines) + "\n")

    lines = ["n,mise_mean,mise_se"]
    for a in report.aggregate:
        lines.append(f"{a.n},{_fmt(a.mise_mean)},{_fmt(a.mise_se)}")
    _write(os.path.join(out_dir, "aggregate.csv"), "\n".join(lines) + "\n")

    lines = ["n,rep,seconds"]
    for r in report.records:
        lines.append(f"{r.n},{r.rep},{r.seconds:.6f}")
    _write(os.path.join(out_dir, "timings.csv"), "\n".join(lines) + "\n")

    for (n, rep), grid in sorted(report.grids.items()):
        path = os.path.join(out_dir, "grids", f"n{n}_rep{rep}.csv")
        p = len(grid.axes)
        if p == 1:
            rows = ["x,f_hat"]
            for x, v in zip(grid.axes[0], grid.values):
                rows.append(f"{_fmt(x)},{_fmt(v)}")
        else:
            rows = [",".join(f"x{k + 1}" for k in range(p)) + ",f_hat"]
            mesh = np.meshgrid(*grid.axes, indexing="ij")
            flat = [m.ravel() for m in mesh] + [grid.values.ravel()]
            for row in zip(*flat):
                rows.append(",".join(_fmt(v) for v in row))
        _write(path, "\n".join(rows) + "\n")

    echo = [f"{k} = {v}" for k, v in cfg.to_mapping().items()]
    echo.append(f"# truncated_truth_mass = {_fmt(report.truncated_mass)}")
    for n in cfg.n_schedule:
        echo.append(f"# bandwidth_n{n} = {_fmt(report.bandwidths[n])}")
    if report.mise_slope is not None:
        echo.append(f"# mise_loglog_slope = {_fmt(report.mise_slope)}")
    for note in report.warnings:
        echo.append(f"# warning: {note}")
    _write(os.path.join(out_dir, "config.echo"), "\n".join(echo) + "\n")
    return written
