"""End-to-end active level-set estimation runs, traces and plots."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import acquisition as acq
from .benchmarks import BenchmarkSpec, Oracle, build_pool, load_csv_pool
from .domain import (
    CandidatePool,
    CapacityError,
    Explicit,
    Implicit,
    InvalidInputError,
    ObservationSet,
    calibrate_threshold,
    classify,
    f1_scores,
    implicit_ratio_from_h,
    latin_hypercube,
    snap_to_pool,
)
from .gp import gp_fit_mle, gp_posterior, straddle
from .surrogate import (
    MinorHyperparams,
    NetworkArchitecture,
    TrainingConfig,
    mc_predict,
    mean_prediction,
    train_bnn,
)
from .tuning import TuningGrid, tune

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "IterationRecord",
    "ExperimentTrace",
    "RunContext",
    "run_experiment",
    "run_repetition",
    "write_trace",
    "read_trace",
    "write_chosen",
    "emit_plot",
    "TRACE_COLUMNS",
]

log = logging.getLogger(__name__)

METHODS = ("exphlse", "imphlse", "straddle", "random")
BNN_METHODS = ("exphlse", "imphlse", "random")
CRITERIA = ("mi", "entropy", "varratio")
TRACE_COLUMNS = (
    "method",
    "repetition",
    "iteration",
    "n_sampled",
    "f1_super",
    "f1_sub",
    "threshold",
    "wall_seconds",
)


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; build from a flat mapping with :meth:`from_mapping`.

    Either ``benchmark`` or ``csv`` names the problem. The threshold is a
    fixed ``h``, a fixed ``l``, or (default) calibrated from ground truth so
    that ``super_fraction`` of the pool lies above it; implicit runs then use
    the ratio that maps the pool maximum onto that ``h``.
    """

    method: str = "exphlse"
    benchmark: str | None = "ackley"
    dim: int = 2
    pool_size: int | None = None
    pool_seed: int | None = None
    csv: str | None = None
    noise_std: float = 0.0
    threshold: str | None = None
    h: float | None = None
    l: float | None = None
    super_fraction: float = 0.2
    criterion: str = "mi"
    soft_sigma: float | None = None
    budget: int = 100
    batch_size: int | None = None
    init_count: int | None = None
    M: int = 50
    repetitions: int = 1
    seed: int = 0
    epochs: int = 1000
    layers: int = 1
    width: int = 256
    learning_rate: float = 1e-3
    dropout_rate: float = 0.05
    tune_stride: int = 1
    learning_rates: tuple = (1e-2, 5e-3, 1e-3)
    dropout_rates: tuple = (0.01, 0.05, 0.1)
    max_layers: int = 4
    max_width: int = 1024
    tune_epochs: int | None = None
    gp_restarts: int = 5
    gp_noise_variance: float | None = None
    straddle_beta: float = 1.96
    record_wall_time: bool = False

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        kw = dict(mapping)
        for key in ("learning_rates", "dropout_rates"):
            if key in kw and not isinstance(kw[key], (list, tuple)):
                kw[key] = (kw[key],)
            if key in kw:
                kw[key] = tuple(kw[key])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.criterion not in CRITERIA:
            raise ConfigError(f"criterion must be one of {CRITERIA}")
        if self.csv is not None:
            object.__setattr__(self, "benchmark", None)
        if self.benchmark is None and self.csv is None:
            raise ConfigError("set either 'benchmark' or 'csv'")
        variant = self.variant
        if self.method == "straddle" and variant != "explicit":
            raise ConfigError("straddle only handles explicit thresholds")
        if self.method == "imphlse" and variant != "implicit":
            raise ConfigError("imphlse needs an implicit threshold")
        if self.method == "exphlse" and variant != "explicit":
            raise ConfigError("exphlse needs an explicit threshold")
        if self.l is not None and not 0 <= self.l <= 1:
            raise ConfigError("l must lie in [0, 1]")
        if not 0 <= self.super_fraction <= 1:
            raise ConfigError("super_fraction must lie in [0, 1]")
        for name in ("budget", "repetitions", "M", "epochs", "layers", "width", "gp_restarts"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer")
        if self.budget < 0:
            raise ConfigError("budget must be >= 0")
        if self.repetitions < 1 or self.M < 1:
            raise ConfigError("repetitions and M must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.init_count is not None and self.init_count < 2:
            raise ConfigError("init_count must be >= 2")
        if self.tune_stride < 0:
            raise ConfigError("tune_stride must be >= 0 (0 disables tuning)")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        try:
            TuningGrid(self.learning_rates, self.dropout_rates)
            NetworkArchitecture(self.layers, self.width)
            MinorHyperparams(self.learning_rate, self.dropout_rate)
            if self.benchmark is not None:
                BenchmarkSpec(self.benchmark, self.dim, self.pool_size, self.noise_std)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def variant(self) -> str:
        if self.threshold is not None:
            if self.threshold not in ("explicit", "implicit"):
                raise ConfigError("threshold must be 'explicit' or 'implicit'")
            return self.threshold
        return "implicit" if self.method == "imphlse" else "explicit"

    @property
    def is_bnn(self) -> bool:
        return self.method in BNN_METHODS

    def default_batch(self, d: int) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return 10 * d if self.is_bnn else 1

    def default_init(self, d: int) -> int:
        if self.init_count is not None:
            return self.init_count
        return max(3 * d if self.csv is None else 5 * d, 2)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    n_sampled: int
    f1_super: float
    f1_sub: float
    resolved_threshold: float
    wall_seconds: float
    chosen: tuple = ()


@dataclass
class ExperimentTrace:
    method: str
    repetition: int
    seed: int
    records: list[IterationRecord] = field(default_factory=list)
    final_estimate: Any = None
    final_values: Any = None
    true_partition: Any = None
    observed: list[int] = field(default_factory=list)


@dataclass
class RunContext:
    """Per-repetition problem: pool, threshold and ground-truth partition."""

    pool: CandidatePool
    spec: Any
    truth_partition: Any
    h: float


def _derive(*words) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1)[0])


def load_problem(config: ExperimentConfig, rep_seed: int) -> CandidatePool:
    if config.csv is not None:
        return load_csv_pool(config.csv)
    seed = config.pool_seed if config.pool_seed is not None else rep_seed
    return build_pool(
        BenchmarkSpec(config.benchmark, config.dim, config.pool_size, config.noise_std, seed)
    )


def resolve_problem(config: ExperimentConfig, pool: CandidatePool) -> RunContext:
    """Threshold for the run and the true partition it induces on the pool."""
    if pool.truth is None:
        raise InvalidInputError("pool has no ground truth to score against")
    truth = pool.truth
    if config.h is not None:
        h = float(config.h)
    elif config.variant == "implicit" and config.l is not None:
        h = float(config.l * truth.max())
    else:
        h = calibrate_threshold(truth, config.super_fraction)
    if config.variant == "explicit":
        spec = Explicit(h)
    else:
        l = config.l if config.l is not None else implicit_ratio_from_h(truth, h)
        spec = Implicit(float(l))
    return RunContext(pool, spec, classify(truth, spec), h)


def _score(config, ens, spec):
    if config.method == "imphlse":
        return acq.acq_implicit_mi(ens, spec.l)
    fn = {
        "mi": acq.acq_explicit_mi,
        "entropy": acq.acq_explicit_entropy,
        "varratio": acq.acq_explicit_varratio,
    }[config.criterion]
    return fn(ens, spec.h, config.soft_sigma)


def run_repetition(config: ExperimentConfig, repetition: int) -> ExperimentTrace:
    rep_seed = config.seed + repetition
    pool = load_problem(config, rep_seed)
    ctx = resolve_problem(config, pool)
    d = pool.d
    batch = config.default_batch(d)
    init_count = config.default_init(d)
    if init_count + config.budget > pool.n:
        raise CapacityError(
            f"init ({init_count}) + budget ({config.budget}) exceeds pool size {pool.n}"
        )
    oracle = Oracle(pool, config.noise_std, _derive(rep_seed, 1))
    design = latin_hypercube(init_count, pool.bounds, _derive(rep_seed, 2))
    data = ObservationSet()
    for i in snap_to_pool(design, pool):
        data.add(i, oracle(i))
    select_rng = np.random.default_rng(_derive(rep_seed, 3))

    arch = NetworkArchitecture(config.layers, config.width)
    minor = MinorHyperparams(config.learning_rate, config.dropout_rate)
    grid = TuningGrid(config.learning_rates, config.dropout_rates)
    train_cfg = TrainingConfig(epochs=config.epochs)
    trace = ExperimentTrace(config.method, repetition, rep_seed, true_partition=ctx.truth_partition)
    remaining = config.budget
    it = 0
    start = time.perf_counter()
    chosen: tuple = ()
    while True:
        try:
            if config.is_bnn:
                if config.tune_stride and it % config.tune_stride == 0 and len(data) >= 5:
                    res = tune(
                        data, pool, arch, grid, _derive(rep_seed, 4, it),
                        config.tune_epochs, train_cfg, config.max_layers, config.max_width,
                    )
                    arch, minor = res.best_arch, res.best_minor
                model = train_bnn(data, pool, arch, minor, None, _derive(rep_seed, 5, it), train_cfg)
                ens = mc_predict(model, pool, config.M, _derive(rep_seed, 6, it))
                values = mean_prediction(ens)
            else:
                gp = gp_fit_mle(
                    data, pool, config.gp_restarts, _derive(rep_seed, 7, it), config.gp_noise_variance
                )
                mu, sigma = gp_posterior(gp, pool)
                values = mu
            estimate = classify(values, ctx.spec)
        except Exception as exc:
            raise RuntimeError(f"repetition {repetition}, iteration {it}: {exc}") from exc
        rep = f1_scores(estimate, ctx.truth_partition)
        wall = time.perf_counter() - start if config.record_wall_time else 0.0
        trace.records.append(
            IterationRecord(it, len(data), rep.f1_super, rep.f1_sub, estimate.resolved_threshold, wall, chosen)
        )
        log.info(
            "%s rep %d iter %d n=%d f1_super=%.4f f1_sub=%.4f",
            config.method, repetition, it, len(data), rep.f1_super, rep.f1_sub,
        )
        if remaining == 0:
            trace.final_estimate = estimate
            trace.final_values = values
            break
        mask = np.ones(pool.n, dtype=bool)
        mask[data.indices] = False
        k = min(batch, remaining, int(mask.sum()))
        if config.method == "random":
            picks = select_rng.choice(np.flatnonzero(mask), size=k, replace=False).tolist()
        elif config.method == "straddle":
            picks = acq.select_batch(straddle(mu, sigma, ctx.h, config.straddle_beta), k, mask)
        else:
            picks = acq.select_batch(_score(config, ens, ctx.spec), k, mask)
        for i in picks:
            data.add(i, oracle(i))
        chosen = tuple(int(i) for i in picks)
        remaining -= k
        it += 1
    trace.observed = list(data.indices)
    return trace


def run_experiment(config: ExperimentConfig) -> list[ExperimentTrace]:
    """One trace per repetition; repetition ``r`` uses seed ``config.seed + r``."""
    return [run_repetition(config, r) for r in range(config.repetitions)]


def write_trace(traces, path) -> None:
    if not traces:
        raise InvalidInputError("no traces to write")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for tr in traces:
            for r in tr.records:
                w.writerow(
                    [
                        tr.method,
                        tr.repetition,
                        r.iteration,
                        r.n_sampled,
                        repr(float(r.f1_super)),
                        repr(float(r.f1_sub)),
                        repr(float(r.resolved_threshold)),
                        repr(float(r.wall_seconds)),
                    ]
                )


def read_trace(path) -> list[ExperimentTrace]:
    """Parse a trace CSV back into traces (chosen indices are not stored)."""
    traces: dict[tuple[str, int], ExperimentTrace] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise InvalidInputError(f"{path}: unexpected trace header {reader.fieldnames}")
        for row in reader:
            key = (row["method"], int(row["repetition"]))
            tr = traces.setdefault(key, ExperimentTrace(key[0], key[1], seed=-1))
            tr.records.append(
                IterationRecord(
                    int(row["iteration"]),
                    int(row["n_sampled"]),
                    float(row["f1_super"]),
                    float(row["f1_sub"]),
                    float(row["threshold"]),
                    float(row["wall_seconds"]),
                )
            )
    return list(traces.values())


def write_chosen(traces, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "repetition", "iteration", "index"])
        for tr in traces:
            for r in tr.records:
                for i in r.chosen:
                    w.writerow([tr.method, tr.repetition, r.iteration, i])


def mean_and_stderr(traces, column: str):
    """Per-iteration mean, standard error (sample std / sqrt(R)) and mean n_sampled."""
    length = min(len(t.records) for t in traces)
    vals = np.array([[getattr(r, column) for r in t.records[:length]] for t in traces])
    n_sampled = np.array([[r.n_sampled for r in t.records[:length]] for t in traces]).mean(axis=0)
    mean = vals.mean(axis=0)
    if len(traces) > 1:
        se = vals.std(axis=0, ddof=1) / math.sqrt(len(traces))
    else:
        se = np.zeros_like(mean)
    return n_sampled, mean, se


def emit_plot(traces, path) -> None:
    """F1 (super and sub) versus samples with mean +/- standard-error bands per method."""
    if not traces:
        raise InvalidInputError("no traces to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_method: dict[str, list] = {}
    for tr in traces:
        by_method.setdefault(tr.method, []).append(tr)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharex=True)
    for method, group in sorted(by_method.items()):
        for ax, col in zip(axes, ("f1_super", "f1_sub")):
            x, m, se = mean_and_stderr(group, col)
            (line,) = ax.plot(x, m, label=method)
            ax.fill_between(x, m - se, m + se, alpha=0.25, color=line.get_color())
    for ax, title in zip(axes, ("super-level set", "sub-level set")):
        ax.set_title(f"F1, {title}")
        ax.set_xlabel("samples")
        ax.set_ylim(0, 1.02)
    axes[0].set_ylabel("F1")
    axes[0].legend(loc="lower right")
    fig.tight_layout()
    path = Path(path)
    fmt = path.suffix.lstrip(".") or "svg"
    fig.savefig(path, format=fmt, metadata={"Date": None} if fmt == "svg" else None)
    plt.close(fig)
