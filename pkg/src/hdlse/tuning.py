"""Architecture growth plus learning-rate/dropout grid search by validation MSE."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import CandidatePool, InvalidInputError, ObservationSet
from .surrogate import (
    DivergenceError,
    MinorHyperparams,
    NetworkArchitecture,
    TrainingConfig,
    fit_arrays,
)

__all__ = [
    "TuningGrid",
    "TuningRecord",
    "TuningResult",
    "TuningFailedError",
    "propose_major",
    "tune",
    "split_indices",
    "write_tuning_csv",
]

MAX_LAYERS = 4
MAX_WIDTH = 1024


class TuningFailedError(RuntimeError):
    def __init__(self, records):
        super().__init__(f"all {len(records)} tuning candidates diverged")
        self.records = records


@dataclass(frozen=True)
class TuningGrid:
    learning_rates: tuple[float, ...] = (1e-2, 5e-3, 1e-3)
    dropout_rates: tuple[float, ...] = (0.01, 0.05, 0.1)

    def __post_init__(self):
        if not self.learning_rates or not self.dropout_rates:
            raise InvalidInputError("tuning grid lists must be non-empty")
        object.__setattr__(self, "learning_rates", tuple(float(v) for v in self.learning_rates))
        object.__setattr__(self, "dropout_rates", tuple(float(v) for v in self.dropout_rates))
        for lr in self.learning_rates:
            if not lr > 0:
                raise InvalidInputError("learning rates must be positive")
        for p in self.dropout_rates:
            if not 0 <= p < 1:
                raise InvalidInputError("dropout rates must lie in [0, 1)")

    def cells(self):
        return [MinorHyperparams(lr, p) for lr in self.learning_rates for p in self.dropout_rates]


@dataclass(frozen=True)
class TuningRecord:
    arch: NetworkArchitecture
    minor: MinorHyperparams
    val_mse: float


@dataclass(frozen=True)
class TuningResult:
    best_arch: NetworkArchitecture
    best_minor: MinorHyperparams
    validation_mse: float
    evaluated: list[TuningRecord] = field(default_factory=list)


def propose_major(
    current: NetworkArchitecture, max_layers: int = MAX_LAYERS, max_width: int = MAX_WIDTH
) -> list[NetworkArchitecture]:
    """Current architecture, twice as wide, and one layer deeper, within caps."""
    out = [current]
    wider = NetworkArchitecture(current.layers, 2 * current.width, current.activation)
    deeper = NetworkArchitecture(current.layers + 1, current.width, current.activation)
    if wider.width <= max_width:
        out.append(wider)
    if deeper.layers <= max_layers:
        out.append(deeper)
    return out


def split_indices(n: int, seed: int, train_fraction: float = 0.8):
    """Seeded random split into training and validation positions."""
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def tune(
    data: ObservationSet,
    pool: CandidatePool,
    current: NetworkArchitecture,
    grid: TuningGrid = TuningGrid(),
    seed: int = 0,
    epochs: int | None = None,
    config: TrainingConfig = TrainingConfig(),
    max_layers: int = MAX_LAYERS,
    max_width: int = MAX_WIDTH,
) -> TuningResult:
    """Evaluate every (architecture, grid cell) pair on one 80/20 split.

    Divergent candidates are kept in ``evaluated`` with infinite MSE. The
    caller retrains the winning pair on the full data.
    """
    if len(data) < 5:
        raise InvalidInputError(f"tuning needs at least 5 observations, got {len(data)}")
    x, y = data.arrays(pool)
    tr, va = split_indices(len(data), seed)
    records = []
    for arch in propose_major(current, max_layers, max_width):
        for minor in grid.cells():
            try:
                model = fit_arrays(x[tr], y[tr], arch, minor, seed, epochs, config)
                pred = model.predict_deterministic(x[va])
                mse = float(np.mean((pred - y[va]) ** 2))
                if not math.isfinite(mse):
                    mse = math.inf
            except DivergenceError:
                mse = math.inf
            records.append(TuningRecord(arch, minor, mse))
    finite = [r for r in records if math.isfinite(r.val_mse)]
    if not finite:
        raise TuningFailedError(records)
    best = min(finite, key=lambda r: r.val_mse)  # first minimum in evaluation order
    return TuningResult(best.arch, best.minor, best.val_mse, records)


def write_tuning_csv(result: TuningResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layers", "width", "learning_rate", "dropout_rate", "val_mse"])
        for r in result.evaluated:
            w.writerow(
                [r.arch.layers, r.arch.width, r.minor.learning_rate, r.minor.dropout_rate, repr(r.val_mse)]
            )
