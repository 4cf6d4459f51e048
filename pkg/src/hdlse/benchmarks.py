"""Synthetic test functions, pool construction, noisy oracles, CSV pools."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import CandidatePool, InvalidInputError

__all__ = [
    "BenchmarkSpec",
    "BENCHMARKS",
    "ackley",
    "levy",
    "alpine1",
    "eval_benchmark",
    "build_pool",
    "Oracle",
    "load_csv_pool",
    "write_csv_pool",
    "PoolParseError",
]


class PoolParseError(ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


def ackley(x):
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    # grouped so each pair cancels exactly at the origin
    radial = -20.0 * np.expm1(-0.2 * np.sqrt(np.sum(x**2, axis=-1) / d))
    ripple = -math.e * np.expm1(np.sum(np.cos(2 * np.pi * x), axis=-1) / d - 1.0)
    return radial + ripple


def levy(x):
    x = np.asarray(x, dtype=float)
    w = 1.0 + (x - 1.0) / 4.0
    w1, wd = w[..., 0], w[..., -1]
    mid = w[..., :-1]
    # sin^2 has period pi, so shifting by one keeps the minimizer exact in floats
    return (
        np.sin(np.pi * (w1 - 1.0)) ** 2
        + np.sum((mid - 1) ** 2 * (1 + 10 * np.sin(np.pi * mid + 1) ** 2), axis=-1)
        + (wd - 1) ** 2 * (1 + np.sin(2 * np.pi * wd) ** 2)
    )


def alpine1(x):
    x = np.asarray(x, dtype=float)
    return np.sum(np.abs(x * np.sin(x) + 0.1 * x), axis=-1)


# name -> (function, half-width of the symmetric canonical box)
BENCHMARKS = {
    "ackley": (ackley, 32.768),
    "levy": (levy, 10.0),
    "alpine1": (alpine1, 10.0),
}


def _lookup(name):
    try:
        return BENCHMARKS[name.lower()]
    except KeyError:
        raise InvalidInputError(
            f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}"
        ) from None


def benchmark_bounds(name: str, d: int) -> np.ndarray:
    _, half = _lookup(name)
    return np.tile([-half, half], (d, 1))


def eval_benchmark(name: str, x) -> float | np.ndarray:
    """Noiseless value of a named benchmark at ``x`` (a d-vector or (n, d) array)."""
    fn, half = _lookup(name)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > half):
        raise InvalidInputError(f"{name} is defined on [-{half}, {half}]^d")
    out = fn(x)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str = "ackley"
    d: int = 2
    pool_size: int | None = None
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        _lookup(self.name)
        if self.d < 1:
            raise InvalidInputError("d must be >= 1")
        if self.pool_size is not None and self.pool_size < 1:
            raise InvalidInputError("pool_size must be >= 1")
        if self.noise_std < 0:
            raise InvalidInputError("noise_std must be >= 0")

    @property
    def size(self) -> int:
        return 10000 * self.d if self.pool_size is None else self.pool_size


def build_pool(spec: BenchmarkSpec) -> CandidatePool:
    """Uniform random pool over the canonical box with noiseless truth."""
    bounds = benchmark_bounds(spec.name, spec.d)
    rng = np.random.default_rng(spec.seed)
    pts = rng.uniform(bounds[:, 0], bounds[:, 1], size=(spec.size, spec.d))
    return CandidatePool(pts, bounds, eval_benchmark(spec.name, pts))


class Oracle:
    """Noisy lookup of pool truth: ``truth[i] + N(0, noise_std**2)``."""

    def __init__(self, pool: CandidatePool, noise_std: float = 0.0, seed: int = 0):
        if pool.truth is None:
            raise InvalidInputError("oracle needs a pool with ground truth")
        self.truth = pool.truth
        self.noise_std = float(noise_std)
        self._rng = np.random.default_rng(seed)

    def __call__(self, index: int) -> float:
        y = float(self.truth[index])
        if self.noise_std > 0:
            y += float(self._rng.normal(0.0, self.noise_std))
        return y


def load_csv_pool(path) -> CandidatePool:
    """Read a pool from ``x1,...,xd,y`` CSV; bounds are the per-column range.

    Rows and columns in error messages are 1-based, with the header as row 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PoolParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[-1] != "y":
            raise PoolParseError(f"{path}: last column must be named 'y'", row=1)
        if len(header) < 2:
            raise PoolParseError(f"{path}: need at least one feature column", row=1)
        rows = []
        for r, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise PoolParseError(
                    f"{path}: row {r} has {len(row)} fields, expected {len(header)}", row=r
                )
            vals = []
            for c, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise PoolParseError(
                        f"{path}: row {r}, column {c} ({header[c - 1]!r}): "
                        f"cannot parse {cell!r} as a number",
                        row=r,
                        column=c,
                    ) from None
                if not math.isfinite(v):
                    raise PoolParseError(
                        f"{path}: row {r}, column {c}: non-finite value", row=r, column=c
                    )
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise PoolParseError(f"{path}: no data rows")
    data = np.asarray(rows)
    pts, y = data[:, :-1], data[:, -1]
    bounds = np.column_stack([pts.min(axis=0), pts.max(axis=0)])
    return CandidatePool(pts, bounds, y)


def write_csv_pool(pool: CandidatePool, path) -> None:
    if pool.truth is None:
        raise InvalidInputError("pool has no truth column to write")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(pool.d)] + ["y"])
        for p, y in zip(pool.points, pool.truth):
            w.writerow([repr(float(v)) for v in p] + [repr(float(y))])
