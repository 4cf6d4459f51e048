"""Pools, observations, thresholds, level-set partitions and F1 scoring.

Boundary convention used everywhere in the package: a point belongs to the
super-level set when its value is *strictly* greater than the threshold and
to the sub-level set otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np
from scipy.stats import qmc

__all__ = [
    "CandidatePool",
    "ObservationSet",
    "Explicit",
    "Implicit",
    "ThresholdSpec",
    "LevelSetEstimate",
    "F1Report",
    "InvalidInputError",
    "CapacityError",
    "classify",
    "f1_scores",
    "latin_hypercube",
    "snap_to_pool",
    "calibrate_threshold",
    "implicit_ratio_from_h",
]


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class CapacityError(ValueError):
    """Raised when a request needs more unobserved pool points than exist."""


@dataclass(frozen=True)
class CandidatePool:
    """Finite candidate domain.

    Parameters
    ----------
    points : ndarray, shape (n, d)
        Raw (unnormalized) coordinates.
    bounds : ndarray, shape (d, 2)
        Per-dimension ``(lo, hi)``.
    truth : ndarray, shape (n,), optional
        Noiseless function values, when known.
    """

    points: np.ndarray
    bounds: np.ndarray
    truth: np.ndarray | None = None

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if points.shape[0] < 1 or points.shape[1] < 1:
            raise InvalidInputError("pool needs at least one point and one dimension")
        if bounds.shape[0] != points.shape[1]:
            raise InvalidInputError(
                f"bounds cover {bounds.shape[0]} dims, points have {points.shape[1]}"
            )
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise InvalidInputError("bounds must satisfy lo <= hi")
        if np.any(points < bounds[:, 0]) or np.any(points > bounds[:, 1]):
            raise InvalidInputError("pool points fall outside bounds")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "bounds", bounds)
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=float).ravel()
            if truth.shape[0] != points.shape[0]:
                raise InvalidInputError("truth length must equal number of points")
            if not np.all(np.isfinite(truth)):
                raise InvalidInputError("truth values must be finite")
            object.__setattr__(self, "truth", truth)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def normalized(self) -> np.ndarray:
        """Coordinates mapped to [0, 1] per dimension using the pool bounds."""
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        span = np.where(hi > lo, hi - lo, 1.0)
        return (self.points - lo) / span


@dataclass
class ObservationSet:
    """Queried pool indices and their (noisy) outputs."""

    indices: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.indices = [int(i) for i in self.indices]
        self.values = [float(v) for v in self.values]
        if len(self.indices) != len(self.values):
            raise InvalidInputError("indices and values differ in length")
        if len(set(self.indices)) != len(self.indices):
            raise InvalidInputError("duplicate observation index")
        if not all(math.isfinite(v) for v in self.values):
            raise InvalidInputError("observed values must be finite")

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, index) -> bool:
        return int(index) in set(self.indices)

    def add(self, index: int, y: float) -> None:
        index = int(index)
        if index in self.indices:
            raise InvalidInputError(f"index {index} already observed")
        if not math.isfinite(y):
            raise InvalidInputError(f"non-finite observation at index {index}")
        self.indices.append(index)
        self.values.append(float(y))

    def validate(self, pool: CandidatePool) -> None:
        if any(i < 0 or i >= pool.n for i in self.indices):
            raise InvalidInputError("observation index outside the pool")

    def arrays(self, pool: CandidatePool) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, y)`` for the observed points."""
        self.validate(pool)
        idx = np.asarray(self.indices, dtype=int)
        return pool.points[idx], np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class Explicit:
    """Fixed threshold ``h``."""

    h: float


@dataclass(frozen=True)
class Implicit:
    """Threshold ``l * max(values)`` with ratio ``0 <= l <= 1``."""

    l: float

    def __post_init__(self):
        if not 0.0 <= self.l <= 1.0:
            raise InvalidInputError(f"implicit ratio must lie in [0, 1], got {self.l}")


ThresholdSpec = Union[Explicit, Implicit]


@dataclass(frozen=True)
class LevelSetEstimate:
    super: frozenset
    sub: frozenset
    resolved_threshold: float

    @property
    def n(self) -> int:
        return len(self.super) + len(self.sub)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[list(self.super)] = True
        return out


@dataclass(frozen=True)
class F1Report:
    f1_super: float
    f1_sub: float
    precision_super: float
    recall_super: float
    precision_sub: float
    recall_sub: float


def resolve_threshold(values: np.ndarray, spec: ThresholdSpec) -> float:
    if isinstance(spec, Explicit):
        return float(spec.h)
    if isinstance(spec, Implicit):
        return float(spec.l * np.max(values))
    raise InvalidInputError(f"unknown threshold spec {spec!r}")


def classify(values, spec: ThresholdSpec) -> LevelSetEstimate:
    """Split pool indices into super (``> threshold``) and sub (``<=``) sets."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise InvalidInputError("cannot classify an empty vector")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("values must be finite")
    thr = resolve_threshold(values, spec)
    above = values > thr
    idx = np.arange(values.size)
    return LevelSetEstimate(
        super=frozenset(idx[above].tolist()),
        sub=frozenset(idx[~above].tolist()),
        resolved_threshold=thr,
    )


def _prf(pred: np.ndarray, true: np.ndarray) -> tuple[float, float, float]:
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return f1, precision, recall


def f1_scores(estimate: LevelSetEstimate, truth: LevelSetEstimate) -> F1Report:
    """Per-class precision, recall and F1 of ``estimate`` against ``truth``.

    F1 is defined as 0 whenever precision and recall are both 0.
    """
    est_all = estimate.super | estimate.sub
    if est_all != (truth.super | truth.sub):
        raise InvalidInputError("estimate and truth cover different index sets")
    n = max(est_all) + 1 if est_all else 0
    if len(est_all) != n:
        # Arbitrary index sets: relabel to a dense range.
        order = {i: k for k, i in enumerate(sorted(est_all))}
        pred = np.zeros(len(order), dtype=bool)
        true = np.zeros(len(order), dtype=bool)
        pred[[order[i] for i in estimate.super]] = True
        true[[order[i] for i in truth.super]] = True
    else:
        pred = estimate.mask()
        true = truth.mask()
    f_sup, p_sup, r_sup = _prf(pred, true)
    f_sub, p_sub, r_sub = _prf(~pred, ~true)
    return F1Report(f_sup, f_sub, p_sup, r_sup, p_sub, r_sub)


def latin_hypercube(n: int, bounds, seed: int) -> np.ndarray:
    """Latin hypercube design of ``n`` points scaled into ``bounds``."""
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if bounds.shape[0] < 1 or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise InvalidInputError("each bound needs lo < hi")
    sampler = qmc.LatinHypercube(d=bounds.shape[0], seed=np.random.default_rng(seed))
    unit = sampler.random(n)
    return qmc.scale(unit, bounds[:, 0], bounds[:, 1])


def snap_to_pool(points, pool: CandidatePool, excluded: Iterable[int] = ()) -> list[int]:
    """Greedy nearest-pool-point assignment in normalized coordinates.

    Points are handled in order; each takes the closest pool index not
    excluded and not already taken, lowest index on ties.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    taken = np.zeros(pool.n, dtype=bool)
    for i in excluded:
        taken[int(i)] = True
    if pts.shape[0] > pool.n - int(taken.sum()):
        raise CapacityError(
            f"requested {pts.shape[0]} points but only {pool.n - int(taken.sum())} available"
        )
    lo, hi = pool.bounds[:, 0], pool.bounds[:, 1]
    span = np.where(hi > lo, hi - lo, 1.0)
    normed_pool = pool.normalized()
    chosen = []
    for p in (pts - lo) / span:
        dist = np.sum((normed_pool - p) ** 2, axis=1)
        dist[taken] = np.inf
        k = int(np.argmin(dist))  # first occurrence -> lowest index on ties
        taken[k] = True
        chosen.append(k)
    return chosen


def calibrate_threshold(values, super_fraction: float) -> float:
    """Threshold leaving at most ``floor(super_fraction * n)`` values above it."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise InvalidInputError("values must be a non-empty finite vector")
    if not 0.0 <= super_fraction <= 1.0:
        raise InvalidInputError("super_fraction must lie in [0, 1]")
    n = values.size
    k = int(math.floor(super_fraction * n))
    s = np.sort(values)
    if k >= n:
        lo = s[0]
        return float(lo - max(abs(lo), 1.0) * 1e-12)
    # only s[n-k:] can be strictly above s[n-k-1]; ties with it share its value
    return float(s[n - k - 1])


def implicit_ratio_from_h(values, h: float) -> float:
    """Ratio ``l`` such that ``l * max(values) == h``, clamped into [0, 1]."""
    m = float(np.max(np.asarray(values, dtype=float)))
    if m == 0.0:
        raise ZeroDivisionError("max(values) is 0; implicit ratio undefined")
    ratio = h / m
    if not 0.0 <= ratio <= 1.0:
        warnings.warn(f"implicit ratio {ratio:.6g} outside [0, 1]; clamping", stacklevel=2)
        return min(max(ratio, 0.0), 1.0)
    # h is usually a pool value itself: keep ratio * m from rounding below it
    for _ in range(4):
        if ratio * m >= h or ratio >= 1.0:
            break
        ratio = float(np.nextafter(ratio, np.inf))
    return min(ratio, 1.0)
