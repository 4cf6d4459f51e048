"""Acquisition scores over a prediction ensemble and greedy batch selection.

Explicit criteria classify each pass at a pool point against a fixed
threshold and score the resulting two-class disagreement. The implicit
criterion substitutes each pass value into the mean field, recomputes the
fraction-of-maximum threshold, and scores the spread of the resulting
super-level-set cardinalities.

Per-pass class probabilities are hard indicators by default, so every
per-pass (conditional) entropy is exactly zero. ``soft_sigma`` switches the
explicit criteria to Gaussian-smoothed indicators; that mode goes beyond
the hard-indicator construction and is off unless requested.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr, xlogy

from . import kernels
from .domain import CapacityError, InvalidInputError

__all__ = [
    "AcquisitionScores",
    "GSample",
    "binary_entropy",
    "acq_explicit_mi",
    "acq_explicit_entropy",
    "acq_explicit_varratio",
    "implicit_G_values",
    "acq_implicit_mi",
    "implicit_terms",
    "select_batch",
    "write_scores_csv",
    "TIE_TOL",
]

TIE_TOL = 1e-9


@dataclass(frozen=True)
class AcquisitionScores:
    scores: np.ndarray
    tie_cards: np.ndarray | None = None

    def __len__(self):
        return self.scores.shape[0]


@dataclass(frozen=True)
class GSample:
    """Substituted cardinalities ``q_values`` and thresholds for one pool point."""

    q_values: np.ndarray
    thresholds: np.ndarray


def _passes(ensemble) -> np.ndarray:
    passes = getattr(ensemble, "passes", ensemble)
    passes = np.asarray(passes, dtype=np.float64)
    if passes.ndim != 2 or passes.shape[0] < 1 or passes.shape[1] < 1:
        raise InvalidInputError("ensemble passes must be a non-empty (M, n) matrix")
    return passes


def _mean(ensemble, passes) -> np.ndarray:
    if isinstance(ensemble, np.ndarray) or not hasattr(ensemble, "mean"):
        return passes.mean(axis=0)
    return np.asarray(ensemble.mean, dtype=np.float64)


def binary_entropy(p) -> np.ndarray:
    """Entropy in nats of a Bernoulli(p) variable, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))


def _above_fraction(ensemble, h, soft_sigma):
    passes = _passes(ensemble)
    m = passes.shape[0]
    if soft_sigma:
        per_pass = ndtr((passes - h) / soft_sigma)
        return per_pass.mean(axis=0), per_pass
    return kernels.explicit_counts(passes, float(h)) / m, None


def acq_explicit_mi(ensemble, h: float, soft_sigma: float | None = None) -> AcquisitionScores:
    """Mutual information between the above-``h`` indicator and the weights."""
    p_hat, per_pass = _above_fraction(ensemble, h, soft_sigma)
    total = binary_entropy(p_hat)
    if per_pass is None:
        # hard indicators: each per-pass distribution is a point mass
        expected = np.zeros_like(total)
    else:
        expected = binary_entropy(per_pass).mean(axis=0)
    return AcquisitionScores(np.clip(total - expected, 0.0, np.log(2.0)))


def acq_explicit_entropy(ensemble, h: float, soft_sigma: float | None = None) -> AcquisitionScores:
    p_hat, _ = _above_fraction(ensemble, h, soft_sigma)
    return AcquisitionScores(binary_entropy(p_hat))


def acq_explicit_varratio(ensemble, h: float, soft_sigma: float | None = None) -> AcquisitionScores:
    p_hat, _ = _above_fraction(ensemble, h, soft_sigma)
    return AcquisitionScores(1.0 - np.maximum(p_hat, 1.0 - p_hat))


def implicit_G_values(ensemble, l: float, x_index: int) -> GSample:
    """Cardinalities of the substituted super-level set at one pool point.

    For every pass ``j`` the mean field is kept at all other points and the
    value at ``x_index`` is replaced by that pass's prediction.
    """
    if not 0.0 <= l <= 1.0:
        raise InvalidInputError("implicit ratio must lie in [0, 1]")
    passes = _passes(ensemble)
    mu = _mean(ensemble, passes)
    n = mu.size
    if not 0 <= x_index < n:
        raise InvalidInputError(f"x_index {x_index} outside pool of size {n}")
    best, arg, second = kernels.top_two(mu)
    other = second if x_index == arg else best
    v = passes[:, x_index]
    tau = l * np.maximum(v, other)
    s = np.sort(mu)
    q = n - np.searchsorted(s, tau, side="right") - (mu[x_index] > tau) + (v > tau)
    return GSample(q.astype(np.int64), tau)


def implicit_terms(ensemble, l: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Both entropy terms of the implicit criterion plus tie-break cardinalities.

    Returns ``(marginal_entropy, expected_conditional_entropy, tie_cards)``.
    The conditional term is evaluated from the per-pass point masses rather
    than assumed to vanish.
    """
    if not 0.0 <= l <= 1.0:
        raise InvalidInputError("implicit ratio must lie in [0, 1]")
    passes = _passes(ensemble)
    mu = _mean(ensemble, passes)
    marginal, tie = kernels.implicit_scores(passes, mu, float(l))
    # one atom of mass 1 per pass: -sum_q p log p over that atom
    point_mass = np.ones(passes.shape[1])
    conditional = -xlogy(point_mass, point_mass)
    return marginal, conditional, tie


def acq_implicit_mi(ensemble, l: float) -> AcquisitionScores:
    marginal, conditional, tie = implicit_terms(ensemble, l)
    m = _passes(ensemble).shape[0]
    scores = np.clip(marginal - conditional, 0.0, np.log(m))
    return AcquisitionScores(scores, tie)


def select_batch(scores: AcquisitionScores, k: int, mask=None) -> list[int]:
    """Top-``k`` pool indices by score.

    Ordering is score descending, then tie cardinality ascending (when
    present), then index ascending. Scores within ``TIE_TOL`` of each other
    count as equal. ``mask`` marks selectable indices (``True``); observed
    points should be masked out by the caller.
    """
    s = np.asarray(scores.scores, dtype=np.float64)
    n = s.size
    avail = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    cand = np.flatnonzero(avail)
    if k > cand.size:
        raise CapacityError(f"asked for {k} points, only {cand.size} selectable")
    if k <= 0:
        return []
    # anything below the k-th best score by more than TIE_TOL cannot be chosen
    kth = np.partition(s[cand], cand.size - k)[cand.size - k]
    cand = cand[s[cand] >= kth - TIE_TOL]
    cs = s[cand]
    # bucket scores so values within TIE_TOL of the bucket head compare equal
    order = np.argsort(-cs, kind="stable")
    level = np.empty(cand.size, dtype=np.int64)
    head = None
    rank = -1
    for pos in order:
        if head is None or head - cs[pos] > TIE_TOL:
            head = cs[pos]
            rank += 1
        level[pos] = rank
    tie = (
        np.zeros(cand.size, dtype=np.int64)
        if scores.tie_cards is None
        else np.asarray(scores.tie_cards, dtype=np.int64)[cand]
    )
    final = np.lexsort((cand, tie, level))
    return [int(i) for i in cand[final[:k]]]


def write_scores_csv(scores: AcquisitionScores, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "score", "tie_card"])
        for i, sc in enumerate(scores.scores):
            tc = "" if scores.tie_cards is None else int(scores.tie_cards[i])
            w.writerow([i, repr(float(sc)), tc])
