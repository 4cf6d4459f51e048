"""Gaussian-process baseline: Matern-5/2 ARD kernel, multi-start ML-II fit, Straddle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .acquisition import AcquisitionScores
from .domain import CandidatePool, InvalidInputError, ObservationSet
from .surrogate import InsufficientDataError

__all__ = [
    "GPModel",
    "GPNumericalError",
    "matern52",
    "gp_fit_mle",
    "gp_fit_arrays",
    "gp_posterior",
    "log_marginal_likelihood",
    "straddle",
    "JITTER_LADDER",
]

JITTER_LADDER = tuple(10.0**e for e in range(-10, -3))
STRADDLE_BETA = 1.96
_SQRT5 = math.sqrt(5.0)


class GPNumericalError(np.linalg.LinAlgError):
    pass


def matern52(xa, xb, lengthscales, signal_variance):
    diff = (xa[:, None, :] - xb[None, :, :]) / lengthscales
    r = np.sqrt(np.sum(diff**2, axis=-1))
    sr = _SQRT5 * r
    return signal_variance * (1.0 + sr + sr**2 / 3.0) * np.exp(-sr)


def _cholesky(k, scale):
    """Cholesky factor with escalating diagonal jitter; returns (L, jitter)."""
    eye = np.eye(k.shape[0])
    for jit in (0.0,) + JITTER_LADDER:
        try:
            lower = np.linalg.cholesky(k + jit * scale * eye)
        except np.linalg.LinAlgError:
            continue
        # numpy lets exact zero pivots through
        if np.all(np.diag(lower) ** 2 > 1e-14 * scale):
            return lower, jit * scale
    raise GPNumericalError(
        f"covariance not positive definite even with jitter up to {JITTER_LADDER[-1] * scale:.3g} "
        f"(tried {', '.join(f'{j:.0e}' for j in JITTER_LADDER)} x {scale:.3g})"
    )


@dataclass
class GPModel:
    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float
    mean: float
    x_train: np.ndarray
    y_train: np.ndarray
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0
    log_marginal_likelihood: float = -math.inf
    restart_lmls: list[float] = field(default_factory=list)


def _nll_and_grad(theta, x, yc, fit_noise, fixed_noise):
    d = x.shape[1]
    ls = np.exp(theta[:d])
    sv = math.exp(theta[d])
    nv = math.exp(theta[d + 1]) if fit_noise else fixed_noise
    n = x.shape[0]
    diff = (x[:, None, :] - x[None, :, :]) / ls
    sq = diff**2
    r = np.sqrt(sq.sum(axis=-1))
    sr = _SQRT5 * r
    e = np.exp(-sr)
    k = sv * (1.0 + sr + sr**2 / 3.0) * e
    ky = k + nv * np.eye(n)
    try:
        lower = np.linalg.cholesky(ky + 1e-10 * sv * np.eye(n))
    except np.linalg.LinAlgError:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve((lower, True), yc)
    nll = 0.5 * yc @ alpha + np.log(np.diag(lower)).sum() + 0.5 * n * math.log(2 * math.pi)
    inner = np.outer(alpha, alpha) - cho_solve((lower, True), np.eye(n))
    grad = np.empty_like(theta)
    base = sv * (5.0 / 3.0) * (1.0 + sr) * e
    for i in range(d):
        grad[i] = -0.5 * np.sum(inner * (base * sq[:, :, i]))
    grad[d] = -0.5 * np.sum(inner * k)
    if fit_noise:
        grad[d + 1] = -0.5 * np.trace(inner) * nv
    return nll, grad


def log_marginal_likelihood(model: GPModel) -> float:
    n = model.y_train.shape[0]
    yc = model.y_train - model.mean
    return float(
        -0.5 * yc @ model.alpha - np.log(np.diag(model.chol)).sum() - 0.5 * n * math.log(2 * math.pi)
    )


def _build(x, y, ls, sv, nv, mean):
    k = matern52(x, x, ls, sv) + nv * np.eye(x.shape[0])
    lower, jit = _cholesky(k, sv)
    alpha = cho_solve((lower, True), y - mean)
    model = GPModel(ls, sv, nv, mean, x, y, lower, alpha, jit)
    model.log_marginal_likelihood = log_marginal_likelihood(model)
    return model


def gp_fit_arrays(
    x,
    y,
    restarts: int = 5,
    seed: int = 0,
    noise_variance: float | None = None,
    bounds=None,
) -> GPModel:
    """Maximum-marginal-likelihood fit on raw arrays.

    ``noise_variance=None`` fits the noise too; a number fixes it.
    ``bounds`` (d, 2) sets the input range used to scale initial and
    admissible lengthscales; defaults to the data range.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = x.shape
    if n < 2:
        raise InsufficientDataError(f"GP fit needs at least 2 observations, got {n}")
    if restarts < 1:
        raise InvalidInputError("restarts must be >= 1")
    if bounds is None:
        span = np.ptp(x, axis=0)
    else:
        bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        span = bounds[:, 1] - bounds[:, 0]
    span = np.where(span > 0, span, 1.0)
    mean = float(y.mean())
    yc = y - mean
    var_y = float(np.var(y)) if np.var(y) > 0 else 1.0
    fit_noise = noise_variance is None
    fixed = 0.0 if fit_noise else float(noise_variance)

    lo = list(np.log(1e-3 * span)) + [math.log(1e-4 * var_y)]
    hi = list(np.log(1e3 * span)) + [math.log(1e3 * var_y)]
    if fit_noise:
        lo.append(math.log(1e-10 * var_y))
        hi.append(math.log(var_y))
    opt_bounds = list(zip(lo, hi))

    rng = np.random.default_rng(seed)
    candidates = []
    for _ in range(restarts):
        ls0 = span * np.exp(rng.uniform(math.log(1e-2), math.log(1e1), size=d))
        theta0 = list(np.log(ls0)) + [math.log(var_y)]
        if fit_noise:
            theta0.append(math.log(1e-2 * var_y))
        theta0 = np.clip(theta0, lo, hi)
        res = minimize(
            _nll_and_grad,
            theta0,
            args=(x, yc, fit_noise, fixed),
            jac=True,
            method="L-BFGS-B",
            bounds=opt_bounds,
        )
        candidates.append(res.x)

    best = None
    lmls = []
    for theta in candidates:
        ls = np.exp(theta[:d])
        sv = math.exp(theta[d])
        nv = math.exp(theta[d + 1]) if fit_noise else fixed
        try:
            model = _build(x, y, ls, sv, nv, mean)
        except GPNumericalError:
            lmls.append(-math.inf)
            continue
        lmls.append(model.log_marginal_likelihood)
        if best is None or model.log_marginal_likelihood > best.log_marginal_likelihood:
            best = model
    if best is None:
        # surfaces the jitter diagnostics of the last candidate
        theta = candidates[-1]
        _build(x, y, np.exp(theta[:d]), math.exp(theta[d]),
               math.exp(theta[d + 1]) if fit_noise else fixed, mean)
    best.restart_lmls = lmls
    return best


def gp_fit_mle(
    data: ObservationSet,
    pool: CandidatePool,
    restarts: int = 5,
    seed: int = 0,
    noise_variance: float | None = None,
) -> GPModel:
    x, y = data.arrays(pool)
    return gp_fit_arrays(x, y, restarts, seed, noise_variance, bounds=pool.bounds)


def gp_posterior(model: GPModel, pool) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and standard deviation of the latent function."""
    pts = pool.points if isinstance(pool, CandidatePool) else np.atleast_2d(pool)
    ks = matern52(model.x_train, pts, model.lengthscales, model.signal_variance)
    mu = model.mean + ks.T @ model.alpha
    v = solve_triangular(model.chol, ks, lower=True)
    var = model.signal_variance - np.sum(v**2, axis=0)
    return mu, np.sqrt(np.maximum(var, 0.0))


def straddle(mu, sigma, h: float, beta: float = STRADDLE_BETA) -> AcquisitionScores:
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if mu.shape != sigma.shape:
        raise InvalidInputError("mu and sigma must have the same shape")
    return AcquisitionScores(beta * sigma - np.abs(mu - h))
